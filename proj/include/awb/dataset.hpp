#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "awb/blend.hpp"
#include "awb/image.hpp"
#include "awb/rng.hpp"
#include "awb/tensor.hpp"
#include "awb/wb_setting.hpp"

namespace awb {

struct ManifestRecord {
  std::string id;
  std::map<WbSetting, std::filesystem::path> inputs;
  std::filesystem::path gt;
};

/// JSON lines {"id": ..., "inputs": {"t": path, ...}, "gt": path}. Relative
/// paths resolve against the manifest's directory.
struct DatasetManifest {
  std::vector<ManifestRecord> records;

  /// Checks that every record covers `settings` and that all files exist.
  static DatasetManifest load(const std::filesystem::path& path, const SettingSet& settings);
  void save(const std::filesystem::path& path) const;
};

/// Decoded renders + ground truth of one scene.
struct Scene {
  std::string id;
  RenderedSet renders;
  ImageRGB gt;
};

std::vector<Scene> load_scenes(const DatasetManifest& manifest, const SettingSet& settings);

struct PatchBatch {
  Tensor<float> gt;      // B×3×p×p
  Tensor<float> inputs;  // B×3K×p×p, canonical setting order
  std::vector<std::string> ids;
  std::vector<std::pair<std::size_t, std::size_t>> offsets;  // (y, x)
};

/// Uniform aligned crops from scenes at least p×p. Undersized scenes are
/// skipped with a warning on stderr; DataError if none is usable.
PatchBatch sample_patches(const std::vector<Scene>& scenes, const SettingSet& settings, std::size_t p,
                          std::size_t batch, Rng& rng);

/// The top-left p×p crop of every scene, in order.
PatchBatch fixed_patches(const std::vector<Scene>& scenes, const SettingSet& settings, std::size_t p);

}  // namespace awb
