#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "awb/blend.hpp"
#include "awb/color_mapping.hpp"
#include "awb/network.hpp"
#include "awb/postproc.hpp"

namespace awb {

struct Model {
  NetworkConfig config;
  ParamStore<float> params;
};

/// Loads a checkpoint and checks its tensors against its configuration.
Model load_model(const std::filesystem::path& checkpoint);

struct InferenceOptions {
  std::size_t size = 384;
  PostprocOptions post;
  /// Debug: skip the network and use a one-hot map selecting this setting.
  std::optional<WbSetting> one_hot;
};

struct InferenceResult {
  ImageRGB corrected;
  WeightMaps maps;  // full resolution, clamped
  std::vector<std::string> trace;
};

/// Full-resolution renderings of `init` with the given mappings (daylight
/// falls back to the identity).
RenderedSet render_full(const ImageRGB& init, const std::vector<PolyMapping>& mappings, const SettingSet& settings);

/// Corrects a scene given its full-resolution renderings: resize to the
/// inference size, predict maps, post-process, resize maps back, clamp and
/// blend at full resolution.
InferenceResult infer_renders(const RenderedSet& full, const Model& model, const InferenceOptions& options);

/// Same starting from a daylight-rendered image and per-setting mappings;
/// small renderings are produced from the resized input.
InferenceResult infer_image(const ImageRGB& init, const std::vector<PolyMapping>& mappings, const Model& model,
                            const InferenceOptions& options);

}  // namespace awb
