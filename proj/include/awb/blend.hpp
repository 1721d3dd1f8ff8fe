#pragma once

#include <utility>
#include <vector>

#include "awb/color_mapping.hpp"
#include "awb/image.hpp"
#include "awb/tensor.hpp"
#include "awb/wb_setting.hpp"

namespace awb {

/// Same-size renderings of one scene, one per setting, canonical order.
struct RenderedSet {
  std::vector<std::pair<WbSetting, ImageRGB>> entries;

  std::size_t size() const { return entries.size(); }
  std::size_t height() const { return entries.at(0).second.height(); }
  std::size_t width() const { return entries.at(0).second.width(); }
  SettingSet settings() const;
  const ImageRGB& at(WbSetting s) const;
  /// Throws DimensionError/ConfigError on < 2 entries, duplicates,
  /// non-canonical order or mixed sizes.
  void validate() const;
};

/// Per-pixel coefficient maps, one per setting, mirroring a RenderedSet.
struct WeightMaps {
  std::vector<std::pair<WbSetting, Plane>> entries;

  std::size_t size() const { return entries.size(); }
  std::size_t height() const { return entries.at(0).second.height; }
  std::size_t width() const { return entries.at(0).second.width; }
  SettingSet settings() const;
};

/// Resizes init to small_size × small_size and applies one mapping per
/// setting. Daylight falls back to the identity when no mapping is given.
RenderedSet render_wb_set(const ImageRGB& init, const std::vector<PolyMapping>& mappings,
                          const SettingSet& settings, std::size_t small_size);

/// clamp01(Σ_i W_i ⊙ I_i).
ImageRGB blend(const WeightMaps& maps, const RenderedSet& renders);
/// Σ_i W_i ⊙ I_i without the final clamp.
ImageRGB blend_unclamped(const WeightMaps& maps, const RenderedSet& renders);

WeightMaps clamp_maps(WeightMaps maps);

RenderedSet resize(const RenderedSet& set, std::size_t height, std::size_t width);
WeightMaps resize(const WeightMaps& maps, std::size_t height, std::size_t width);

/// 1×3K×H×W stack in set order.
template <typename T>
Tensor<T> stack_renders(const RenderedSet& set);
/// Reads batch item n of an N×K×H×W tensor as maps for `settings`.
template <typename T>
WeightMaps maps_from_tensor(const Tensor<T>& t, const SettingSet& settings, std::size_t n = 0);

}  // namespace awb
