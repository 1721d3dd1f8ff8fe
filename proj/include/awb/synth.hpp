#pragma once

#include <array>
#include <cstddef>
#include <optional>

#include "awb/blend.hpp"
#include "awb/image.hpp"
#include "awb/rng.hpp"
#include "awb/wb_setting.hpp"

namespace awb {

/// RGB colour (green = 1) of the light a WB preset is tuned for. Rendering
/// with preset i multiplies by the inverse of its entry.
std::array<double, 3> illuminant_rgb(WbSetting s);

struct SynthOptions {
  /// Force every pixel's mask to this setting (degenerate draw).
  std::optional<WbSetting> one_hot;
};

/// Mixed-illuminant scene: reflectance lit by a smooth mixture of the
/// presets' illuminants, rendered once per preset, with
/// gt = Σ_i mask_i ⊙ render_i.
struct SynthScene {
  ImageRGB reflectance;
  RenderedSet renders;
  WeightMaps masks;
  ImageRGB gt;
};

SynthScene synth_mixed_scene(Rng rng, std::size_t size, const SettingSet& settings, const SynthOptions& options = {});

}  // namespace awb
