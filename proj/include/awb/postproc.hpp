#pragma once

#include <functional>
#include <string>
#include <vector>

#include "awb/bilateral_solver.hpp"
#include "awb/blend.hpp"
#include "awb/image.hpp"

namespace awb {

/// Relative scales of the base inference size used for ensembling.
struct ScaleSet {
  std::vector<double> scales{1.0, 0.5, 0.25};

  /// Scales in (0, 1] and 1.0 present.
  void validate() const;
  bool operator==(const ScaleSet&) const = default;
};

struct PostprocOptions {
  bool ms = false;
  bool eas = false;
  ScaleSet scales;
  SolverParams solver;
  bool operator==(const PostprocOptions&) const = default;
};

/// Produces weight maps for a rendered set (the network forward pass).
using MapPredictor = std::function<WeightMaps(const RenderedSet&)>;

/// Side length for a scaled forward pass: round(size · s) snapped to the
/// nearest multiple of `multiple` (at least one multiple). DimensionError
/// when that falls below `min_size`.
std::size_t scaled_size(std::size_t size, double scale, std::size_t multiple, std::size_t min_size);

/// Runs `predict` on renders resized per scale, resizes every result back to
/// the renders' size and averages per setting.
WeightMaps multiscale_maps(const MapPredictor& predict, const RenderedSet& renders, const ScaleSet& scales,
                           std::size_t multiple = 16, std::size_t min_size = 16);

/// ms (if on) then eas (if on) then clamp_maps. When ms is on, `maps` is
/// replaced by the ensemble. The guide is resized to the maps' size when
/// needed. Stage names are appended to `trace` ("ms", "eas", "clamp").
WeightMaps apply_postproc(const WeightMaps& maps, const RenderedSet& renders, const ImageRGB& guide,
                          const PostprocOptions& options, const MapPredictor& predict,
                          std::vector<std::string>* trace = nullptr, std::size_t multiple = 16);

}  // namespace awb
