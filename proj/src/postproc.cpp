#include "awb/postproc.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "awb/errors.hpp"

namespace awb {

void ScaleSet::validate() const {
  if (scales.empty()) throw ConfigError("scale set is empty");
  bool has_one = false;
  for (double s : scales) {
    if (!(s > 0.0 && s <= 1.0)) throw ConfigError("scale set: scales must lie in (0, 1]");
    if (s == 1.0) has_one = true;
  }
  if (!has_one) throw ConfigError("scale set must contain 1.0");
}

std::size_t scaled_size(std::size_t size, double scale, std::size_t multiple, std::size_t min_size) {
  const double target = static_cast<double>(size) * scale;
  auto units = static_cast<std::size_t>(std::llround(target / static_cast<double>(multiple)));
  const std::size_t out = std::max<std::size_t>(units, 1) * multiple;
  if (out < min_size) {
    throw DimensionError("multi-scale: scale " + std::to_string(scale) + " of " + std::to_string(size) +
                         "px gives " + std::to_string(out) + "px, below the network minimum " +
                         std::to_string(min_size));
  }
  return out;
}

WeightMaps multiscale_maps(const MapPredictor& predict, const RenderedSet& renders, const ScaleSet& scales,
                           std::size_t multiple, std::size_t min_size) {
  scales.validate();
  renders.validate();
  const std::size_t h = renders.height(), w = renders.width();
  std::vector<WeightMaps> per_scale;
  for (double s : scales.scales) {
    const std::size_t sh = scaled_size(h, s, multiple, min_size);
    const std::size_t sw = scaled_size(w, s, multiple, min_size);
    WeightMaps m = predict(resize(renders, sh, sw));
    per_scale.push_back(resize(m, h, w));
  }
  WeightMaps out = per_scale.front();
  const double inv = 1.0 / static_cast<double>(per_scale.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& dst = out.entries[i].second.data;
    for (std::size_t p = 0; p < dst.size(); ++p) {
      double acc = 0.0;
      for (const auto& m : per_scale) acc += m.entries[i].second.data[p];
      dst[p] = static_cast<float>(acc * inv);
    }
  }
  return out;
}

WeightMaps apply_postproc(const WeightMaps& maps, const RenderedSet& renders, const ImageRGB& guide,
                          const PostprocOptions& options, const MapPredictor& predict,
                          std::vector<std::string>* trace, std::size_t multiple) {
  WeightMaps out = maps;
  if (options.ms) {
    out = multiscale_maps(predict, renders, options.scales, multiple);
    if (trace) trace->push_back("ms");
  }
  if (options.eas) {
    const ImageRGB g = (guide.height() == out.height() && guide.width() == out.width())
                           ? guide
                           : resize(guide, out.height(), out.width());
    const BilateralGrid grid = build_grid(clamp01(g), options.solver);
    for (auto& [setting, plane] : out.entries) {
      SolveInfo info;
      plane = edge_aware_smooth(plane, grid, options.solver, &info);
      if (!info.converged) {
        std::cerr << "warning: edge-aware smoothing of the '" << tag(setting) << "' map stopped after "
                  << info.iterations << " iterations (relative residual " << info.relative_residual << ")\n";
      }
    }
    if (trace) trace->push_back("eas");
  }
  out = clamp_maps(std::move(out));
  if (trace) trace->push_back("clamp");
  return out;
}

}  // namespace awb
