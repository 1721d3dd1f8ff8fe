#include "awb/blend.hpp"

#include <algorithm>
#include <string>

#include "awb/errors.hpp"

namespace awb {

SettingSet RenderedSet::settings() const {
  SettingSet s;
  for (const auto& [setting, _] : entries) s.push_back(setting);
  return s;
}

const ImageRGB& RenderedSet::at(WbSetting s) const {
  for (const auto& [setting, img] : entries) {
    if (setting == s) return img;
  }
  throw ConfigError(std::string("rendered set has no entry for setting '") + tag(s) + "'");
}

void RenderedSet::validate() const {
  validate_settings(settings());
  for (const auto& [setting, img] : entries) {
    if (img.height() != height() || img.width() != width()) {
      throw DimensionError(std::string("rendered set: entry '") + tag(setting) + "' has a different size");
    }
    if (img.empty()) throw DimensionError("rendered set: empty image");
  }
}

SettingSet WeightMaps::settings() const {
  SettingSet s;
  for (const auto& [setting, _] : entries) s.push_back(setting);
  return s;
}

RenderedSet render_wb_set(const ImageRGB& init, const std::vector<PolyMapping>& mappings,
                          const SettingSet& settings, std::size_t small_size) {
  validate_settings(settings);
  if (small_size < 16) throw ConfigError("render_wb_set: small_size must be >= 16");
  for (std::size_t i = 0; i < mappings.size(); ++i) {
    for (std::size_t j = i + 1; j < mappings.size(); ++j) {
      if (mappings[i].setting == mappings[j].setting) {
        throw ConfigError(std::string("render_wb_set: duplicate mapping for setting '") +
                          tag(mappings[i].setting) + "'");
      }
    }
  }
  const ImageRGB small = resize(init, small_size, small_size);
  RenderedSet out;
  for (WbSetting s : settings) {
    auto it = std::find_if(mappings.begin(), mappings.end(), [s](const PolyMapping& m) { return m.setting == s; });
    if (it != mappings.end()) {
      out.entries.emplace_back(s, apply_mapping(*it, small));
    } else if (s == WbSetting::daylight) {
      out.entries.emplace_back(s, small);
    } else {
      throw ConfigError(std::string("render_wb_set: no mapping for setting '") + tag(s) + "'");
    }
  }
  return out;
}

namespace {

void check_aligned(const WeightMaps& maps, const RenderedSet& renders) {
  if (maps.settings() != renders.settings()) {
    throw ConfigError("blend: weight maps (" + settings_string(maps.settings()) + ") and renders (" +
                      settings_string(renders.settings()) + ") are not aligned");
  }
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const auto& m = maps.entries[i].second;
    const auto& r = renders.entries[i].second;
    if (m.height != r.height() || m.width != r.width()) {
      throw DimensionError("blend: map and rendering sizes differ");
    }
  }
}

}  // namespace

ImageRGB blend_unclamped(const WeightMaps& maps, const RenderedSet& renders) {
  check_aligned(maps, renders);
  ImageRGB out(renders.height(), renders.width());
  const std::size_t np = out.pixels();
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const auto& w = maps.entries[i].second.data;
    const auto& img = renders.entries[i].second.data();
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t p = 0; p < np; ++p) out.data()[c * np + p] += w[p] * img[c * np + p];
  }
  return out;
}

ImageRGB blend(const WeightMaps& maps, const RenderedSet& renders) {
  return clamp01(blend_unclamped(maps, renders));
}

WeightMaps clamp_maps(WeightMaps maps) {
  for (auto& [_, plane] : maps.entries) {
    for (float& v : plane.data) v = std::clamp(v, 0.0f, 1.0f);
  }
  return maps;
}

RenderedSet resize(const RenderedSet& set, std::size_t height, std::size_t width) {
  RenderedSet out;
  for (const auto& [s, img] : set.entries) out.entries.emplace_back(s, resize(img, height, width));
  return out;
}

WeightMaps resize(const WeightMaps& maps, std::size_t height, std::size_t width) {
  WeightMaps out;
  for (const auto& [s, p] : maps.entries) out.entries.emplace_back(s, resize(p, height, width));
  return out;
}

template <typename T>
Tensor<T> stack_renders(const RenderedSet& set) {
  set.validate();
  const std::size_t h = set.height(), w = set.width();
  std::vector<T> v;
  v.reserve(3 * set.size() * h * w);
  for (const auto& [_, img] : set.entries) v.insert(v.end(), img.data().begin(), img.data().end());
  return Tensor<T>({1, 3 * set.size(), h, w}, std::move(v));
}

template <typename T>
WeightMaps maps_from_tensor(const Tensor<T>& t, const SettingSet& settings, std::size_t n) {
  if (t.rank() != 4 || t.dim(1) != settings.size() || n >= t.dim(0)) {
    throw DimensionError("maps_from_tensor: tensor " + shape_str(t.shape()) + " does not hold " +
                         std::to_string(settings.size()) + " maps");
  }
  const std::size_t h = t.dim(2), w = t.dim(3), k = settings.size();
  WeightMaps out;
  for (std::size_t i = 0; i < k; ++i) {
    Plane p(h, w);
    auto src = t.data().subspan((n * k + i) * h * w, h * w);
    std::transform(src.begin(), src.end(), p.data.begin(), [](T v) { return static_cast<float>(v); });
    out.entries.emplace_back(settings[i], std::move(p));
  }
  return out;
}

template Tensor<float> stack_renders<float>(const RenderedSet&);
template Tensor<double> stack_renders<double>(const RenderedSet&);
template WeightMaps maps_from_tensor<float>(const Tensor<float>&, const SettingSet&, std::size_t);
template WeightMaps maps_from_tensor<double>(const Tensor<double>&, const SettingSet&, std::size_t);

}  // namespace awb
