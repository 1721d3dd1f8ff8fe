#include "awb/synth.hpp"

#include <algorithm>
#include <cmath>

#include "awb/errors.hpp"

namespace awb {

std::array<double, 3> illuminant_rgb(WbSetting s) {
  switch (s) {
    case WbSetting::tungsten:
      return {1.45, 1.0, 0.55};
    case WbSetting::fluorescent:
      return {1.22, 1.0, 0.75};
    case WbSetting::daylight:
      return {1.0, 1.0, 1.0};
    case WbSetting::cloudy:
      return {0.92, 1.0, 1.10};
    case WbSetting::shade:
      return {0.86, 1.0, 1.20};
  }
  return {1.0, 1.0, 1.0};
}

namespace {

// Gaussian noise on a coarse grid, bilinearly upsampled.
Plane smooth_noise(Rng& rng, std::size_t cells, std::size_t size) {
  Plane coarse(cells, cells);
  for (float& v : coarse.data) v = static_cast<float>(rng.normal());
  return resize(coarse, size, size);
}

}  // namespace

SynthScene synth_mixed_scene(Rng rng, std::size_t size, const SettingSet& settings, const SynthOptions& options) {
  validate_settings(settings);
  if (size < 64) throw ConfigError("synth: scene size must be >= 64");
  const std::size_t k = settings.size();
  const std::size_t np = size * size;

  // Reflectance: grey-centred smooth colour field with a few flat shapes and
  // mild texture.
  Rng rr = rng.split("reflectance");
  ImageRGB refl(size, size);
  const double base = rr.uniform(0.30, 0.45);
  for (std::size_t c = 0; c < 3; ++c) {
    Plane field = smooth_noise(rr, 4, size);
    for (std::size_t p = 0; p < np; ++p) refl.data()[c * np + p] = static_cast<float>(base + 0.08 * field.data[p]);
  }
  const std::size_t shapes = 3 + rr.below(4);
  for (std::size_t s = 0; s < shapes; ++s) {
    std::array<double, 3> col{};
    const double level = rr.uniform(0.15, 0.55);
    for (auto& v : col) v = std::clamp(level + rr.uniform(-0.12, 0.12), 0.02, 0.6);
    const double cy = rr.uniform(0.0, double(size)), cx = rr.uniform(0.0, double(size));
    const double ry = rr.uniform(0.08, 0.25) * double(size), rx = rr.uniform(0.08, 0.25) * double(size);
    const bool disc = rr.below(2) == 0;
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const double dy = (double(y) + 0.5 - cy) / ry, dx = (double(x) + 0.5 - cx) / rx;
        const bool inside = disc ? dy * dy + dx * dx <= 1.0 : std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
        if (inside)
          for (std::size_t c = 0; c < 3; ++c) refl.at(y, x, c) = static_cast<float>(col[c]);
      }
    }
  }
  Rng tr = rng.split("texture");
  for (float& v : refl.data()) v = std::clamp(v + static_cast<float>(0.015 * tr.normal()), 0.0f, 0.6f);

  // Masks: softmax over sharpened smooth noise, one logit field per preset.
  Rng mr = rng.split("masks");
  WeightMaps masks;
  if (options.one_hot) {
    if (std::find(settings.begin(), settings.end(), *options.one_hot) == settings.end()) {
      throw ConfigError("synth: one-hot setting is not in the setting set");
    }
    for (WbSetting s : settings) masks.entries.emplace_back(s, Plane(size, size, s == *options.one_hot ? 1.0f : 0.0f));
  } else {
    std::vector<Plane> logits;
    for (std::size_t i = 0; i < k; ++i) {
      Plane n = smooth_noise(mr, 3, size);
      const double bias = mr.uniform(-1.0, 1.0);
      for (float& v : n.data) v = static_cast<float>(8.0 * v + 2.0 * bias);
      logits.push_back(std::move(n));
    }
    for (WbSetting s : settings) masks.entries.emplace_back(s, Plane(size, size));
    for (std::size_t p = 0; p < np; ++p) {
      double mx = -1e300;
      for (const auto& l : logits) mx = std::max(mx, double(l.data[p]));
      std::vector<double> e(k);
      double z = 0.0;
      for (std::size_t i = 0; i < k; ++i) z += e[i] = std::exp(double(logits[i].data[p]) - mx);
      for (std::size_t i = 0; i < k; ++i) masks.entries[i].second.data[p] = static_cast<float>(e[i] / z);
    }
  }

  SynthScene scene;
  scene.reflectance = refl;
  // Light at each pixel is the mask-weighted mixture of preset illuminants.
  std::vector<std::array<double, 3>> light(np, {0.0, 0.0, 0.0});
  for (std::size_t i = 0; i < k; ++i) {
    const auto l = illuminant_rgb(settings[i]);
    const auto& m = masks.entries[i].second.data;
    for (std::size_t p = 0; p < np; ++p)
      for (std::size_t c = 0; c < 3; ++c) light[p][c] += double(m[p]) * l[c];
  }
  for (std::size_t i = 0; i < k; ++i) {
    const auto l = illuminant_rgb(settings[i]);
    ImageRGB r(size, size);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t p = 0; p < np; ++p) {
        const double raw = double(refl.data()[c * np + p]) * light[p][c];
        r.data()[c * np + p] = static_cast<float>(std::clamp(raw / l[c], 0.0, 1.0));
      }
    scene.renders.entries.emplace_back(settings[i], std::move(r));
  }
  scene.masks = masks;
  scene.gt = blend(masks, scene.renders);
  return scene;
}

}  // namespace awb
