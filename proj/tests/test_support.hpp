#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "awb/blend.hpp"
#include "awb/color_mapping.hpp"
#include "awb/image.hpp"
#include "awb/network.hpp"
#include "awb/rng.hpp"
#include "awb/tensor.hpp"

namespace awb::test {

template <typename T>
Tensor<T> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
  return Tensor<T>(std::move(shape), std::move(v));
}

/// Element (n, c, y, x) of a rank-4 tensor.
template <typename T>
T& at4(Tensor<T>& t, std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
  return t.values()[((n * t.dim(1) + c) * t.dim(2) + y) * t.dim(3) + x];
}

template <typename T>
T at4(const Tensor<T>& t, std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
  return t.values()[((n * t.dim(1) + c) * t.dim(2) + y) * t.dim(3) + x];
}

inline ImageRGB random_image(std::size_t h, std::size_t w, Rng& rng, double lo = 0.0, double hi = 1.0) {
  ImageRGB img(h, w);
  for (float& v : img.data()) v = static_cast<float>(rng.uniform(lo, hi));
  return img;
}

inline Plane random_plane(std::size_t h, std::size_t w, Rng& rng, double lo = 0.0, double hi = 1.0) {
  Plane p(h, w);
  for (float& v : p.data) v = static_cast<float>(rng.uniform(lo, hi));
  return p;
}

inline RenderedSet random_renders(const SettingSet& settings, std::size_t h, std::size_t w, Rng& rng) {
  RenderedSet set;
  for (WbSetting s : settings) set.entries.emplace_back(s, random_image(h, w, rng));
  return set;
}

inline WeightMaps random_maps(const SettingSet& settings, std::size_t h, std::size_t w, Rng& rng,
                              double lo = 0.0, double hi = 1.0) {
  WeightMaps maps;
  for (WbSetting s : settings) maps.entries.emplace_back(s, random_plane(h, w, rng, lo, hi));
  return maps;
}

inline PolyMapping random_mapping(Rng& rng, WbSetting s) {
  PolyMapping m = PolyMapping::identity(s);
  for (double& v : m.matrix) v += rng.uniform(-0.15, 0.15);
  return m;
}

// target = M·φ(source) in double, stored as float without clamping.
inline ImageRGB apply_unclamped(const PolyMapping& m, const ImageRGB& img) {
  ImageRGB out(img.height(), img.width());
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    const auto px = img.pixel(p);
    const auto phi = poly_features({px[0], px[1], px[2]}, m.kernel);
    std::array<float, 3> o{};
    for (std::size_t r = 0; r < 3; ++r) {
      double acc = 0.0;
      for (std::size_t k = 0; k < phi.size(); ++k) acc += m.at(r, k) * phi[k];
      o[r] = static_cast<float>(acc);
    }
    out.set_pixel(p, o);
  }
  return out;
}

/// Small widths so that 64-bit finite differences over every parameter stay fast.
inline NetworkConfig toy_config(SettingSet settings = settings_tds()) {
  NetworkConfig c;
  c.settings = std::move(settings);
  c.enc_channels = {2, 2, 2, 2, 2};
  c.backbone_channels = {2, 2};
  c.style_dim = 3;
  c.head_dim = 3;
  return c;
}

/// Replaces every parameter (including zero-initialised ones) with uniform
/// noise so no gradient path is trivially dead.
template <typename T>
void randomize_params(ParamStore<T>& params, Rng rng, double amp = 0.5) {
  for (auto& [name, t] : params) {
    Rng r = rng.split(name);
    for (auto& v : t.values()) v = static_cast<T>(r.uniform(-amp, amp));
  }
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("awb_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::FILE* f = std::fopen(p.string().c_str(), "rb");
  if (!f) return {};
  std::string s;
  char buf[65536];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) s.append(buf, n);
  std::fclose(f);
  return s;
}

// Scalar oracles written directly from the formulas, independent of the
// tensor code paths.

/// Σ_n ‖gt_n − Σ_i W_ni ⊙ P_ni‖² / N.
inline double recon_oracle(const std::vector<double>& gt, const std::vector<double>& in, const std::vector<double>& maps,
                           std::size_t n, std::size_t k, std::size_t h, std::size_t w) {
  double total = 0.0;
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          double blend = 0.0;
          for (std::size_t i = 0; i < k; ++i) {
            const double wv = maps[((b * k + i) * h + y) * w + x];
            const double pv = in[((b * 3 * k + 3 * i + c) * h + y) * w + x];
            blend += wv * pv;
          }
          const double d = gt[((b * 3 + c) * h + y) * w + x] - blend;
          total += d * d;
        }
  return total / static_cast<double>(n);
}

/// Σ over maps of squared valid Sobel responses, / N.
inline double smooth_oracle(const std::vector<double>& maps, std::size_t n, std::size_t k, std::size_t h,
                            std::size_t w) {
  const int sx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  const int sy[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
  double total = 0.0;
  for (std::size_t m = 0; m < n * k; ++m) {
    const double* p = maps.data() + m * h * w;
    for (std::size_t y = 0; y + 2 < h; ++y)
      for (std::size_t x = 0; x + 2 < w; ++x) {
        double gx = 0.0, gy = 0.0;
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b) {
            gx += sx[a][b] * p[(y + a) * w + x + b];
            gy += sy[a][b] * p[(y + a) * w + x + b];
          }
        total += gx * gx + gy * gy;
      }
  }
  return total / static_cast<double>(n);
}

/// clamp01(Σ_i W_i · I_i) per pixel and channel, in double.
inline std::vector<double> blend_oracle(const WeightMaps& maps, const RenderedSet& renders) {
  const std::size_t h = renders.height(), w = renders.width();
  std::vector<double> out(3 * h * w, 0.0);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        double v = 0.0;
        for (std::size_t i = 0; i < renders.size(); ++i)
          v += double(maps.entries[i].second.at(y, x)) * double(renders.entries[i].second.at(y, x, c));
        out[(c * h + y) * w + x] = std::clamp(v, 0.0, 1.0);
      }
  return out;
}

/// Half-pixel-centre bilinear sample of a row-major plane at output (oy, ox).
inline double bilinear_oracle(const std::vector<double>& src, std::size_t h, std::size_t w, std::size_t oh,
                              std::size_t ow, std::size_t oy, std::size_t ox) {
  auto coord = [](std::size_t o, std::size_t in, std::size_t out) {
    double s = (double(o) + 0.5) * double(in) / double(out) - 0.5;
    return std::clamp(s, 0.0, double(in - 1));
  };
  const double sy = coord(oy, h, oh), sx = coord(ox, w, ow);
  const std::size_t y0 = static_cast<std::size_t>(std::floor(sy)), x0 = static_cast<std::size_t>(std::floor(sx));
  const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double fy = sy - double(y0), fx = sx - double(x0);
  const double top = src[y0 * w + x0] * (1 - fx) + src[y0 * w + x1] * fx;
  const double bot = src[y1 * w + x0] * (1 - fx) + src[y1 * w + x1] * fx;
  return top * (1 - fy) + bot * fy;
}

}  // namespace awb::test
