#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <vector>

#include "awb/tensor.hpp"

namespace awb {

/// Single-channel float image, row-major.
struct Plane {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;

  Plane() = default;
  Plane(std::size_t h, std::size_t w, float fill = 0.0f) : height(h), width(w), data(h * w, fill) {}

  float& at(std::size_t y, std::size_t x) { return data[y * width + x]; }
  float at(std::size_t y, std::size_t x) const { return data[y * width + x]; }
  std::size_t size() const { return data.size(); }
  bool operator==(const Plane&) const = default;
};

/// H×W sRGB image with values nominally in [0, 1]. Stored planar (R, G, B
/// planes) so it maps directly onto NCHW tensors.
class ImageRGB {
 public:
  ImageRGB() = default;
  ImageRGB(std::size_t height, std::size_t width, float fill = 0.0f);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixels() const { return height_ * width_; }
  bool empty() const { return pixels() == 0; }

  float& at(std::size_t y, std::size_t x, std::size_t c) { return data_[(c * height_ + y) * width_ + x]; }
  float at(std::size_t y, std::size_t x, std::size_t c) const { return data_[(c * height_ + y) * width_ + x]; }
  std::array<float, 3> pixel(std::size_t i) const {
    return {data_[i], data_[pixels() + i], data_[2 * pixels() + i]};
  }
  void set_pixel(std::size_t i, const std::array<float, 3>& v) {
    data_[i] = v[0];
    data_[pixels() + i] = v[1];
    data_[2 * pixels() + i] = v[2];
  }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  bool operator==(const ImageRGB&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<float> data_;
};

ImageRGB clamp01(ImageRGB img);

/// Bilinear resize (half-pixel centres). Returns a copy when size is unchanged.
ImageRGB resize(const ImageRGB& img, std::size_t height, std::size_t width);
Plane resize(const Plane& plane, std::size_t height, std::size_t width);

ImageRGB crop(const ImageRGB& img, std::size_t y0, std::size_t x0, std::size_t height, std::size_t width);

/// 1×3×H×W tensor.
template <typename T>
Tensor<T> to_tensor(const ImageRGB& img);
/// Reads batch item n of an N×3×H×W tensor.
template <typename T>
ImageRGB image_from_tensor(const Tensor<T>& t, std::size_t n = 0);

/// Loads 8- or 16-bit PNG (gray, gray+alpha, RGB, RGBA); alpha is dropped.
ImageRGB read_png(const std::filesystem::path& path);
/// Writes via a temporary file renamed into place.
void write_png(const std::filesystem::path& path, const ImageRGB& img, int bit_depth = 8);
void write_gray_png(const std::filesystem::path& path, const Plane& plane, int bit_depth = 8);
Plane read_gray_png(const std::filesystem::path& path);

/// round(clamp01(v) * 255)
unsigned char quantize8(float v);

}  // namespace awb
