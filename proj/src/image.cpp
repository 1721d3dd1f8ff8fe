#include "awb/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>

#include "awb/errors.hpp"
#include "awb/ops.hpp"

namespace awb {

ImageRGB::ImageRGB(std::size_t height, std::size_t width, float fill)
    : height_(height), width_(width), data_(3 * height * width, fill) {}

ImageRGB clamp01(ImageRGB img) {
  for (float& v : img.data()) v = std::clamp(v, 0.0f, 1.0f);
  return img;
}

template <typename T>
Tensor<T> to_tensor(const ImageRGB& img) {
  std::vector<T> v(img.data().begin(), img.data().end());
  return Tensor<T>({1, 3, img.height(), img.width()}, std::move(v));
}

template <typename T>
ImageRGB image_from_tensor(const Tensor<T>& t, std::size_t n) {
  if (t.rank() != 4 || t.dim(1) != 3 || n >= t.dim(0)) {
    throw DimensionError("image_from_tensor: expected N×3×H×W, got " + shape_str(t.shape()));
  }
  ImageRGB img(t.dim(2), t.dim(3));
  const std::size_t sz = 3 * img.pixels();
  auto src = t.data().subspan(n * sz, sz);
  std::transform(src.begin(), src.end(), img.data().begin(), [](T v) { return static_cast<float>(v); });
  return img;
}

template Tensor<float> to_tensor<float>(const ImageRGB&);
template Tensor<double> to_tensor<double>(const ImageRGB&);
template ImageRGB image_from_tensor<float>(const Tensor<float>&, std::size_t);
template ImageRGB image_from_tensor<double>(const Tensor<double>&, std::size_t);

ImageRGB resize(const ImageRGB& img, std::size_t height, std::size_t width) {
  if (img.height() == height && img.width() == width) return img;
  return image_from_tensor(bilinear_resize(to_tensor<float>(img), height, width));
}

Plane resize(const Plane& plane, std::size_t height, std::size_t width) {
  if (plane.height == height && plane.width == width) return plane;
  Tensor<float> t({1, 1, plane.height, plane.width}, plane.data);
  auto r = bilinear_resize(t, height, width);
  Plane out(height, width);
  out.data = r.values();
  return out;
}

ImageRGB crop(const ImageRGB& img, std::size_t y0, std::size_t x0, std::size_t height, std::size_t width) {
  if (y0 + height > img.height() || x0 + width > img.width()) {
    throw DimensionError("crop: region exceeds image bounds");
  }
  ImageRGB out(height, width);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
  return out;
}

unsigned char quantize8(float v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Decodes any PNG into interleaved channels at 8 or 16 bits.
struct Decoded {
  std::size_t height = 0, width = 0, channels = 0;
  int bit_depth = 8;
  std::vector<unsigned short> samples;
};

Decoded decode_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("cannot open image '" + path.string() + "'");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw DataError("not a PNG file: '" + path.string() + "'");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("libpng initialisation failed");
  }
  Decoded out;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("corrupt PNG '" + path.string() + "'");
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color_type = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_swap(png);
  png_read_update_info(png, info);
  out.height = png_get_image_height(png, info);
  out.width = png_get_image_width(png, info);
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * out.height);
  rows.resize(out.height);
  for (std::size_t y = 0; y < out.height; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t n = out.height * out.width * out.channels;
  out.samples.resize(n);
  if (out.bit_depth == 16) {
    for (std::size_t i = 0; i < n; ++i) {
      unsigned short v;
      std::memcpy(&v, buffer.data() + 2 * i, 2);
      out.samples[i] = v;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) out.samples[i] = buffer[i];
  }
  return out;
}

void encode_png(const std::filesystem::path& path, std::size_t height, std::size_t width, int channels,
                int bit_depth, const std::vector<unsigned short>& samples) {
  if (bit_depth != 8 && bit_depth != 16) throw ConfigError("PNG bit depth must be 8 or 16");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    FilePtr fp(std::fopen(tmp.c_str(), "wb"));
    if (!fp) throw DataError("cannot write '" + tmp.string() + "'");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
      png_destroy_write_struct(&png, &info);
      throw DataError("libpng initialisation failed");
    }
    const std::size_t bytes = static_cast<std::size_t>(bit_depth / 8);
    const std::size_t rowbytes = width * static_cast<std::size_t>(channels) * bytes;
    std::vector<unsigned char> buffer(rowbytes * height);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (bytes == 1) {
        buffer[i] = static_cast<unsigned char>(samples[i]);
      } else {
        buffer[2 * i] = static_cast<unsigned char>(samples[i] >> 8);
        buffer[2 * i + 1] = static_cast<unsigned char>(samples[i] & 0xff);
      }
    }
    std::vector<png_bytep> rows(height);
    for (std::size_t y = 0; y < height; ++y) rows[y] = buffer.data() + y * rowbytes;
    if (setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      throw DataError("PNG encoding failed for '" + path.string() + "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
  }
  std::filesystem::rename(tmp, path);
}

unsigned short quantize(float v, int bit_depth) {
  const float maxv = bit_depth == 16 ? 65535.0f : 255.0f;
  return static_cast<unsigned short>(std::lround(std::clamp(v, 0.0f, 1.0f) * maxv));
}

}  // namespace

ImageRGB read_png(const std::filesystem::path& path) {
  Decoded d = decode_png(path);
  const float maxv = d.bit_depth == 16 ? 65535.0f : 255.0f;
  ImageRGB img(d.height, d.width);
  const std::size_t np = d.height * d.width;
  const bool gray = d.channels < 3;
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const std::size_t src = i * d.channels + (gray ? 0 : c);
      img.data()[c * np + i] = static_cast<float>(d.samples[src]) / maxv;
    }
  }
  return img;
}

Plane read_gray_png(const std::filesystem::path& path) {
  Decoded d = decode_png(path);
  const float maxv = d.bit_depth == 16 ? 65535.0f : 255.0f;
  Plane p(d.height, d.width);
  for (std::size_t i = 0; i < p.size(); ++i) p.data[i] = static_cast<float>(d.samples[i * d.channels]) / maxv;
  return p;
}

void write_png(const std::filesystem::path& path, const ImageRGB& img, int bit_depth) {
  const std::size_t np = img.pixels();
  std::vector<unsigned short> samples(3 * np);
  for (std::size_t i = 0; i < np; ++i)
    for (std::size_t c = 0; c < 3; ++c) samples[3 * i + c] = quantize(img.data()[c * np + i], bit_depth);
  encode_png(path, img.height(), img.width(), 3, bit_depth, samples);
}

void write_gray_png(const std::filesystem::path& path, const Plane& plane, int bit_depth) {
  std::vector<unsigned short> samples(plane.size());
  for (std::size_t i = 0; i < plane.size(); ++i) samples[i] = quantize(plane.data[i], bit_depth);
  encode_png(path, plane.height, plane.width, 1, bit_depth, samples);
}

}  // namespace awb
