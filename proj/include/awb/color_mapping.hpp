#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "awb/image.hpp"
#include "awb/wb_setting.hpp"

namespace awb {

/// Ordered monomials over (R, G, B); each term is an exponent triple.
struct PolyKernelSpec {
  std::vector<std::array<int, 3>> terms;

  /// R, G, B, RG, RB, GB, R², G², B², RGB, 1
  static PolyKernelSpec default_11();
  std::size_t size() const { return terms.size(); }
  bool operator==(const PolyKernelSpec&) const = default;
};

/// Projects one colour onto the kernel's monomials, in order.
std::vector<double> poly_features(const std::array<double, 3>& rgb, const PolyKernelSpec& kernel);

/// Colour mapping for one target WB setting: out = M · φ(in), M is 3×K row-major.
struct PolyMapping {
  WbSetting setting = WbSetting::daylight;
  PolyKernelSpec kernel = PolyKernelSpec::default_11();
  std::vector<double> matrix;  // 3 * kernel.size()
  std::string source_id;
  std::string target_id;

  double at(std::size_t row, std::size_t col) const { return matrix[row * kernel.size() + col]; }
  /// The mapping that returns its input (linear terms set to I₃).
  static PolyMapping identity(WbSetting setting, PolyKernelSpec kernel = PolyKernelSpec::default_11());
};

struct FitResult {
  PolyMapping mapping;
  /// Unclamped least-squares residual over all pixels and channels.
  double rmse = 0.0;
};

/// Least-squares M minimising Σ‖target − M·φ(source)‖² (ridge 1e-8, QR).
/// Throws SingularFitError when φ(source) does not have full column rank.
FitResult fit_mapping(const ImageRGB& source, const ImageRGB& target, WbSetting setting,
                      const PolyKernelSpec& kernel = PolyKernelSpec::default_11());

/// Per-pixel clamp01(M · φ(in)).
ImageRGB apply_mapping(const PolyMapping& m, const ImageRGB& img);

/// One JSON header line followed by three rows of the matrix.
void save_mapping(const std::filesystem::path& path, const PolyMapping& m);
PolyMapping load_mapping(const std::filesystem::path& path);

}  // namespace awb
