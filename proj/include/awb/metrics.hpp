#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "awb/image.hpp"

namespace awb {

/// Mean squared error on the 0–255 scale (set scale255 = false for [0, 1]).
double mse(const ImageRGB& a, const ImageRGB& b, bool scale255 = true);

/// Mean per-pixel angle in degrees between RGB vectors. Pixels where either
/// norm is below 1e-6 are skipped; NumericError if all are.
double angular_error(const ImageRGB& a, const ImageRGB& b);

using Lab = std::array<double, 3>;

/// sRGB (D65) → CIELAB.
Lab srgb_to_lab(const std::array<double, 3>& rgb);

/// CIEDE2000 with k_L = k_C = k_H = 1.
double ciede2000(const Lab& a, const Lab& b);

/// Mean per-pixel CIEDE2000.
double delta_e_2000(const ImageRGB& a, const ImageRGB& b);

struct QuantileRow {
  double mean = 0.0;
  double q1 = 0.0;
  double q2 = 0.0;
  double q3 = 0.0;
  bool operator==(const QuantileRow&) const = default;
};

/// Linear-interpolation (type 7) quantile of unsorted values, p in [0, 1].
double quantile(std::vector<double> values, double p);
QuantileRow quantile_report(const std::vector<double>& values);

struct ImageMetrics {
  std::string id;
  double mse = 0.0;
  double mae = 0.0;
  double delta_e = 0.0;
};

ImageMetrics evaluate_pair(const std::string& id, const ImageRGB& prediction, const ImageRGB& gt);

struct MetricsReport {
  std::vector<ImageMetrics> images;
  QuantileRow mse;
  QuantileRow mae;
  QuantileRow delta_e;

  static MetricsReport from_images(std::vector<ImageMetrics> images);
  /// id,mse,mae,delta_e per image.
  std::string per_image_csv() const;
  /// metric,mean,q1,q2,q3.
  std::string summary_csv() const;
  /// Aligned text table, one row per metric.
  std::string text_table(const std::string& title = "") const;
};

/// Fixed-precision number formatting shared by all reports.
std::string format_number(double v, int digits = 4);

}  // namespace awb
