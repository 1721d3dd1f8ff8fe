#include "awb/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "awb/errors.hpp"

namespace awb {

namespace {

void require_same(const ImageRGB& a, const ImageRGB& b, const char* who) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw DimensionError(std::string(who) + ": image sizes differ (" + std::to_string(a.height()) + "x" +
                         std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                         std::to_string(b.width()) + ")");
  }
  if (a.empty()) throw DimensionError(std::string(who) + ": empty image");
}

constexpr double kDeg = 180.0 / std::numbers::pi;

double deg2rad(double d) { return d / kDeg; }

}  // namespace

double mse(const ImageRGB& a, const ImageRGB& b, bool scale255) {
  require_same(a, b, "mse");
  const double s = scale255 ? 255.0 : 1.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = s * (static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]));
    acc += d * d;
  }
  return acc / static_cast<double>(a.data().size());
}

double angular_error(const ImageRGB& a, const ImageRGB& b) {
  require_same(a, b, "angular_error");
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < a.pixels(); ++i) {
    auto pa = a.pixel(i), pb = b.pixel(i);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      dot += double(pa[c]) * pb[c];
      na += double(pa[c]) * pa[c];
      nb += double(pb[c]) * pb[c];
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    if (na < 1e-6 || nb < 1e-6) continue;
    acc += std::acos(std::clamp(dot / (na * nb), -1.0, 1.0)) * kDeg;
    ++count;
  }
  if (count == 0) throw NumericError("angular_error: every pixel is (near) black; metric undefined");
  return acc / static_cast<double>(count);
}

Lab srgb_to_lab(const std::array<double, 3>& rgb) {
  auto lin = [](double v) { return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4); };
  const double r = lin(rgb[0]), g = lin(rgb[1]), b = lin(rgb[2]);
  const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
  // D65 reference white, Y = 1.
  constexpr double xn = 0.95047, yn = 1.0, zn = 1.08883;
  auto f = [](double t) {
    constexpr double d = 6.0 / 29.0;
    return t > d * d * d ? std::cbrt(t) : t / (3.0 * d * d) + 4.0 / 29.0;
  };
  const double fx = f(x / xn), fy = f(y / yn), fz = f(z / zn);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

double ciede2000(const Lab& lab1, const Lab& lab2) {
  const double l1 = lab1[0], a1 = lab1[1], b1 = lab1[2];
  const double l2 = lab2[0], a2 = lab2[1], b2 = lab2[2];
  const double c1 = std::hypot(a1, b1), c2 = std::hypot(a2, b2);
  const double cbar = 0.5 * (c1 + c2);
  const double cbar7 = std::pow(cbar, 7.0);
  const double g = 0.5 * (1.0 - std::sqrt(cbar7 / (cbar7 + std::pow(25.0, 7.0))));
  const double a1p = (1.0 + g) * a1, a2p = (1.0 + g) * a2;
  const double c1p = std::hypot(a1p, b1), c2p = std::hypot(a2p, b2);
  auto hue = [](double b, double ap) {
    if (b == 0.0 && ap == 0.0) return 0.0;
    double h = std::atan2(b, ap) * kDeg;
    return h < 0.0 ? h + 360.0 : h;
  };
  const double h1p = hue(b1, a1p), h2p = hue(b2, a2p);

  const double dlp = l2 - l1;
  const double dcp = c2p - c1p;
  double dhp = 0.0;
  if (c1p * c2p != 0.0) {
    dhp = h2p - h1p;
    if (dhp > 180.0) dhp -= 360.0;
    else if (dhp < -180.0) dhp += 360.0;
  }
  const double dHp = 2.0 * std::sqrt(c1p * c2p) * std::sin(deg2rad(dhp / 2.0));

  const double lbarp = 0.5 * (l1 + l2);
  const double cbarp = 0.5 * (c1p + c2p);
  double hbarp = h1p + h2p;
  if (c1p * c2p != 0.0) {
    if (std::abs(h1p - h2p) <= 180.0) hbarp *= 0.5;
    else if (h1p + h2p < 360.0) hbarp = 0.5 * (h1p + h2p + 360.0);
    else hbarp = 0.5 * (h1p + h2p - 360.0);
  }
  const double t = 1.0 - 0.17 * std::cos(deg2rad(hbarp - 30.0)) + 0.24 * std::cos(deg2rad(2.0 * hbarp)) +
                   0.32 * std::cos(deg2rad(3.0 * hbarp + 6.0)) - 0.20 * std::cos(deg2rad(4.0 * hbarp - 63.0));
  const double dtheta = 30.0 * std::exp(-std::pow((hbarp - 275.0) / 25.0, 2.0));
  const double cbarp7 = std::pow(cbarp, 7.0);
  const double rc = 2.0 * std::sqrt(cbarp7 / (cbarp7 + std::pow(25.0, 7.0)));
  const double lm = (lbarp - 50.0) * (lbarp - 50.0);
  const double sl = 1.0 + 0.015 * lm / std::sqrt(20.0 + lm);
  const double sc = 1.0 + 0.045 * cbarp;
  const double sh = 1.0 + 0.015 * cbarp * t;
  const double rt = -std::sin(deg2rad(2.0 * dtheta)) * rc;
  const double tl = dlp / sl, tc = dcp / sc, th = dHp / sh;
  return std::sqrt(tl * tl + tc * tc + th * th + rt * tc * th);
}

double delta_e_2000(const ImageRGB& a, const ImageRGB& b) {
  require_same(a, b, "delta_e_2000");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.pixels(); ++i) {
    auto pa = a.pixel(i), pb = b.pixel(i);
    acc += ciede2000(srgb_to_lab({pa[0], pa[1], pa[2]}), srgb_to_lab({pb[0], pb[1], pb[2]}));
  }
  return acc / static_cast<double>(a.pixels());
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw DataError("quantile of an empty list");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

QuantileRow quantile_report(const std::vector<double>& values) {
  if (values.empty()) throw DataError("quantile_report: no values");
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  QuantileRow r;
  double acc = 0.0;
  for (double v : sorted) acc += v;
  r.mean = acc / static_cast<double>(sorted.size());
  r.q1 = quantile(sorted, 0.25);
  r.q2 = quantile(sorted, 0.5);
  r.q3 = quantile(sorted, 0.75);
  return r;
}

ImageMetrics evaluate_pair(const std::string& id, const ImageRGB& prediction, const ImageRGB& gt) {
  ImageMetrics m;
  m.id = id;
  m.mse = mse(prediction, gt);
  m.mae = angular_error(prediction, gt);
  m.delta_e = delta_e_2000(prediction, gt);
  return m;
}

MetricsReport MetricsReport::from_images(std::vector<ImageMetrics> images) {
  if (images.empty()) throw DataError("metrics report: no images");
  MetricsReport r;
  r.images = std::move(images);
  std::vector<double> a, b, c;
  for (const auto& m : r.images) {
    a.push_back(m.mse);
    b.push_back(m.mae);
    c.push_back(m.delta_e);
  }
  r.mse = quantile_report(a);
  r.mae = quantile_report(b);
  r.delta_e = quantile_report(c);
  return r;
}

std::string format_number(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string MetricsReport::per_image_csv() const {
  std::ostringstream os;
  os << "id,mse,mae,delta_e\n";
  for (const auto& m : images) {
    os << m.id << ',' << format_number(m.mse, 6) << ',' << format_number(m.mae, 6) << ','
       << format_number(m.delta_e, 6) << '\n';
  }
  return os.str();
}

std::string MetricsReport::summary_csv() const {
  std::ostringstream os;
  os << "metric,mean,q1,q2,q3\n";
  auto row = [&](const char* name, const QuantileRow& q) {
    os << name << ',' << format_number(q.mean, 6) << ',' << format_number(q.q1, 6) << ',' << format_number(q.q2, 6)
       << ',' << format_number(q.q3, 6) << '\n';
  };
  row("mse", mse);
  row("mae", mae);
  row("delta_e2000", delta_e);
  return os.str();
}

std::string MetricsReport::text_table(const std::string& title) const {
  std::ostringstream os;
  char buf[160];
  if (!title.empty()) os << title << '\n';
  std::snprintf(buf, sizeof buf, "%-12s %10s %10s %10s %10s\n", "metric", "Mean", "Q1", "Q2", "Q3");
  os << buf;
  auto row = [&](const char* name, const QuantileRow& q) {
    std::snprintf(buf, sizeof buf, "%-12s %10.4f %10.4f %10.4f %10.4f\n", name, q.mean, q.q1, q.q2, q.q3);
    os << buf;
  };
  row("MSE", mse);
  row("MAE", mae);
  row("dE2000", delta_e);
  os << "images: " << images.size() << '\n';
  return os.str();
}

}  // namespace awb
