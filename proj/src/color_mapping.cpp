#include "awb/color_mapping.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

#include "awb/errors.hpp"

namespace awb {

namespace {
constexpr double kRidge = 1e-8;
constexpr double kRankThreshold = 1e-10;
}  // namespace

PolyKernelSpec PolyKernelSpec::default_11() {
  return PolyKernelSpec{{{1, 0, 0},
                         {0, 1, 0},
                         {0, 0, 1},
                         {1, 1, 0},
                         {1, 0, 1},
                         {0, 1, 1},
                         {2, 0, 0},
                         {0, 2, 0},
                         {0, 0, 2},
                         {1, 1, 1},
                         {0, 0, 0}}};
}

std::vector<double> poly_features(const std::array<double, 3>& rgb, const PolyKernelSpec& kernel) {
  std::vector<double> out(kernel.size());
  for (std::size_t k = 0; k < kernel.size(); ++k) {
    double v = 1.0;
    for (std::size_t c = 0; c < 3; ++c) {
      for (int e = 0; e < kernel.terms[k][c]; ++e) v *= rgb[c];
    }
    out[k] = v;
  }
  return out;
}

PolyMapping PolyMapping::identity(WbSetting setting, PolyKernelSpec kernel) {
  PolyMapping m;
  m.setting = setting;
  m.kernel = std::move(kernel);
  m.matrix.assign(3 * m.kernel.size(), 0.0);
  for (std::size_t c = 0; c < 3; ++c) {
    std::array<int, 3> unit{0, 0, 0};
    unit[c] = 1;
    auto it = std::find(m.kernel.terms.begin(), m.kernel.terms.end(), unit);
    if (it == m.kernel.terms.end()) throw ConfigError("kernel has no linear term; identity mapping impossible");
    m.matrix[c * m.kernel.size() + static_cast<std::size_t>(it - m.kernel.terms.begin())] = 1.0;
  }
  m.source_id = m.target_id = "identity";
  return m;
}

FitResult fit_mapping(const ImageRGB& source, const ImageRGB& target, WbSetting setting,
                      const PolyKernelSpec& kernel) {
  if (source.height() != target.height() || source.width() != target.width()) {
    throw DimensionError("fit_mapping: source and target sizes differ");
  }
  const std::size_t np = source.pixels();
  const std::size_t k = kernel.size();
  if (np < k) throw DimensionError("fit_mapping: fewer pixels than kernel terms");

  Eigen::MatrixXd phi(static_cast<Eigen::Index>(np), static_cast<Eigen::Index>(k));
  Eigen::MatrixXd y(static_cast<Eigen::Index>(np), 3);
  for (std::size_t i = 0; i < np; ++i) {
    auto px = source.pixel(i);
    auto f = poly_features({px[0], px[1], px[2]}, kernel);
    for (std::size_t j = 0; j < k; ++j) phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = f[j];
    auto tp = target.pixel(i);
    for (int c = 0; c < 3; ++c) y(static_cast<Eigen::Index>(i), c) = tp[static_cast<std::size_t>(c)];
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rank_qr(phi);
  rank_qr.setThreshold(kRankThreshold);
  if (rank_qr.rank() < static_cast<Eigen::Index>(k)) {
    throw SingularFitError("fit_mapping: colour design matrix has rank " + std::to_string(rank_qr.rank()) +
                           " < " + std::to_string(k) + " (too few distinct colours)");
  }

  // Ridge regression as an augmented least-squares problem.
  const auto kk = static_cast<Eigen::Index>(k);
  Eigen::MatrixXd a(phi.rows() + kk, kk);
  a << phi, std::sqrt(kRidge) * Eigen::MatrixXd::Identity(kk, kk);
  Eigen::MatrixXd b(phi.rows() + kk, 3);
  b << y, Eigen::MatrixXd::Zero(kk, 3);
  Eigen::MatrixXd sol = a.colPivHouseholderQr().solve(b);  // K×3
  if (!sol.allFinite()) throw SingularFitError("fit_mapping: non-finite solution");

  FitResult res;
  res.mapping.setting = setting;
  res.mapping.kernel = kernel;
  res.mapping.matrix.resize(3 * k);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t j = 0; j < k; ++j)
      res.mapping.matrix[c * k + j] = sol(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c));
  Eigen::MatrixXd resid = y - phi * sol;
  res.rmse = std::sqrt(resid.squaredNorm() / static_cast<double>(3 * np));
  return res;
}

ImageRGB apply_mapping(const PolyMapping& m, const ImageRGB& img) {
  const std::size_t k = m.kernel.size();
  if (m.matrix.size() != 3 * k) throw DimensionError("apply_mapping: matrix does not match kernel size");
  for (double v : m.matrix) {
    if (!std::isfinite(v)) throw NumericError("apply_mapping: non-finite mapping matrix");
  }
  ImageRGB out(img.height(), img.width());
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    auto px = img.pixel(i);
    auto f = poly_features({px[0], px[1], px[2]}, m.kernel);
    std::array<float, 3> o{};
    for (std::size_t c = 0; c < 3; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) acc += m.matrix[c * k + j] * f[j];
      o[c] = static_cast<float>(std::clamp(acc, 0.0, 1.0));
    }
    out.set_pixel(i, o);
  }
  return out;
}

void save_mapping(const std::filesystem::path& path, const PolyMapping& m) {
  nlohmann::json header;
  header["setting"] = std::string(1, tag(m.setting));
  header["kelvin"] = kelvin(m.setting);
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : m.kernel.terms) terms.push_back({t[0], t[1], t[2]});
  header["kernel_terms"] = terms;
  header["source_id"] = m.source_id;
  header["target_id"] = m.target_id;
  header["rows"] = 3;
  header["cols"] = m.kernel.size();

  std::ostringstream os;
  os << header.dump() << '\n';
  os << std::setprecision(17);
  const std::size_t k = m.kernel.size();
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < k; ++c) os << (c ? " " : "") << m.matrix[r * k + c];
    os << '\n';
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw DataError("cannot write mapping cache '" + tmp.string() + "'");
    f << os.str();
  }
  std::filesystem::rename(tmp, path);
}

PolyMapping load_mapping(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open mapping cache '" + path.string() + "'");
  std::string line;
  std::getline(f, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("mapping cache '" + path.string() + "': bad header: " + e.what());
  }
  PolyMapping m;
  try {
    const std::string s = header.at("setting").get<std::string>();
    if (s.size() != 1) throw FormatError("mapping cache: bad setting tag");
    m.setting = setting_from_tag(s[0]);
    m.kernel.terms.clear();
    for (const auto& t : header.at("kernel_terms")) m.kernel.terms.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});
    m.source_id = header.value("source_id", "");
    m.target_id = header.value("target_id", "");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("mapping cache '" + path.string() + "': " + e.what());
  }
  const std::size_t k = m.kernel.size();
  m.matrix.resize(3 * k);
  for (auto& v : m.matrix) {
    if (!(f >> v)) throw FormatError("mapping cache '" + path.string() + "': truncated matrix");
  }
  return m;
}

}  // namespace awb
