#include "awb/bilateral_solver.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <Eigen/Sparse>

#include "awb/errors.hpp"

namespace awb {

void SolverParams::validate() const {
  if (!(sigma_spatial > 0 && sigma_luma > 0 && sigma_chroma > 0)) {
    throw ConfigError("bilateral solver: sigmas must be positive");
  }
  if (!(lambda >= 0)) throw ConfigError("bilateral solver: lambda must be >= 0");
  if (!(confidence > 0)) throw ConfigError("bilateral solver: confidence must be positive");
  if (max_iters < 1) throw ConfigError("bilateral solver: max_iters must be >= 1");
  if (!(tolerance > 0)) throw ConfigError("bilateral solver: tolerance must be positive");
}

std::vector<double> BilateralGrid::splat_weight_sums() const { return std::vector<double>(num_pixels(), 1.0); }

namespace {

struct CoordHash {
  std::size_t operator()(const BilateralGrid::Coord& c) const {
    std::uint64_t h = 1469598103934665603ULL;
    for (auto v : c) {
      h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

constexpr int kBistochasticMaxIters = 5000;
constexpr double kBistochasticTol = 1e-12;

std::vector<double> blur(const BilateralGrid& g, const std::vector<double>& v) {
  std::vector<double> out(g.num_vertices(), 0.0);
  for (std::size_t i = 0; i < g.num_vertices(); ++i) {
    double acc = 0.0;
    for (std::size_t k = g.row_start[i]; k < g.row_start[i + 1]; ++k) acc += g.weights[k] * v[g.cols[k]];
    out[i] = acc;
  }
  return out;
}

// n ⊙ B(n ⊙ v)
std::vector<double> normalized_blur(const BilateralGrid& g, const std::vector<double>& v) {
  std::vector<double> t(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = g.norm[i] * v[i];
  auto b = blur(g, t);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] *= g.norm[i];
  return b;
}

void bistochastize(BilateralGrid& g) {
  const std::size_t nv = g.num_vertices();
  g.norm.assign(nv, 1.0);
  // Scale so that n ⊙ B(n ⊙ m) = 1, which makes every pixel row of the
  // splat-blur-slice operator sum to one.
  double start = 0.0;
  for (std::size_t i = 0; i < nv; ++i) start = std::max(start, g.mass[i] * 2.0 * BilateralGrid::kDims);
  for (auto& n : g.norm) n = 1.0 / std::sqrt(start);
  for (int it = 0; it < kBistochasticMaxIters; ++it) {
    auto r = normalized_blur(g, g.mass);
    double worst = 0.0;
    for (std::size_t i = 0; i < nv; ++i) {
      worst = std::max(worst, std::abs(r[i] - 1.0));
      g.norm[i] *= std::sqrt(1.0 / r[i]);
    }
    if (worst < kBistochasticTol) break;
  }
}

}  // namespace

std::vector<std::array<double, 5>> guide_coords(const ImageRGB& guide, const SolverParams& params) {
  params.validate();
  std::vector<std::array<double, 5>> out(guide.pixels());
  for (std::size_t y = 0; y < guide.height(); ++y) {
    for (std::size_t x = 0; x < guide.width(); ++x) {
      const std::size_t i = y * guide.width() + x;
      auto p = guide.pixel(i);
      const double r = 255.0 * p[0], gg = 255.0 * p[1], b = 255.0 * p[2];
      const double luma = 0.299 * r + 0.587 * gg + 0.114 * b;
      const double u = -0.168736 * r - 0.331264 * gg + 0.5 * b;
      const double v = 0.5 * r - 0.418688 * gg - 0.081312 * b;
      out[i] = {static_cast<double>(x) / params.sigma_spatial, static_cast<double>(y) / params.sigma_spatial,
                luma / params.sigma_luma, u / params.sigma_chroma, v / params.sigma_chroma};
    }
  }
  return out;
}

BilateralGrid build_grid(const std::vector<std::array<double, 5>>& coords, std::size_t height, std::size_t width) {
  if (coords.size() != height * width || coords.empty()) {
    throw DimensionError("build_grid: coordinate count does not match image size");
  }
  BilateralGrid g;
  g.height = height;
  g.width = width;
  g.pixel_vertex.resize(coords.size());
  std::unordered_map<BilateralGrid::Coord, std::uint32_t, CoordHash> index;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    BilateralGrid::Coord c;
    for (std::size_t d = 0; d < BilateralGrid::kDims; ++d) {
      if (!std::isfinite(coords[i][d])) throw NumericError("build_grid: non-finite guide coordinate");
      c[d] = static_cast<std::int64_t>(std::round(coords[i][d]));
    }
    auto [it, inserted] = index.try_emplace(c, static_cast<std::uint32_t>(g.vertices.size()));
    if (inserted) {
      g.vertices.push_back(c);
      g.mass.push_back(0.0);
    }
    g.pixel_vertex[i] = it->second;
    g.mass[it->second] += 1.0;
  }
  const std::size_t nv = g.vertices.size();
  g.row_start.assign(1, 0);
  for (std::size_t v = 0; v < nv; ++v) {
    g.cols.push_back(static_cast<std::uint32_t>(v));
    g.weights.push_back(2.0 * BilateralGrid::kDims);
    for (std::size_t d = 0; d < BilateralGrid::kDims; ++d) {
      for (int off : {-1, 1}) {
        auto c = g.vertices[v];
        c[d] += off;
        auto it = index.find(c);
        if (it != index.end()) {
          g.cols.push_back(it->second);
          g.weights.push_back(1.0);
        }
      }
    }
    g.row_start.push_back(g.cols.size());
  }
  bistochastize(g);
  return g;
}

BilateralGrid build_grid(const ImageRGB& guide, const SolverParams& params) {
  return build_grid(guide_coords(guide, params), guide.height(), guide.width());
}

std::vector<double> apply_bilateral(const BilateralGrid& grid, const std::vector<double>& x) {
  if (x.size() != grid.num_pixels()) throw DimensionError("apply_bilateral: size mismatch");
  std::vector<double> s(grid.num_vertices(), 0.0);
  for (std::size_t p = 0; p < x.size(); ++p) s[grid.pixel_vertex[p]] += x[p];
  auto k = normalized_blur(grid, s);
  std::vector<double> out(x.size());
  for (std::size_t p = 0; p < x.size(); ++p) out[p] = k[grid.pixel_vertex[p]];
  return out;
}

namespace {

// Row sums of Ŝ per pixel.
std::vector<double> row_sums(const BilateralGrid& grid) {
  auto k = normalized_blur(grid, grid.mass);
  std::vector<double> out(grid.num_pixels());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = k[grid.pixel_vertex[p]];
  return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Two-level preconditioner for the vertex system: Jacobi plus an exact
// Galerkin solve on the lattice coarsened by 2 along every axis. Coarse
// cells use integer division so mirrored coordinates coarsen symmetrically.
class TwoLevelPreconditioner {
 public:
  TwoLevelPreconditioner(const BilateralGrid& g, const std::vector<double>& sq, const std::vector<double>& d,
                         double lam, std::vector<double> inv_diag)
      : sq_(sq), inv_diag_(std::move(inv_diag)) {
    const std::size_t nv = g.num_vertices();
    std::unordered_map<BilateralGrid::Coord, std::uint32_t, CoordHash> index;
    agg_.resize(nv);
    for (std::size_t v = 0; v < nv; ++v) {
      BilateralGrid::Coord c = g.vertices[v];
      for (auto& x : c) x /= 2;
      auto [it, _] = index.try_emplace(c, static_cast<std::uint32_t>(index.size()));
      agg_[v] = it->second;
    }
    nc_ = index.size();
    std::vector<Eigen::Triplet<double>> trips;
    for (std::size_t v = 0; v < nv; ++v) {
      const auto a = static_cast<Eigen::Index>(agg_[v]);
      trips.emplace_back(a, a, d[v] * g.mass[v]);
      for (std::size_t k = g.row_start[v]; k < g.row_start[v + 1]; ++k) {
        const std::uint32_t w = g.cols[k];
        trips.emplace_back(a, static_cast<Eigen::Index>(agg_[w]),
                           -lam * g.mass[v] * g.norm[v] * g.weights[k] * g.norm[w] * g.mass[w]);
      }
    }
    Eigen::SparseMatrix<double> ac(static_cast<Eigen::Index>(nc_), static_cast<Eigen::Index>(nc_));
    ac.setFromTriplets(trips.begin(), trips.end());
    solver_.compute(ac);
    ok_ = solver_.info() == Eigen::Success;
  }

  std::vector<double> apply(const std::vector<double>& r) const {
    std::vector<double> z(r.size());
    for (std::size_t v = 0; v < r.size(); ++v) z[v] = inv_diag_[v] * r[v];
    if (!ok_) return z;
    Eigen::VectorXd rc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nc_));
    for (std::size_t v = 0; v < r.size(); ++v) rc[agg_[v]] += sq_[v] * r[v];
    Eigen::VectorXd ec = solver_.solve(rc);
    for (std::size_t v = 0; v < r.size(); ++v) z[v] += sq_[v] * ec[agg_[v]];
    return z;
  }

 private:
  const std::vector<double>& sq_;
  std::vector<double> inv_diag_;
  std::vector<std::uint32_t> agg_;
  std::size_t nc_ = 0;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
  bool ok_ = false;
};

}  // namespace

double solver_energy(const BilateralGrid& grid, const std::vector<double>& x, const std::vector<double>& target,
                     const SolverParams& params) {
  auto rows = row_sums(grid);
  auto sx = apply_bilateral(grid, x);
  double smooth = 0.0, data = 0.0;
  for (std::size_t p = 0; p < x.size(); ++p) {
    smooth += x[p] * (rows[p] * x[p] - sx[p]);
    data += (x[p] - target[p]) * (x[p] - target[p]);
  }
  return params.lambda * smooth + params.confidence * data;
}

std::vector<double> bilateral_solve(const BilateralGrid& grid, const std::vector<double>& target,
                                    const SolverParams& params, SolveInfo* info) {
  params.validate();
  if (target.size() != grid.num_pixels()) throw DimensionError("bilateral_solve: target size mismatch");
  for (double v : target) {
    if (!std::isfinite(v)) throw NumericError("bilateral_solve: non-finite target");
  }
  SolveInfo local;
  if (params.lambda == 0.0) {
    local.converged = true;
    if (info) *info = local;
    return target;
  }
  // The pixel system (λ(D_r − SᵀKS) + cI)x = ct is reduced to the vertex
  // sums y = Sx: with d = λr + c constant per vertex,
  //   x = (ct + λSᵀKy) / d  and  (D_d − λ D_m K) y = c S t.
  // Substituting y = D_m^{1/2} u gives a symmetric positive definite system.
  const std::size_t nv = grid.num_vertices();
  const double lam = params.lambda, c = params.confidence;
  const auto r = normalized_blur(grid, grid.mass);
  std::vector<double> d(nv), sq(nv), st(nv, 0.0);
  for (std::size_t v = 0; v < nv; ++v) {
    d[v] = lam * r[v] + c;
    sq[v] = std::sqrt(grid.mass[v]);
  }
  for (std::size_t p = 0; p < target.size(); ++p) st[grid.pixel_vertex[p]] += target[p];

  auto apply = [&](const std::vector<double>& u) {
    std::vector<double> t(nv);
    for (std::size_t v = 0; v < nv; ++v) t[v] = sq[v] * u[v];
    auto k = normalized_blur(grid, t);
    for (std::size_t v = 0; v < nv; ++v) t[v] = d[v] * u[v] - lam * sq[v] * k[v];
    return t;
  };
  std::vector<double> b(nv), u(nv), inv_diag(nv);
  for (std::size_t v = 0; v < nv; ++v) {
    b[v] = c * st[v] / sq[v];
    u[v] = st[v] / sq[v];
    const double self = grid.norm[v] * grid.norm[v] * 2.0 * BilateralGrid::kDims;
    inv_diag[v] = 1.0 / (d[v] - lam * grid.mass[v] * self);
  }
  const TwoLevelPreconditioner precond(grid, sq, d, lam, inv_diag);

  // Convergence is judged on the pixel system: for the vertex residual ρ
  // the pixel residual is −λSᵀK(ρ/d), so its norm costs one blur.
  double tnorm = 0.0;
  for (double v : target) tnorm += c * c * v * v;
  tnorm = std::max(std::sqrt(tnorm), 1e-300);
  auto pixel_residual = [&](const std::vector<double>& rho) {
    std::vector<double> w(nv);
    for (std::size_t v = 0; v < nv; ++v) w[v] = rho[v] * sq[v] / d[v];
    auto k = normalized_blur(grid, w);
    double acc = 0.0;
    for (std::size_t v = 0; v < nv; ++v) acc += grid.mass[v] * (lam * k[v]) * (lam * k[v]);
    return std::sqrt(acc) / tnorm;
  };
  auto au = apply(u);
  std::vector<double> res(nv), z(nv), dir(nv);
  for (std::size_t v = 0; v < nv; ++v) {
    res[v] = b[v] - au[v];
  }
  z = precond.apply(res);
  dir = z;
  double rz = dot(res, z);
  local.relative_residual = pixel_residual(res);
  while (local.relative_residual > params.tolerance && local.iterations < params.max_iters) {
    auto ad = apply(dir);
    const double dad = dot(dir, ad);
    if (!(dad > 0.0)) break;
    const double alpha = rz / dad;
    for (std::size_t v = 0; v < nv; ++v) {
      u[v] += alpha * dir[v];
      res[v] -= alpha * ad[v];
    }
    z = precond.apply(res);
    const double rz_next = dot(res, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t v = 0; v < nv; ++v) dir[v] = z[v] + beta * dir[v];
    ++local.iterations;
    local.relative_residual = pixel_residual(res);
  }
  local.converged = local.relative_residual <= params.tolerance;

  for (std::size_t v = 0; v < nv; ++v) u[v] *= sq[v];
  const auto ky = normalized_blur(grid, u);
  std::vector<double> x(target.size());
  for (std::size_t p = 0; p < x.size(); ++p) {
    const std::uint32_t v = grid.pixel_vertex[p];
    x[p] = (c * target[p] + lam * ky[v]) / d[v];
  }
  // An unconverged iterate may in principle sit above the starting energy.
  if (!local.converged && solver_energy(grid, x, target, params) > solver_energy(grid, target, target, params)) {
    x = target;
  }
  if (info) *info = local;
  return x;
}

Plane edge_aware_smooth(const Plane& map, const BilateralGrid& grid, const SolverParams& params, SolveInfo* info) {
  if (map.height != grid.height || map.width != grid.width) {
    throw DimensionError("edge_aware_smooth: map and guide sizes differ");
  }
  std::vector<double> t(map.data.begin(), map.data.end());
  auto x = bilateral_solve(grid, t, params, info);
  Plane out(map.height, map.width);
  for (std::size_t p = 0; p < x.size(); ++p) out.data[p] = static_cast<float>(x[p]);
  return out;
}

Plane edge_aware_smooth(const Plane& map, const ImageRGB& guide, const SolverParams& params, SolveInfo* info) {
  if (map.height != guide.height() || map.width != guide.width()) {
    throw DimensionError("edge_aware_smooth: map and guide sizes differ");
  }
  return edge_aware_smooth(map, build_grid(guide, params), params, info);
}

}  // namespace awb
