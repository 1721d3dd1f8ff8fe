#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "awb/image.hpp"

namespace awb {

struct SolverParams {
  double sigma_spatial = 8.0;
  double sigma_luma = 4.0;
  double sigma_chroma = 4.0;
  double lambda = 128.0;
  /// Uniform per-pixel confidence.
  double confidence = 1.0;
  std::size_t max_iters = 25;
  double tolerance = 1e-5;

  void validate() const;
  bool operator==(const SolverParams&) const = default;
};

/// Simplified bilateral grid: each pixel is assigned to the lattice vertex
/// nearest to its (x, y, luma, u, v) coordinate. Vertex ids follow raster
/// order of first occurrence.
struct BilateralGrid {
  static constexpr std::size_t kDims = 5;
  using Coord = std::array<std::int64_t, kDims>;

  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint32_t> pixel_vertex;
  std::vector<Coord> vertices;
  std::vector<double> mass;  // pixels per vertex
  /// Blur stencil in CSR form: 2·kDims on the diagonal, 1 per lattice
  /// neighbour along each axis.
  std::vector<std::size_t> row_start;
  std::vector<std::uint32_t> cols;
  std::vector<double> weights;
  /// Vertex scaling making the pixel-space operator doubly stochastic.
  std::vector<double> norm;

  std::size_t num_pixels() const { return pixel_vertex.size(); }
  std::size_t num_vertices() const { return vertices.size(); }
  /// Splat weight of each pixel (always 1 for nearest-vertex assignment).
  std::vector<double> splat_weight_sums() const;
};

/// Per-pixel (x/σs, y/σs, Y/σl, U/σc, V/σc) with Y, U, V on the 0–255 scale.
std::vector<std::array<double, 5>> guide_coords(const ImageRGB& guide, const SolverParams& params);
BilateralGrid build_grid(const std::vector<std::array<double, 5>>& coords, std::size_t height, std::size_t width);
BilateralGrid build_grid(const ImageRGB& guide, const SolverParams& params);

/// y = Ŝx, the normalized splat-blur-slice operator in pixel space.
std::vector<double> apply_bilateral(const BilateralGrid& grid, const std::vector<double>& x);

/// λ·xᵀLx + c·‖x − t‖² with L = diag(Ŝ1) − Ŝ.
double solver_energy(const BilateralGrid& grid, const std::vector<double>& x, const std::vector<double>& target,
                     const SolverParams& params);

struct SolveInfo {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Minimises the energy above, i.e. solves (λL + cI)x = c·t. CG runs on the
/// equivalent system over vertex sums, preconditioned by Jacobi plus a
/// coarse-lattice correction; relative_residual refers to the pixel system.
/// Returns the last iterate when the budget runs out (info.converged false).
std::vector<double> bilateral_solve(const BilateralGrid& grid, const std::vector<double>& target,
                                    const SolverParams& params, SolveInfo* info = nullptr);

Plane edge_aware_smooth(const Plane& map, const BilateralGrid& grid, const SolverParams& params,
                        SolveInfo* info = nullptr);
Plane edge_aware_smooth(const Plane& map, const ImageRGB& guide, const SolverParams& params,
                        SolveInfo* info = nullptr);

}  // namespace awb
