#include "awb/losses.hpp"

#include <cmath>

#include "awb/errors.hpp"
#include "awb/ops.hpp"

namespace awb {

template <typename T>
Tensor<T> recon_loss(const Tensor<T>& gt, const Tensor<T>& inputs, const Tensor<T>& maps) {
  if (gt.rank() != 4 || maps.rank() != 4 || gt.dim(1) != 3 || gt.dim(0) != maps.dim(0) ||
      gt.dim(2) != maps.dim(2) || gt.dim(3) != maps.dim(3)) {
    throw DimensionError("recon_loss: gt " + shape_str(gt.shape()) + " and maps " + shape_str(maps.shape()) +
                         " are not aligned");
  }
  Tensor<T> diff = sub(gt, weighted_blend(maps, inputs));
  return scale(sum_squares(diff), T(1) / static_cast<T>(gt.dim(0)));
}

namespace {

// Sobel responses in separable form: a central difference along one axis,
// then [1 2 1] along the other. Constant maps give exactly zero.
template <typename T>
Tensor<T> sobel(const Tensor<T>& flat, bool horizontal) {
  const Tensor<T> diff(horizontal ? Shape{1, 1, 1, 3} : Shape{1, 1, 3, 1}, std::vector<T>{-1, 0, 1});
  const Tensor<T> smooth(horizontal ? Shape{1, 1, 3, 1} : Shape{1, 1, 1, 3}, std::vector<T>{1, 2, 1});
  return conv2d(conv2d(flat, diff, Tensor<T>(), 1, 0), smooth, Tensor<T>(), 1, 0);
}

}  // namespace

template <typename T>
Tensor<T> smooth_loss(const Tensor<T>& maps) {
  if (maps.rank() != 4) throw DimensionError("smooth_loss: maps must be N×K×H×W");
  if (maps.dim(2) < 3 || maps.dim(3) < 3) {
    throw DimensionError("smooth_loss: maps " + shape_str(maps.shape()) + " smaller than the 3×3 Sobel kernel");
  }
  const std::size_t n = maps.dim(0);
  Tensor<T> flat = reshape(maps, {n * maps.dim(1), 1, maps.dim(2), maps.dim(3)});
  Tensor<T> energy = add(sum_squares(sobel(flat, true)), sum_squares(sobel(flat, false)));
  return scale(energy, T(1) / static_cast<T>(n));
}

template <typename T>
LossTerms<T> total_loss(const Tensor<T>& gt, const Tensor<T>& inputs, const Tensor<T>& maps, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("total_loss: lambda must be >= 0");
  LossTerms<T> t;
  t.l_r = recon_loss(gt, inputs, maps);
  t.l_s = smooth_loss(maps);
  t.total = add(t.l_r, scale(t.l_s, static_cast<T>(lambda)));
  t.breakdown.l_r = static_cast<double>(t.l_r.item());
  t.breakdown.l_s = static_cast<double>(t.l_s.item());
  t.breakdown.lambda = lambda;
  t.breakdown.total = t.breakdown.l_r + lambda * t.breakdown.l_s;
  return t;
}

template Tensor<float> recon_loss(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&);
template Tensor<double> recon_loss(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&);
template Tensor<float> smooth_loss(const Tensor<float>&);
template Tensor<double> smooth_loss(const Tensor<double>&);
template LossTerms<float> total_loss(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&, double);
template LossTerms<double> total_loss(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&,
                                      double);

}  // namespace awb
