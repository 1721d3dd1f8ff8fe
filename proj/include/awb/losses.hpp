#pragma once

#include "awb/tensor.hpp"

namespace awb {

inline constexpr double kDefaultLambda = 100.0;

/// Scalar loss values for logging.
struct LossBreakdown {
  double l_r = 0.0;
  double l_s = 0.0;
  double lambda = kDefaultLambda;
  /// Always l_r + lambda * l_s evaluated in double.
  double total = 0.0;
};

template <typename T>
struct LossTerms {
  Tensor<T> l_r;
  Tensor<T> l_s;
  Tensor<T> total;  // differentiable l_r + lambda * l_s
  LossBreakdown breakdown;
};

/// ‖gt − Σ_i W_i ⊙ P_i‖²_F summed over the batch and divided by N.
/// gt N×3×H×W, inputs N×3K×H×W, maps N×K×H×W (raw, unclamped).
template <typename T>
Tensor<T> recon_loss(const Tensor<T>& gt, const Tensor<T>& inputs, const Tensor<T>& maps);

/// Σ_i ‖W_i * Sobel_x‖² + ‖W_i * Sobel_y‖² over valid positions, divided by N.
template <typename T>
Tensor<T> smooth_loss(const Tensor<T>& maps);

template <typename T>
LossTerms<T> total_loss(const Tensor<T>& gt, const Tensor<T>& inputs, const Tensor<T>& maps,
                        double lambda = kDefaultLambda);

}  // namespace awb
