#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "awb/tensor.hpp"

namespace awb {

/// Variance floor used by instance statistics and AdaIN.
inline constexpr double kInstanceNormEps = 1e-5;

/// 2-D cross-correlation. input NCHW, weight O×C×k×k, bias O (may be an
/// undefined tensor for no bias). Output spatial size is
/// floor((H + 2*pad - k) / stride) + 1.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 int stride = 1, int pad = 0);

/// input N×F, weight G×F, bias G -> N×G.
template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& input, T slope);

/// log(1 + exp(x)), computed without overflow.
template <typename T>
Tensor<T> softplus(const Tensor<T>& input);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T c);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c);

/// Per (n, c) spatial mean and sqrt(population variance + eps).
template <typename T>
std::pair<Tensor<T>, Tensor<T>> instance_stats(const Tensor<T>& x);

/// gamma * (x - mu(x)) / sigma(x) + beta with gamma, beta of shape N×C.
template <typename T>
Tensor<T> adain(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta);

/// Bilinear resampling with half-pixel centres (align_corners = false).
template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& x, std::size_t out_h, std::size_t out_w);

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs);

/// Columns [start, start + count) of an N×F tensor.
template <typename T>
Tensor<T> slice_columns(const Tensor<T>& x, std::size_t start, std::size_t count);

/// NCHW -> N×C spatial mean.
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);

template <typename T>
Tensor<T> sum_squares(const Tensor<T>& x);

/// maps N×K×H×W, renders N×3K×H×W -> N×3×H×W with
/// out[n,c] = sum_i maps[n,i] * renders[n,3i+c].
template <typename T>
Tensor<T> weighted_blend(const Tensor<T>& maps, const Tensor<T>& renders);

}  // namespace awb
