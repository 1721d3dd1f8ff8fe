#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "awb/tensor.hpp"

namespace awb {

/// Largest |analytic - central difference| / max(1, |central difference|)
/// over every coordinate of every input. fn must rebuild its graph from the
/// current input values on each call and return a scalar.
inline double grad_check(const std::function<Tensor<double>()>& fn, std::vector<Tensor<double>> inputs,
                         double eps = 1e-4) {
  for (auto& in : inputs) {
    in.set_requires_grad(true);
    in.zero_grad();
  }
  backward(fn());
  std::vector<std::vector<double>> analytic;
  for (auto& in : inputs) analytic.emplace_back(in.grad().begin(), in.grad().end());

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto vals = inputs[k].data();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double orig = vals[i];
      vals[i] = orig + eps;
      const double up = fn().item();
      vals[i] = orig - eps;
      const double down = fn().item();
      vals[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      worst = std::max(worst, std::abs(analytic[k][i] - numeric) / std::max(1.0, std::abs(numeric)));
    }
  }
  return worst;
}

/// Same check over every tensor of a parameter store.
inline double grad_check(const std::function<Tensor<double>()>& fn, ParamStore<double>& params,
                         double eps = 1e-4) {
  std::vector<Tensor<double>> inputs;
  for (auto& [_, p] : params) inputs.push_back(p);
  return grad_check(fn, std::move(inputs), eps);
}

}  // namespace awb
