#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "awb/tensor.hpp"

namespace awb {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global L2 gradient-norm clip; 0 disables clipping.
  double clip_norm = 0.0;
};

/// First/second moments per parameter plus the shared step counter.
template <typename T>
struct AdamState {
  struct Moments {
    std::vector<T> m;
    std::vector<T> v;
  };
  std::map<std::string, Moments> moments;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update. Grads are read, never cleared.
template <typename T>
void adam_step(ParamStore<T>& params, AdamState<T>& state, const AdamOptions& opts);

}  // namespace awb
