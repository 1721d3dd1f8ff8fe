#include "awb/adam.hpp"

#include <cmath>

#include "awb/errors.hpp"

namespace awb {

template <typename T>
void adam_step(ParamStore<T>& params, AdamState<T>& state, const AdamOptions& opts) {
  if (!(opts.eps > 0.0)) throw ConfigError("adam: eps must be > 0");
  if (!(opts.lr > 0.0)) throw ConfigError("adam: lr must be > 0");
  for (const auto& [name, p] : params) {
    if (p.requires_grad() && (!p.has_grad() || p.grad().size() != p.numel())) {
      throw ConfigError("adam: parameter '" + name + "' has no gradient");
    }
  }

  double clip_scale = 1.0;
  if (opts.clip_norm > 0.0) {
    double sq = 0.0;
    for (const auto& [_, p] : params) {
      if (!p.requires_grad()) continue;
      for (T g : p.grad()) sq += static_cast<double>(g) * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > opts.clip_norm) clip_scale = opts.clip_norm / norm;
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(opts.beta1, t);
  const double bc2 = 1.0 - std::pow(opts.beta2, t);
  for (auto& [name, p] : params) {
    if (!p.requires_grad()) continue;
    auto& mom = state.moments[name];
    if (mom.m.size() != p.numel()) {
      if (!mom.m.empty()) throw DimensionError("adam: moment shape changed for '" + name + "'");
      mom.m.assign(p.numel(), T(0));
      mom.v.assign(p.numel(), T(0));
    }
    auto w = p.data();
    auto g = p.grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = static_cast<double>(g[i]) * clip_scale;
      const double m = opts.beta1 * mom.m[i] + (1.0 - opts.beta1) * gi;
      const double v = opts.beta2 * mom.v[i] + (1.0 - opts.beta2) * gi * gi;
      mom.m[i] = static_cast<T>(m);
      mom.v[i] = static_cast<T>(v);
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      w[i] = static_cast<T>(w[i] - opts.lr * mhat / (std::sqrt(vhat) + opts.eps));
    }
  }
}

template void adam_step(ParamStore<float>&, AdamState<float>&, const AdamOptions&);
template void adam_step(ParamStore<double>&, AdamState<double>&, const AdamOptions&);

}  // namespace awb
