#include "awb/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "awb/errors.hpp"
#include "awb/parallel.hpp"

namespace awb {

namespace {

template <typename T>
using NodePtr = std::shared_ptr<detail::Node<T>>;

void require(bool cond, const std::string& msg) {
  if (!cond) throw DimensionError(msg);
}

long floor_div(long a, long b) {
  long q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

long ceil_div(long a, long b) { return -floor_div(-a, b); }

struct ConvGeom {
  long n, c, h, w;
  long o, kh, kw;
  long oh, ow;
  long stride, pad;

  // Output columns whose input column ow*stride + kx - pad lies inside the row.
  std::pair<long, long> col_range(long kx) const {
    long lo = std::max(0L, ceil_div(pad - kx, stride));
    long hi = std::min(ow - 1, floor_div(w - 1 + pad - kx, stride));
    return {lo, hi};
  }
};

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

bool is_pointwise(const ConvGeom& g) { return g.kh == 1 && g.kw == 1 && g.stride == 1 && g.pad == 0; }

// col is (C·kh·kw) × (oh·ow); entries reading outside the input are zero.
template <typename T>
void im2col(const ConvGeom& g, const T* ip, T* col) {
  const long plane = g.oh * g.ow;
  for (long c = 0; c < g.c; ++c) {
    const T* cp = ip + c * g.h * g.w;
    for (long ky = 0; ky < g.kh; ++ky) {
      for (long kx = 0; kx < g.kw; ++kx) {
        T* row = col + ((c * g.kh + ky) * g.kw + kx) * plane;
        std::fill(row, row + plane, T(0));
        auto [lo, hi] = g.col_range(kx);
        if (lo > hi) continue;
        for (long oy = 0; oy < g.oh; ++oy) {
          const long iy = oy * g.stride + ky - g.pad;
          if (iy < 0 || iy >= g.h) continue;
          const T* irow = cp + iy * g.w + kx - g.pad;
          T* orow = row + oy * g.ow;
          for (long ox = lo; ox <= hi; ++ox) orow[ox] = irow[ox * g.stride];
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const ConvGeom& g, const T* col, T* xp) {
  const long plane = g.oh * g.ow;
  for (long c = 0; c < g.c; ++c) {
    T* cp = xp + c * g.h * g.w;
    for (long ky = 0; ky < g.kh; ++ky) {
      for (long kx = 0; kx < g.kw; ++kx) {
        const T* row = col + ((c * g.kh + ky) * g.kw + kx) * plane;
        auto [lo, hi] = g.col_range(kx);
        if (lo > hi) continue;
        for (long oy = 0; oy < g.oh; ++oy) {
          const long iy = oy * g.stride + ky - g.pad;
          if (iy < 0 || iy >= g.h) continue;
          T* xrow = cp + iy * g.w + kx - g.pad;
          const T* grow = row + oy * g.ow;
          for (long ox = lo; ox <= hi; ++ox) xrow[ox * g.stride] += grow[ox];
        }
      }
    }
  }
}

template <typename T>
void conv_forward_item(const ConvGeom& g, long n, const T* in, const T* wt, const T* bias, T* out) {
  const long plane = g.oh * g.ow;
  const long ck = g.c * g.kh * g.kw;
  const T* ip = in + n * g.c * g.h * g.w;
  std::vector<T> buf;
  const T* col = ip;
  if (!is_pointwise(g)) {
    buf.resize(static_cast<std::size_t>(ck * plane));
    im2col(g, ip, buf.data());
    col = buf.data();
  }
  Eigen::Map<RowMat<T>> y(out + n * g.o * plane, g.o, plane);
  y.noalias() = Eigen::Map<const RowMat<T>>(wt, g.o, ck) * Eigen::Map<const RowMat<T>>(col, ck, plane);
  if (bias) {
    for (long o = 0; o < g.o; ++o) y.row(o).array() += bias[o];
  }
}

template <typename T>
void conv_backward_input_item(const ConvGeom& g, long n, const T* dy, const T* wt, T* dx) {
  const long plane = g.oh * g.ow;
  const long ck = g.c * g.kh * g.kw;
  Eigen::Map<const RowMat<T>> gy(dy + n * g.o * plane, g.o, plane);
  Eigen::Map<const RowMat<T>> w(wt, g.o, ck);
  T* xp = dx + n * g.c * g.h * g.w;
  if (is_pointwise(g)) {
    Eigen::Map<RowMat<T>>(xp, ck, plane).noalias() += w.transpose() * gy;
    return;
  }
  RowMat<T> col = w.transpose() * gy;
  col2im_add(g, col.data(), xp);
}

template <typename T>
void conv_backward_weight_item(const ConvGeom& g, long n, const T* dy, const T* in, T* dw) {
  const long plane = g.oh * g.ow;
  const long ck = g.c * g.kh * g.kw;
  const T* ip = in + n * g.c * g.h * g.w;
  std::vector<T> buf;
  const T* col = ip;
  if (!is_pointwise(g)) {
    buf.resize(static_cast<std::size_t>(ck * plane));
    im2col(g, ip, buf.data());
    col = buf.data();
  }
  Eigen::Map<RowMat<T>>(dw, g.o, ck).noalias() =
      Eigen::Map<const RowMat<T>>(dy + n * g.o * plane, g.o, plane) *
      Eigen::Map<const RowMat<T>>(col, ck, plane).transpose();
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
}

template <typename T>
void require_nchw(const Tensor<T>& x, const char* op) {
  require(x.defined() && x.rank() == 4,
          std::string(op) + ": expected NCHW tensor, got " +
              (x.defined() ? shape_str(x.shape()) : std::string("<undefined>")));
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int stride,
                 int pad) {
  require_nchw(input, "conv2d");
  require(weight.defined() && weight.rank() == 4, "conv2d: weight must be O×C×kh×kw");
  require(stride >= 1 && pad >= 0, "conv2d: stride must be >= 1 and pad >= 0");
  ConvGeom g{};
  g.n = static_cast<long>(input.dim(0));
  g.c = static_cast<long>(input.dim(1));
  g.h = static_cast<long>(input.dim(2));
  g.w = static_cast<long>(input.dim(3));
  g.o = static_cast<long>(weight.dim(0));
  g.kh = static_cast<long>(weight.dim(2));
  g.kw = static_cast<long>(weight.dim(3));
  g.stride = stride;
  g.pad = pad;
  require(static_cast<long>(weight.dim(1)) == g.c,
          "conv2d: input has " + std::to_string(g.c) + " channels, weight expects " +
              std::to_string(weight.dim(1)));
  require(g.h + 2 * pad >= g.kh && g.w + 2 * pad >= g.kw, "conv2d: kernel larger than padded input");
  const bool has_bias = bias.defined();
  if (has_bias) {
    require(bias.rank() == 1 && static_cast<long>(bias.dim(0)) == g.o, "conv2d: bias must have O entries");
  }
  g.oh = (g.h + 2 * pad - g.kh) / stride + 1;
  g.ow = (g.w + 2 * pad - g.kw) / stride + 1;

  std::vector<T> out(static_cast<std::size_t>(g.n * g.o * g.oh * g.ow));
  {
    const T* in = input.data().data();
    const T* wt = weight.data().data();
    const T* bp = has_bias ? bias.data().data() : nullptr;
    T* op = out.data();
    parallel_for(static_cast<std::size_t>(g.n),
                 [&](std::size_t n) { conv_forward_item(g, static_cast<long>(n), in, wt, bp, op); });
  }

  std::vector<NodePtr<T>> parents{input.node(), weight.node()};
  if (has_bias) parents.push_back(bias.node());
  return detail::make_result<T>(
      "conv2d", {static_cast<std::size_t>(g.n), static_cast<std::size_t>(g.o),
                 static_cast<std::size_t>(g.oh), static_cast<std::size_t>(g.ow)},
      std::move(out), std::move(parents), [g, has_bias](detail::Node<T>& self) {
        auto& x = *self.parents[0];
        auto& w = *self.parents[1];
        const T* dy = self.grad.data();
        if (x.requires_grad) {
          T* dx = detail::grad_of(x).data();
          const T* wt = w.data.data();
          parallel_for(static_cast<std::size_t>(g.n), [&](std::size_t n) {
            conv_backward_input_item(g, static_cast<long>(n), dy, wt, dx);
          });
        }
        if (w.requires_grad) {
          auto& dw = detail::grad_of(w);
          const std::size_t wsize = dw.size();
          std::vector<T> partial(wsize * static_cast<std::size_t>(g.n));
          const T* in = x.data.data();
          parallel_for(static_cast<std::size_t>(g.n), [&](std::size_t n) {
            conv_backward_weight_item(g, static_cast<long>(n), dy, in, partial.data() + n * wsize);
          });
          for (long n = 0; n < g.n; ++n) {
            const T* pp = partial.data() + static_cast<std::size_t>(n) * wsize;
            for (std::size_t i = 0; i < wsize; ++i) dw[i] += pp[i];
          }
        }
        if (has_bias && self.parents[2]->requires_grad) {
          auto& db = detail::grad_of(*self.parents[2]);
          const long plane = g.oh * g.ow;
          for (long n = 0; n < g.n; ++n) {
            for (long o = 0; o < g.o; ++o) {
              const T* gp = dy + (n * g.o + o) * plane;
              T acc = T(0);
              for (long i = 0; i < plane; ++i) acc += gp[i];
              db[static_cast<std::size_t>(o)] += acc;
            }
          }
        }
      });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  require(input.defined() && input.rank() == 2, "linear: input must be N×F");
  require(weight.defined() && weight.rank() == 2, "linear: weight must be G×F");
  const std::size_t n = input.dim(0), f = input.dim(1), g = weight.dim(0);
  require(weight.dim(1) == f, "linear: input has " + std::to_string(f) + " features, weight expects " +
                                  std::to_string(weight.dim(1)));
  const bool has_bias = bias.defined();
  if (has_bias) require(bias.rank() == 1 && bias.dim(0) == g, "linear: bias must have G entries");
  std::vector<T> out(n * g);
  const T* x = input.data().data();
  const T* w = weight.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < g; ++j) {
      T acc = has_bias ? bias.data()[j] : T(0);
      for (std::size_t k = 0; k < f; ++k) acc += x[i * f + k] * w[j * f + k];
      out[i * g + j] = acc;
    }
  }
  std::vector<NodePtr<T>> parents{input.node(), weight.node()};
  if (has_bias) parents.push_back(bias.node());
  return detail::make_result<T>("linear", {n, g}, std::move(out), std::move(parents),
                                [n, f, g, has_bias](detail::Node<T>& self) {
                                  auto& xn = *self.parents[0];
                                  auto& wn = *self.parents[1];
                                  const T* dy = self.grad.data();
                                  if (xn.requires_grad) {
                                    auto& dx = detail::grad_of(xn);
                                    for (std::size_t i = 0; i < n; ++i)
                                      for (std::size_t j = 0; j < g; ++j)
                                        for (std::size_t k = 0; k < f; ++k)
                                          dx[i * f + k] += dy[i * g + j] * wn.data[j * f + k];
                                  }
                                  if (wn.requires_grad) {
                                    auto& dw = detail::grad_of(wn);
                                    for (std::size_t i = 0; i < n; ++i)
                                      for (std::size_t j = 0; j < g; ++j)
                                        for (std::size_t k = 0; k < f; ++k)
                                          dw[j * f + k] += dy[i * g + j] * xn.data[i * f + k];
                                  }
                                  if (has_bias && self.parents[2]->requires_grad) {
                                    auto& db = detail::grad_of(*self.parents[2]);
                                    for (std::size_t i = 0; i < n; ++i)
                                      for (std::size_t j = 0; j < g; ++j) db[j] += dy[i * g + j];
                                  }
                                });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& input, T slope) {
  if (!(slope >= T(0) && slope < T(1))) throw DimensionError("leaky_relu: slope must lie in [0, 1)");
  std::vector<T> out(input.numel());
  auto x = input.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > T(0) ? x[i] : slope * x[i];
  return detail::make_result<T>("leaky_relu", input.shape(), std::move(out), {input.node()},
                                [slope](detail::Node<T>& self) {
                                  auto& p = *self.parents[0];
                                  auto& dx = detail::grad_of(p);
                                  for (std::size_t i = 0; i < dx.size(); ++i)
                                    dx[i] += self.grad[i] * (p.data[i] > T(0) ? T(1) : slope);
                                });
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& input) {
  std::vector<T> out(input.numel());
  auto x = input.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::max(x[i], T(0)) + std::log1p(std::exp(-std::abs(x[i])));
  }
  return detail::make_result<T>("softplus", input.shape(), std::move(out), {input.node()},
                                [](detail::Node<T>& self) {
                                  auto& p = *self.parents[0];
                                  auto& dx = detail::grad_of(p);
                                  for (std::size_t i = 0; i < dx.size(); ++i) {
                                    const T v = p.data[i];
                                    const T sig = v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                                                            : std::exp(v) / (T(1) + std::exp(v));
                                    dx[i] += self.grad[i] * sig;
                                  }
                                });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return detail::make_result<T>("add", a.shape(), std::move(out), {a.node(), b.node()},
                                [](detail::Node<T>& self) {
                                  for (auto& p : self.parents) {
                                    if (!p->requires_grad) continue;
                                    auto& d = detail::grad_of(*p);
                                    for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i];
                                  }
                                });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return detail::make_result<T>("sub", a.shape(), std::move(out), {a.node(), b.node()},
                                [](detail::Node<T>& self) {
                                  if (self.parents[0]->requires_grad) {
                                    auto& d = detail::grad_of(*self.parents[0]);
                                    for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i];
                                  }
                                  if (self.parents[1]->requires_grad) {
                                    auto& d = detail::grad_of(*self.parents[1]);
                                    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= self.grad[i];
                                  }
                                });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return detail::make_result<T>("mul", a.shape(), std::move(out), {a.node(), b.node()},
                                [](detail::Node<T>& self) {
                                  auto& pa = *self.parents[0];
                                  auto& pb = *self.parents[1];
                                  if (pa.requires_grad) {
                                    auto& d = detail::grad_of(pa);
                                    for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i] * pb.data[i];
                                  }
                                  if (pb.requires_grad) {
                                    auto& d = detail::grad_of(pb);
                                    for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i] * pa.data[i];
                                  }
                                });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T c) {
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + c;
  return detail::make_result<T>("add_scalar", a.shape(), std::move(out), {a.node()},
                                [](detail::Node<T>& self) {
                                  auto& d = detail::grad_of(*self.parents[0]);
                                  for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i];
                                });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c;
  return detail::make_result<T>("scale", a.shape(), std::move(out), {a.node()},
                                [c](detail::Node<T>& self) {
                                  auto& d = detail::grad_of(*self.parents[0]);
                                  for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i] * c;
                                });
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> instance_stats(const Tensor<T>& x) {
  require_nchw(x, "instance_stats");
  const std::size_t nc = x.dim(0) * x.dim(1);
  const std::size_t hw = x.dim(2) * x.dim(3);
  require(hw >= 1, "instance_stats: empty spatial extent");
  std::vector<T> mu(nc), sigma(nc);
  auto xd = x.data();
  for (std::size_t k = 0; k < nc; ++k) {
    const T* p = xd.data() + k * hw;
    double s = 0.0;
    for (std::size_t i = 0; i < hw; ++i) s += p[i];
    const double m = s / static_cast<double>(hw);
    double v = 0.0;
    for (std::size_t i = 0; i < hw; ++i) v += (p[i] - m) * (p[i] - m);
    v /= static_cast<double>(hw);
    mu[k] = static_cast<T>(m);
    sigma[k] = static_cast<T>(std::sqrt(v + kInstanceNormEps));
  }
  Shape sh{x.dim(0), x.dim(1)};
  auto mu_t = detail::make_result<T>("instance_mean", sh, std::move(mu), {x.node()},
                                     [hw](detail::Node<T>& self) {
                                       auto& d = detail::grad_of(*self.parents[0]);
                                       const T inv = T(1) / static_cast<T>(hw);
                                       for (std::size_t k = 0; k < self.grad.size(); ++k) {
                                         const T g = self.grad[k] * inv;
                                         for (std::size_t i = 0; i < hw; ++i) d[k * hw + i] += g;
                                       }
                                     });
  auto mu_vals = mu_t.values();
  auto sigma_t = detail::make_result<T>(
      "instance_std", sh, std::move(sigma), {x.node()}, [hw, mu_vals](detail::Node<T>& self) {
        auto& p = *self.parents[0];
        auto& d = detail::grad_of(p);
        for (std::size_t k = 0; k < self.grad.size(); ++k) {
          const T g = self.grad[k] / (static_cast<T>(hw) * self.data[k]);
          for (std::size_t i = 0; i < hw; ++i) d[k * hw + i] += g * (p.data[k * hw + i] - mu_vals[k]);
        }
      });
  return {mu_t, sigma_t};
}

template <typename T>
Tensor<T> adain(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta) {
  require_nchw(x, "adain");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  const Shape nc{n, c};
  require(gamma.defined() && gamma.shape() == nc,
          "adain: gamma must be " + shape_str(nc) + ", got " + shape_str(gamma.shape()));
  require(beta.defined() && beta.shape() == nc,
          "adain: beta must be " + shape_str(nc) + ", got " + shape_str(beta.shape()));
  std::vector<T> xhat(x.numel()), inv_sigma(n * c), out(x.numel());
  auto xd = x.data();
  auto gd = gamma.data();
  auto bd = beta.data();
  for (std::size_t k = 0; k < n * c; ++k) {
    const T* p = xd.data() + k * hw;
    double s = 0.0;
    for (std::size_t i = 0; i < hw; ++i) s += p[i];
    const double m = s / static_cast<double>(hw);
    double v = 0.0;
    for (std::size_t i = 0; i < hw; ++i) v += (p[i] - m) * (p[i] - m);
    v /= static_cast<double>(hw);
    const T mu = static_cast<T>(m);
    const T sigma = static_cast<T>(std::sqrt(v + kInstanceNormEps));
    inv_sigma[k] = T(1) / sigma;
    for (std::size_t i = 0; i < hw; ++i) {
      const T xh = (p[i] - mu) / sigma;
      xhat[k * hw + i] = xh;
      out[k * hw + i] = gd[k] * xh + bd[k];
    }
  }
  return detail::make_result<T>(
      "adain", x.shape(), std::move(out), {x.node(), gamma.node(), beta.node()},
      [n, c, hw, xhat = std::move(xhat), inv_sigma = std::move(inv_sigma)](detail::Node<T>& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        const T* dy = self.grad.data();
        for (std::size_t k = 0; k < n * c; ++k) {
          const T* g = dy + k * hw;
          const T* xh = xhat.data() + k * hw;
          double sum_dy = 0.0, sum_dy_xh = 0.0;
          for (std::size_t i = 0; i < hw; ++i) {
            sum_dy += g[i];
            sum_dy_xh += g[i] * xh[i];
          }
          if (pg.requires_grad) detail::grad_of(pg)[k] += static_cast<T>(sum_dy_xh);
          if (pb.requires_grad) detail::grad_of(pb)[k] += static_cast<T>(sum_dy);
          if (px.requires_grad) {
            auto& dx = detail::grad_of(px);
            const T gm = pg.data[k];
            const T mean_d = static_cast<T>(gm * sum_dy / static_cast<double>(hw));
            const T mean_dxh = static_cast<T>(gm * sum_dy_xh / static_cast<double>(hw));
            for (std::size_t i = 0; i < hw; ++i) {
              dx[k * hw + i] += (gm * g[i] - mean_d - xh[i] * mean_dxh) * inv_sigma[k];
            }
          }
        }
      });
}

namespace {

struct Tap {
  std::size_t i0, i1;
  double w0, w1;
};

std::vector<Tap> resize_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t d = 0; d < out; ++d) {
    double src = (static_cast<double>(d) + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    std::size_t i0 = static_cast<std::size_t>(src);
    if (i0 > in - 1) i0 = in - 1;
    const std::size_t i1 = i0 + 1 < in ? i0 + 1 : i0;
    const double l1 = src - static_cast<double>(i0);
    taps[d] = {i0, i1, 1.0 - l1, l1};
  }
  return taps;
}

}  // namespace

template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& x, std::size_t out_h, std::size_t out_w) {
  require_nchw(x, "bilinear_resize");
  require(out_h >= 1 && out_w >= 1, "bilinear_resize: output dims must be >= 1");
  const std::size_t nc = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  Shape out_shape{x.dim(0), x.dim(1), out_h, out_w};
  if (h == out_h && w == out_w) {
    return detail::make_result<T>("bilinear_resize", out_shape, x.values(), {x.node()},
                                  [](detail::Node<T>& self) {
                                    auto& d = detail::grad_of(*self.parents[0]);
                                    for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i];
                                  });
  }
  auto ty = resize_taps(h, out_h);
  auto tx = resize_taps(w, out_w);
  std::vector<T> out(nc * out_h * out_w);
  auto xd = x.data();
  for (std::size_t k = 0; k < nc; ++k) {
    const T* p = xd.data() + k * h * w;
    T* o = out.data() + k * out_h * out_w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const Tap& a = ty[oy];
      const T* r0 = p + a.i0 * w;
      const T* r1 = p + a.i1 * w;
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const Tap& b = tx[ox];
        // Lerp form keeps constant regions exactly constant.
        const T top = r0[b.i0] + static_cast<T>(b.w1) * (r0[b.i1] - r0[b.i0]);
        const T bot = r1[b.i0] + static_cast<T>(b.w1) * (r1[b.i1] - r1[b.i0]);
        o[oy * out_w + ox] = top + static_cast<T>(a.w1) * (bot - top);
      }
    }
  }
  return detail::make_result<T>(
      "bilinear_resize", out_shape, std::move(out), {x.node()},
      [nc, h, w, out_h, out_w, ty = std::move(ty), tx = std::move(tx)](detail::Node<T>& self) {
        auto& d = detail::grad_of(*self.parents[0]);
        for (std::size_t k = 0; k < nc; ++k) {
          T* dp = d.data() + k * h * w;
          const T* g = self.grad.data() + k * out_h * out_w;
          for (std::size_t oy = 0; oy < out_h; ++oy) {
            const Tap& a = ty[oy];
            for (std::size_t ox = 0; ox < out_w; ++ox) {
              const Tap& b = tx[ox];
              const T v = g[oy * out_w + ox];
              const T va0 = static_cast<T>(a.w0) * v;
              const T va1 = static_cast<T>(a.w1) * v;
              dp[a.i0 * w + b.i0] += static_cast<T>(b.w0) * va0;
              dp[a.i0 * w + b.i1] += static_cast<T>(b.w1) * va0;
              dp[a.i1 * w + b.i0] += static_cast<T>(b.w0) * va1;
              dp[a.i1 * w + b.i1] += static_cast<T>(b.w1) * va1;
            }
          }
        }
      });
}

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs) {
  require(!xs.empty(), "concat_channels: no inputs");
  for (const auto& x : xs) require_nchw(x, "concat_channels");
  const std::size_t n = xs[0].dim(0), h = xs[0].dim(2), w = xs[0].dim(3);
  std::size_t total_c = 0;
  std::vector<std::size_t> chans;
  for (const auto& x : xs) {
    require(x.dim(0) == n && x.dim(2) == h && x.dim(3) == w,
            "concat_channels: spatial/batch mismatch " + shape_str(xs[0].shape()) + " vs " +
                shape_str(x.shape()));
    chans.push_back(x.dim(1));
    total_c += x.dim(1);
  }
  const std::size_t hw = h * w;
  std::vector<T> out(n * total_c * hw);
  std::size_t c_off = 0;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    auto xd = xs[j].data();
    for (std::size_t b = 0; b < n; ++b) {
      std::copy_n(xd.data() + b * chans[j] * hw, chans[j] * hw, out.data() + (b * total_c + c_off) * hw);
    }
    c_off += chans[j];
  }
  std::vector<NodePtr<T>> parents;
  for (const auto& x : xs) parents.push_back(x.node());
  return detail::make_result<T>("concat_channels", {n, total_c, h, w}, std::move(out), std::move(parents),
                                [n, hw, total_c, chans](detail::Node<T>& self) {
                                  std::size_t off = 0;
                                  for (std::size_t j = 0; j < self.parents.size(); ++j) {
                                    auto& p = *self.parents[j];
                                    if (p.requires_grad) {
                                      auto& d = detail::grad_of(p);
                                      for (std::size_t b = 0; b < n; ++b) {
                                        const T* g = self.grad.data() + (b * total_c + off) * hw;
                                        T* dp = d.data() + b * chans[j] * hw;
                                        for (std::size_t i = 0; i < chans[j] * hw; ++i) dp[i] += g[i];
                                      }
                                    }
                                    off += chans[j];
                                  }
                                });
}

template <typename T>
Tensor<T> slice_columns(const Tensor<T>& x, std::size_t start, std::size_t count) {
  require(x.defined() && x.rank() == 2, "slice_columns: expected N×F tensor");
  const std::size_t n = x.dim(0), f = x.dim(1);
  require(start + count <= f, "slice_columns: range exceeds feature count");
  std::vector<T> out(n * count);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = x.data()[i * f + start + j];
  return detail::make_result<T>("slice_columns", {n, count}, std::move(out), {x.node()},
                                [n, f, start, count](detail::Node<T>& self) {
                                  auto& d = detail::grad_of(*self.parents[0]);
                                  for (std::size_t i = 0; i < n; ++i)
                                    for (std::size_t j = 0; j < count; ++j)
                                      d[i * f + start + j] += self.grad[i * count + j];
                                });
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  require_nchw(x, "global_avg_pool");
  const std::size_t nc = x.dim(0) * x.dim(1), hw = x.dim(2) * x.dim(3);
  std::vector<T> out(nc);
  for (std::size_t k = 0; k < nc; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < hw; ++i) s += x.data()[k * hw + i];
    out[k] = static_cast<T>(s / static_cast<double>(hw));
  }
  return detail::make_result<T>("global_avg_pool", {x.dim(0), x.dim(1)}, std::move(out), {x.node()},
                                [nc, hw](detail::Node<T>& self) {
                                  auto& d = detail::grad_of(*self.parents[0]);
                                  const T inv = T(1) / static_cast<T>(hw);
                                  for (std::size_t k = 0; k < nc; ++k)
                                    for (std::size_t i = 0; i < hw; ++i) d[k * hw + i] += self.grad[k] * inv;
                                });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  require(shape_numel(shape) == x.numel(),
          "reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  return detail::make_result<T>("reshape", std::move(shape), x.values(), {x.node()},
                                [](detail::Node<T>& self) {
                                  auto& d = detail::grad_of(*self.parents[0]);
                                  for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i];
                                });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  double s = 0.0;
  for (T v : x.data()) s += v;
  return detail::make_result<T>("sum", {1}, {static_cast<T>(s)}, {x.node()}, [](detail::Node<T>& self) {
    auto& d = detail::grad_of(*self.parents[0]);
    for (auto& v : d) v += self.grad[0];
  });
}

template <typename T>
Tensor<T> sum_squares(const Tensor<T>& x) {
  double s = 0.0;
  for (T v : x.data()) s += static_cast<double>(v) * v;
  return detail::make_result<T>("sum_squares", {1}, {static_cast<T>(s)}, {x.node()},
                                [](detail::Node<T>& self) {
                                  auto& p = *self.parents[0];
                                  auto& d = detail::grad_of(p);
                                  const T g2 = T(2) * self.grad[0];
                                  for (std::size_t i = 0; i < d.size(); ++i) d[i] += g2 * p.data[i];
                                });
}

template <typename T>
Tensor<T> weighted_blend(const Tensor<T>& maps, const Tensor<T>& renders) {
  require_nchw(maps, "weighted_blend");
  require_nchw(renders, "weighted_blend");
  const std::size_t n = maps.dim(0), k = maps.dim(1), h = maps.dim(2), w = maps.dim(3);
  require(renders.dim(0) == n && renders.dim(1) == 3 * k && renders.dim(2) == h && renders.dim(3) == w,
          "weighted_blend: renders " + shape_str(renders.shape()) + " do not match maps " +
              shape_str(maps.shape()));
  const std::size_t hw = h * w;
  std::vector<T> out(n * 3 * hw, T(0));
  auto md = maps.data();
  auto rd = renders.data();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t i = 0; i < k; ++i) {
      const T* m = md.data() + (b * k + i) * hw;
      for (std::size_t c = 0; c < 3; ++c) {
        const T* r = rd.data() + (b * 3 * k + 3 * i + c) * hw;
        T* o = out.data() + (b * 3 + c) * hw;
        for (std::size_t p = 0; p < hw; ++p) o[p] += m[p] * r[p];
      }
    }
  return detail::make_result<T>(
      "weighted_blend", {n, 3, h, w}, std::move(out), {maps.node(), renders.node()},
      [n, k, hw](detail::Node<T>& self) {
        auto& pm = *self.parents[0];
        auto& pr = *self.parents[1];
        for (std::size_t b = 0; b < n; ++b)
          for (std::size_t i = 0; i < k; ++i)
            for (std::size_t c = 0; c < 3; ++c) {
              const T* g = self.grad.data() + (b * 3 + c) * hw;
              const std::size_t ro = (b * 3 * k + 3 * i + c) * hw;
              const std::size_t mo = (b * k + i) * hw;
              if (pm.requires_grad) {
                auto& dm = detail::grad_of(pm);
                for (std::size_t p = 0; p < hw; ++p) dm[mo + p] += g[p] * pr.data[ro + p];
              }
              if (pr.requires_grad) {
                auto& dr = detail::grad_of(pr);
                for (std::size_t p = 0; p < hw; ++p) dr[ro + p] += g[p] * pm.data[mo + p];
              }
            }
      });
}

#define AWB_INSTANTIATE_OPS(T)                                                                      \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int);       \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                                               \
  template Tensor<T> softplus(const Tensor<T>&);                                                    \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                               \
  template Tensor<T> scale(const Tensor<T>&, T);                                                    \
  template std::pair<Tensor<T>, Tensor<T>> instance_stats(const Tensor<T>&);                        \
  template Tensor<T> adain(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> bilinear_resize(const Tensor<T>&, std::size_t, std::size_t);                   \
  template Tensor<T> concat_channels(const std::vector<Tensor<T>>&);                                 \
  template Tensor<T> slice_columns(const Tensor<T>&, std::size_t, std::size_t);                     \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                             \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                              \
  template Tensor<T> sum(const Tensor<T>&);                                                         \
  template Tensor<T> sum_squares(const Tensor<T>&);                                                 \
  template Tensor<T> weighted_blend(const Tensor<T>&, const Tensor<T>&);

AWB_INSTANTIATE_OPS(float)
AWB_INSTANTIATE_OPS(double)

#undef AWB_INSTANTIATE_OPS

}  // namespace awb
