#include "doctest.h"

#include <cmath>

#include "awb/adam.hpp"
#include "awb/errors.hpp"
#include "awb/grad_check.hpp"
#include "awb/ops.hpp"
#include "awb/parallel.hpp"
#include "test_support.hpp"

using namespace awb;
using awb::test::random_tensor;

TEST_CASE("leaky_relu values and gradient") {
  Tensor<double> x({3}, std::vector<double>{2.0, -1.0, -3.0});
  auto y = leaky_relu(x, 0.2);
  CHECK(y.values()[0] == 2.0);
  CHECK(y.values()[1] == doctest::Approx(-0.2));
  Tensor<double> p({1}, std::vector<double>{-3.0});
  double err = grad_check([&] { return sum(leaky_relu(p, 0.2)); }, {p}, 1e-6);
  CHECK(err <= 1e-9);
  p.set_requires_grad(true);
  backward(sum(leaky_relu(p, 0.2)));
  CHECK(p.grad()[0] == doctest::Approx(0.2));
}

TEST_CASE("instance_stats examples") {
  Tensor<double> c({1, 1, 2, 2}, 3.0);
  auto [mu, sigma] = instance_stats(c);
  CHECK(mu.values()[0] == doctest::Approx(3.0));
  CHECK(sigma.values()[0] == doctest::Approx(std::sqrt(kInstanceNormEps)));

  Tensor<double> r({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  auto [mu2, sigma2] = instance_stats(r);
  CHECK(mu2.values()[0] == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(sigma2.values()[0] == doctest::Approx(std::sqrt(1.25 + 1e-5)).epsilon(1e-12));

  Rng rng(3);
  auto x = random_tensor<double>({2, 3, 4, 5}, rng);
  auto [m0, s0] = instance_stats(x);
  auto [m1, s1] = instance_stats(add_scalar(x, 7.5));
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(m1.values()[i] == doctest::Approx(m0.values()[i] + 7.5).epsilon(1e-12));
    CHECK(s1.values()[i] == doctest::Approx(s0.values()[i]).epsilon(1e-9));
  }
}

TEST_CASE("adain examples") {
  Tensor<double> r({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  Tensor<double> one({1, 1}, 1.0), zero({1, 1}, 0.0);
  auto y = adain(r, one, zero);
  const double expect[4] = {-1.34160, -0.44720, 0.44720, 1.34160};
  for (int i = 0; i < 4; ++i) CHECK(y.values()[i] == doctest::Approx(expect[i]).epsilon(1e-4));

  Rng rng(5);
  auto x = random_tensor<double>({2, 4, 6, 6}, rng, -3, 3);
  auto [mu, sigma] = instance_stats(x);
  auto fixed = adain(x, sigma, mu);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(std::abs(fixed.values()[i] - x.values()[i]) <= 1e-5);

  Tensor<double> g({2, 4}, 2.0), b({2, 4}, 5.0);
  auto [mo, so] = instance_stats(adain(x, g, b));
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(std::abs(mo.values()[i] - 5.0) <= 1e-4);
    CHECK(std::abs(so.values()[i] - 2.0) <= 1e-4);
  }
  CHECK_THROWS_AS(adain(x, Tensor<double>({2, 3}, 1.0), b), DimensionError);
}

TEST_CASE("bilinear_resize examples") {
  Rng rng(7);
  auto x = random_tensor<double>({1, 2, 5, 7}, rng);
  auto same = bilinear_resize(x, 5, 7);
  CHECK(same.values() == x.values());

  Tensor<double> c({1, 1, 3, 3}, 0.37);
  auto up = bilinear_resize(c, 11, 4);
  for (double v : up.values()) CHECK(v == 0.37);

  auto s = random_tensor<double>({1, 1, 2, 2}, rng);
  auto o = bilinear_resize(s, 4, 4);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t xx = 0; xx < 4; ++xx)
      CHECK(std::abs(o.values()[y * 4 + xx] - test::bilinear_oracle(s.values(), 2, 2, 4, 4, y, xx)) <= 1e-6);

  auto d = random_tensor<double>({1, 1, 9, 6}, rng);
  auto down = bilinear_resize(d, 4, 3);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t xx = 0; xx < 3; ++xx)
      CHECK(std::abs(down.values()[y * 3 + xx] - test::bilinear_oracle(d.values(), 9, 6, 4, 3, y, xx)) <= 1e-12);
}

TEST_CASE("concat_channels examples and gradient routing") {
  Rng rng(9);
  auto a = random_tensor<double>({2, 3, 4, 4}, rng);
  auto b = random_tensor<double>({2, 3, 4, 4}, rng);
  CHECK(concat_channels<double>({a}).values() == a.values());
  auto c = concat_channels<double>({a, b});
  CHECK(c.dim(1) == 6);
  for (std::size_t i = 0; i < 48; ++i) CHECK(c.values()[i] == a.values()[i]);
  auto wa = random_tensor<double>({2, 6, 4, 4}, rng);
  double err = grad_check([&] { return sum(mul(concat_channels<double>({a, b}), wa)); }, {a, b});
  CHECK(err <= 1e-9);
  CHECK_THROWS_AS(concat_channels<double>({a, Tensor<double>({2, 3, 4, 5})}), DimensionError);
}

TEST_CASE("backward trivial cases") {
  ParamStore<double> ps;
  ps.add("w", Tensor<double>({4}, 3.0)).set_requires_grad(true);
  ps.add("unused", Tensor<double>({2}, 1.0)).set_requires_grad(true);
  backward(sum(ps.at("w")), ps);
  for (double g : ps.at("w").grad()) CHECK(g == 1.0);
  backward(sum_squares(ps.at("w")), ps);
  for (double g : ps.at("w").grad()) CHECK(g == 6.0);
  for (double g : ps.at("unused").grad()) CHECK(g == 0.0);
  CHECK_THROWS(backward(ps.at("w"), ps));
}

TEST_CASE("adam_step examples") {
  AdamOptions opt;
  opt.lr = 0.1;
  {
    ParamStore<double> ps;
    auto& w = ps.add("w", Tensor<double>({1}, 1.0)).set_requires_grad(true);
    backward(scale(sum(w), 0.5), ps);
    AdamState<double> st;
    adam_step(ps, st, opt);
    CHECK(w.values()[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-7));
    CHECK(st.step == 1);
  }
  {
    ParamStore<double> ps;
    auto& w = ps.add("w", Tensor<double>({2}, 0.7)).set_requires_grad(true);
    backward(scale(sum(w), 0.0), ps);
    AdamState<double> st;
    adam_step(ps, st, opt);
    CHECK(w.values()[0] == 0.7);
  }
  {
    ParamStore<double> ps;
    auto& w = ps.add("w", Tensor<double>({1}, 1.0)).set_requires_grad(true);
    AdamState<double> st;
    double ref = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 3; ++t) {
      backward(sum_squares(w), ps);
      adam_step(ps, st, opt);
      const double g = 2.0 * ref;
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      const double mh = m / (1.0 - std::pow(0.9, t)), vh = v / (1.0 - std::pow(0.999, t));
      ref -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
      CHECK(std::abs(w.values()[0] - ref) <= 1e-9);
    }
  }
  {
    ParamStore<double> ps;
    ps.add("no_grad_yet", Tensor<double>({1}, 1.0)).set_requires_grad(true);
    AdamState<double> st;
    try {
      adam_step(ps, st, opt);
      FAIL("expected an error");
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find("no_grad_yet") != std::string::npos);
    }
  }
}

TEST_CASE("grad_check on elementary ops") {
  Rng rng(11);
  auto a = random_tensor<double>({2, 3}, rng);
  auto wt = random_tensor<double>({4, 3}, rng);
  auto bias = random_tensor<double>({4}, rng);
  CHECK(grad_check([&] { return sum(linear(a, wt, bias)); }, {a, wt, bias}) <= 1e-10);

  auto x = random_tensor<double>({2, 3, 5, 5}, rng);
  auto g = random_tensor<double>({2, 3}, rng, 0.5, 2.0);
  auto b = random_tensor<double>({2, 3}, rng);
  auto probe = random_tensor<double>({2, 3, 5, 5}, rng);
  CHECK(grad_check([&] { return sum(mul(adain(x, g, b), probe)); }, {x, g, b}) <= 1e-4);

  auto cw = random_tensor<double>({4, 3, 3, 3}, rng);
  auto cb = random_tensor<double>({4}, rng);
  for (int stride : {1, 2}) {
    auto cprobe = random_tensor<double>({2, 4, stride == 1 ? 5u : 3u, stride == 1 ? 5u : 3u}, rng);
    CHECK(grad_check([&] { return sum(mul(conv2d(x, cw, cb, stride, 1), cprobe)); }, {x, cw, cb}) <= 1e-4);
  }
  auto pw = random_tensor<double>({2, 3, 1, 1}, rng);
  auto pprobe = random_tensor<double>({2, 2, 5, 5}, rng);
  CHECK(grad_check([&] { return sum(mul(conv2d(x, pw, Tensor<double>(), 1, 0), pprobe)); }, {x, pw}) <= 1e-4);

  auto rprobe = random_tensor<double>({2, 3, 8, 3}, rng);
  CHECK(grad_check([&] { return sum(mul(bilinear_resize(x, 8, 3), rprobe)); }, {x}) <= 1e-4);

  auto sp = random_tensor<double>({3, 4}, rng, -3, 3);
  CHECK(grad_check([&] { return sum_squares(softplus(sp)); }, {sp}) <= 1e-4);
  CHECK(grad_check([&] { return sum_squares(global_avg_pool(x)); }, {x}) <= 1e-4);
  auto y = random_tensor<double>({2, 3, 5, 5}, rng);
  CHECK(grad_check([&] { return sum_squares(sub(mul(x, y), add(x, y))); }, {x, y}) <= 1e-4);
  auto mp = random_tensor<double>({2, 2, 4, 4}, rng);
  auto rp = random_tensor<double>({2, 6, 4, 4}, rng);
  CHECK(grad_check([&] { return sum_squares(weighted_blend(mp, rp)); }, {mp, rp}) <= 1e-4);
  auto lr = random_tensor<double>({3, 7}, rng);
  CHECK(grad_check([&] { return sum_squares(slice_columns(lr, 2, 3)); }, {lr}) <= 1e-4);
  CHECK(grad_check([&] { return sum_squares(reshape(lr, {7, 3})); }, {lr}) <= 1e-4);
}

TEST_CASE("non-finite results are rejected") {
  Tensor<double> x({1}, std::vector<double>{1e308});
  CHECK_THROWS_AS(scale(x, 1e10), NumericError);
}

TEST_CASE("batch-parallel convolution matches serial execution") {
  Rng rng(13);
  auto x = random_tensor<float>({6, 5, 12, 12}, rng);
  auto w = random_tensor<float>({7, 5, 3, 3}, rng);
  auto b = random_tensor<float>({7}, rng);
  set_num_threads(1);
  auto y1 = conv2d(x, w, b, 1, 1);
  set_num_threads(3);
  auto y3 = conv2d(x, w, b, 1, 1);
  set_num_threads(1);
  for (std::size_t i = 0; i < y1.numel(); ++i) CHECK(std::abs(y1.values()[i] - y3.values()[i]) <= 1e-6);
}
