#include "doctest.h"

#include <cmath>
#include <fstream>

#include "awb/checkpoint.hpp"
#include "awb/dataset.hpp"
#include "awb/errors.hpp"
#include "awb/losses.hpp"
#include "awb/trainer.hpp"
#include "json.hpp"
#include "test_support.hpp"

using namespace awb;
using awb::test::random_tensor;

namespace {

double recon_reference(const Tensor<double>& gt, const Tensor<double>& in, const Tensor<double>& maps) {
  return test::recon_oracle(gt.values(), in.values(), maps.values(), gt.dim(0), maps.dim(1), gt.dim(2), gt.dim(3));
}

double smooth_reference(const Tensor<double>& maps) {
  return test::smooth_oracle(maps.values(), maps.dim(0), maps.dim(1), maps.dim(2), maps.dim(3));
}

std::vector<Scene> random_scenes(std::size_t count, std::size_t size, std::uint64_t seed) {
  std::vector<Scene> scenes;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = Rng(seed).split(i);
    auto renders = test::random_renders(settings_tds(), size, size, rng);
    scenes.push_back({"s" + std::to_string(i), std::move(renders), test::random_image(size, size, rng)});
  }
  return scenes;
}

TrainConfig small_train_config() {
  TrainConfig c;
  c.network = test::toy_config();
  c.patch_size = 16;
  c.batch = 2;
  c.epochs = 2;
  c.steps_per_epoch = 3;
  c.seed = 4;
  c.lr = 1e-3;
  return c;
}

}  // namespace

TEST_CASE("recon_loss examples") {
  const std::size_t p = 5;
  const double c = 0.4;
  Tensor<double> gt({1, 3, p, p});
  Tensor<double> in({1, 9, p, p}, c);
  Tensor<double> maps({1, 3, p, p});
  for (std::size_t y = 0; y < p; ++y)
    for (std::size_t x = 0; x < p; ++x) test::at4(maps, 0, 1, y, x) = 1.0;
  CHECK(recon_loss(gt, in, maps).item() == doctest::Approx(3.0 * p * p * c * c).epsilon(1e-12));

  Rng rng(1);
  auto in2 = random_tensor<double>({2, 9, 6, 6}, rng, 0, 1);
  auto maps2 = random_tensor<double>({2, 3, 6, 6}, rng, 0, 1);
  Tensor<double> gt2({2, 3, 6, 6});
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t ch = 0; ch < 3; ++ch)
      for (std::size_t y = 0; y < 6; ++y)
        for (std::size_t x = 0; x < 6; ++x)
          for (std::size_t i = 0; i < 3; ++i)
            test::at4(gt2, b, ch, y, x) += test::at4(maps2, b, i, y, x) * test::at4(in2, b, 3 * i + ch, y, x);
  CHECK(recon_loss(gt2, in2, maps2).item() <= 1e-20);
}

TEST_CASE("smooth_loss examples") {
  const std::size_t h = 7, w = 9;
  Tensor<double> constant({1, 3, h, w}, 0.37);
  CHECK(smooth_loss(constant).item() == 0.0);

  Tensor<double> ramp({1, 1, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) test::at4(ramp, 0, 0, y, x) = static_cast<double>(x);
  CHECK(smooth_loss(ramp).item() == doctest::Approx(64.0 * (h - 2) * (w - 2)).epsilon(1e-12));

  Rng rng(2);
  auto maps = random_tensor<double>({2, 3, 8, 8}, rng);
  auto shifted = maps.clone();
  for (auto& v : shifted.values()) v += 5.0;
  CHECK(std::abs(smooth_loss(maps).item() - smooth_loss(shifted).item()) <= 1e-9);
}

TEST_CASE("losses match loop oracles") {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    auto gt = random_tensor<double>({2, 3, 9, 11}, rng, 0, 1);
    auto in = random_tensor<double>({2, 9, 9, 11}, rng, 0, 1);
    auto maps = random_tensor<double>({2, 3, 9, 11}, rng, -0.5, 1.5);
    const double r = recon_reference(gt, in, maps);
    const double s = smooth_reference(maps);
    CHECK(std::abs(recon_loss(gt, in, maps).item() - r) <= 1e-5 * std::max(1.0, r));
    CHECK(std::abs(smooth_loss(maps).item() - s) <= 1e-5 * std::max(1.0, s));
    const auto terms = total_loss(gt, in, maps, 100.0);
    CHECK(terms.breakdown.total == doctest::Approx(r + 100.0 * s).epsilon(1e-9));
    CHECK(terms.total.item() == doctest::Approx(terms.breakdown.total).epsilon(1e-9));
    CHECK(terms.breakdown.l_r >= 0.0);
    CHECK(terms.breakdown.l_s >= 0.0);
  }
}

TEST_CASE("total_loss examples") {
  Rng rng(4);
  auto gt = random_tensor<double>({1, 3, 6, 6}, rng, 0, 1);
  auto in = random_tensor<double>({1, 9, 6, 6}, rng, 0, 1);
  auto maps = random_tensor<double>({1, 3, 6, 6}, rng, 0, 1);
  const auto t0 = total_loss(gt, in, maps, 0.0);
  CHECK(t0.breakdown.total == doctest::Approx(t0.breakdown.l_r).epsilon(1e-12));
  const auto t1 = total_loss(gt, in, maps, 1.0);
  CHECK(t1.breakdown.total == doctest::Approx(t1.breakdown.l_r + t1.breakdown.l_s).epsilon(1e-12));
  CHECK_THROWS_AS(recon_loss(gt, in, random_tensor<double>({1, 3, 6, 5}, rng)), DimensionError);
}

TEST_CASE("box blur never increases the smoothing loss") {
  Rng rng(5);
  auto maps = random_tensor<double>({1, 2, 12, 12}, rng);
  double prev = smooth_loss(maps).item();
  for (int pass = 0; pass < 4; ++pass) {
    auto blurred = maps.clone();
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t y = 0; y < 12; ++y)
        for (std::size_t x = 0; x < 12; ++x) {
          double s = 0.0;
          int cnt = 0;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const int yy = static_cast<int>(y) + dy, xx = static_cast<int>(x) + dx;
              if (yy < 0 || xx < 0 || yy >= 12 || xx >= 12) continue;
              s += test::at4(maps, 0, i, std::size_t(yy), std::size_t(xx));
              ++cnt;
            }
          test::at4(blurred, 0, i, y, x) = s / cnt;
        }
    maps = blurred;
    const double cur = smooth_loss(maps).item();
    CHECK(cur <= prev);
    prev = cur;
  }
}

TEST_CASE("sample_patches reproducibility and alignment") {
  const auto scenes = random_scenes(3, 24, 1);
  Rng a(9), b(9);
  const auto pa = sample_patches(scenes, settings_tds(), 8, 5, a);
  const auto pb = sample_patches(scenes, settings_tds(), 8, 5, b);
  CHECK(pa.inputs.values() == pb.inputs.values());
  CHECK(pa.ids == pb.ids);
  CHECK(pa.offsets == pb.offsets);
  CHECK(pa.gt.shape() == Shape{5, 3, 8, 8});
  CHECK(pa.inputs.shape() == Shape{5, 9, 8, 8});
  for (std::size_t n = 0; n < 5; ++n) {
    const Scene* scene = nullptr;
    for (const auto& s : scenes)
      if (s.id == pa.ids[n]) scene = &s;
    REQUIRE(scene != nullptr);
    const auto [oy, ox] = pa.offsets[n];
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 0; x < 8; ++x)
        for (std::size_t c = 0; c < 3; ++c) {
          CHECK(test::at4(pa.gt, n, c, y, x) == scene->gt.at(oy + y, ox + x, c));
          for (std::size_t i = 0; i < 3; ++i)
            CHECK(test::at4(pa.inputs, n, 3 * i + c, y, x) == scene->renders.entries[i].second.at(oy + y, ox + x, c));
        }
  }
}

TEST_CASE("sample_patches offsets are uniform") {
  const auto scenes = random_scenes(1, 12, 2);
  const std::size_t p = 8, cells = 5 * 5, draws = 5000;
  std::vector<double> counts(cells, 0.0);
  Rng rng(10);
  const auto batch = sample_patches(scenes, settings_tds(), p, draws, rng);
  for (const auto& [y, x] : batch.offsets) {
    REQUIRE(y <= 4);
    REQUIRE(x <= 4);
    counts[y * 5 + x] += 1.0;
  }
  const double expected = static_cast<double>(draws) / cells;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 24 degrees of freedom, p = 0.001.
  CHECK(chi2 < 51.18);
}

TEST_CASE("sample_patches skips undersized scenes") {
  auto scenes = random_scenes(2, 16, 3);
  auto tiny = random_scenes(1, 8, 4);
  tiny[0].id = "tiny";
  scenes.push_back(tiny[0]);
  Rng rng(1);
  const auto batch = sample_patches(scenes, settings_tds(), 12, 20, rng);
  for (const auto& id : batch.ids) CHECK(id != "tiny");
  Rng rng2(1);
  CHECK_THROWS_AS(sample_patches(tiny, settings_tds(), 12, 2, rng2), DataError);
}

TEST_CASE("training with zero epochs leaves the initial parameters") {
  auto cfg = small_train_config();
  cfg.epochs = 0;
  const auto dir = test::scratch_dir("train_zero");
  const auto result = train(cfg, random_scenes(2, 16, 5), dir);
  CHECK(result.step == 0);
  CHECK(result.losses.empty());
  const auto ck = load_checkpoint(result.last_checkpoint);
  const auto init = init_params<float>(cfg.network, cfg.seed);
  for (const auto& [name, t] : init) CHECK(ck.params.at(name).values() == t.values());
}

TEST_CASE("resumed training matches an uninterrupted run") {
  const auto scenes = random_scenes(4, 20, 6);
  auto cfg = small_train_config();
  const auto full_dir = test::scratch_dir("train_full");
  const auto full = train(cfg, scenes, full_dir);
  REQUIRE(full.losses.size() == 6);

  auto first = cfg;
  first.max_steps = 3;
  const auto part_dir = test::scratch_dir("train_part");
  train(first, scenes, part_dir);
  const auto ck = load_checkpoint(part_dir / "checkpoint_last.awbs");
  CHECK(ck.adam.step == 3);
  const double next = evaluate_step_loss(cfg, ck.params, scenes, 3).total;
  CHECK(next == doctest::Approx(full.losses[3].total).epsilon(1e-6));

  TrainOptions opts;
  opts.resume = part_dir / "checkpoint_last.awbs";
  const auto resumed = train(cfg, scenes, part_dir, opts);
  REQUIRE(resumed.losses.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(resumed.losses[i].total == full.losses[3 + i].total);
  CHECK(test::read_file(part_dir / "checkpoint_last.awbs") == test::read_file(full_dir / "checkpoint_last.awbs"));
  CHECK(test::read_file(part_dir / "loss_curve.csv") == test::read_file(full_dir / "loss_curve.csv"));

  auto other = cfg;
  other.lr = 5e-4;
  CHECK_THROWS_AS(train(other, scenes, part_dir, opts), ConfigError);
}

TEST_CASE("training is deterministic") {
  const auto scenes = random_scenes(3, 20, 7);
  const auto cfg = small_train_config();
  const auto a = train(cfg, scenes, test::scratch_dir("det_a"));
  const auto b = train(cfg, scenes, test::scratch_dir("det_b"));
  CHECK(test::read_file(a.last_checkpoint) == test::read_file(b.last_checkpoint));
  CHECK(test::read_file(a.curve) == test::read_file(b.curve));
  for (std::size_t i = 0; i < a.losses.size(); ++i) CHECK(a.losses[i].total == b.losses[i].total);
}

TEST_CASE("non-finite loss stops training with a state dump") {
  auto scenes = random_scenes(2, 16, 8);
  for (auto& s : scenes) s.gt.data()[0] = std::nanf("");
  auto cfg = small_train_config();
  cfg.patch_size = 16;
  const auto dir = test::scratch_dir("train_nan");
  CHECK_THROWS_AS(train(cfg, scenes, dir), NumericError);
  REQUIRE(std::filesystem::exists(dir / "nonfinite_dump.json"));
  std::ifstream f(dir / "nonfinite_dump.json");
  const auto dump = nlohmann::json::parse(f);
  CHECK(dump.at("step").get<int>() == 0);
  CHECK(dump.at("batch_ids").size() == 2);
  CHECK(dump.at("param_norms").contains("out.weight"));
}

TEST_CASE("checkpoint round trip") {
  const auto cfg = small_train_config();
  const auto dir = test::scratch_dir("ckpt");
  const auto result = train(cfg, random_scenes(2, 16, 9), dir);
  const auto ck = load_checkpoint(result.last_checkpoint);
  CHECK(ck.config == cfg);
  save_checkpoint(dir / "again.awbs", ck);
  CHECK(test::read_file(dir / "again.awbs") == test::read_file(result.last_checkpoint));

  auto bytes = test::read_file(result.last_checkpoint);
  bytes[0] = 'X';
  {
    std::ofstream f(dir / "bad_magic.awbs", std::ios::binary);
    f << bytes;
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "bad_magic.awbs"), FormatError);
  {
    auto cut = test::read_file(result.last_checkpoint);
    cut.resize(cut.size() - 16);
    std::ofstream f(dir / "truncated.awbs", std::ios::binary);
    f << cut;
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "truncated.awbs"), FormatError);

  try {
    check_params_match(ck.params, test::toy_config(settings_tfdcs()));
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("backbone.conv1.weight") != std::string::npos);
  }
}
