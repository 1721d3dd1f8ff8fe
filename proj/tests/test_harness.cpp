#include "doctest.h"

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "awb/blend.hpp"
#include "awb/dataset.hpp"
#include "awb/image.hpp"
#include "awb/metrics.hpp"
#include "awb/network.hpp"
#include "awb/pipeline.hpp"
#include "awb/synth.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace awb;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

RunResult run_awb(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string(AWB_EXE) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = test::read_file(out);
  r.err = test::read_file(err);
  return r;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream f(p);
  std::size_t n = 0;
  for (std::string line; std::getline(f, line);)
    if (!line.empty()) ++n;
  return n;
}

const char* kToyConfig = R"({
  "network": {"enc_channels": [4, 4, 4, 4, 4], "backbone_channels": [4, 4], "style_dim": 4, "head_dim": 4},
  "train": {"batch": 2, "patch_size": 32, "epochs": 1, "seed": 1}
})";

// Synthesised dataset plus an untrained checkpoint, shared by several cases.
struct Fixture {
  fs::path dir;
  fs::path data;
  fs::path ckpt;
  Fixture() : dir(test::scratch_dir("harness_fixture")), data(dir / "data"), ckpt(dir / "run" / "checkpoint_last.awbs") {
    REQUIRE(run_awb("synth --count 3 --size 64 --seed 2 --out " + data.string(), dir).code == 0);
    write(dir / "cfg.json", kToyConfig);
    REQUIRE(run_awb("train --config " + (dir / "cfg.json").string() + " --manifest " + (data / "manifest.jsonl").string() +
                        " --out " + (dir / "run").string() + " --epochs 0",
                    dir)
                .code == 0);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

bool same_tree(const fs::path& a, const fs::path& b) {
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++n;
    const fs::path other = b / fs::relative(e.path(), a);
    if (!fs::exists(other) || test::read_file(e.path()) != test::read_file(other)) return false;
  }
  std::size_t m = 0;
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) ++m;
  return n == m && n > 0;
}

double max_image_diff(const ImageRGB& a, const ImageRGB& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, double(std::abs(a.data()[i] - b.data()[i])));
  return m;
}

}  // namespace

TEST_CASE("synth writes a complete reproducible dataset") {
  const auto dir = test::scratch_dir("harness_synth");
  REQUIRE(run_awb("synth --count 10 --size 64 --seed 5 --out " + (dir / "a").string(), dir).code == 0);
  REQUIRE(run_awb("synth --count 10 --size 64 --seed 5 --out " + (dir / "b").string(), dir).code == 0);
  CHECK(count_lines(dir / "a" / "manifest.jsonl") == 10);
  const auto manifest = DatasetManifest::load(dir / "a" / "manifest.jsonl", settings_tds());
  REQUIRE(manifest.records.size() == 10);
  for (const auto& r : manifest.records) {
    CHECK(fs::exists(r.gt));
    for (const auto& [s, p] : r.inputs) CHECK(fs::exists(p));
    for (char t : std::string("tds")) CHECK(fs::exists(dir / "a" / "scenes" / r.id / (std::string("mask_") + t + ".png")));
  }
  CHECK(fs::exists(dir / "a" / "synth_log.json"));
  CHECK(same_tree(dir / "a", dir / "b"));

  const auto scenes = load_scenes(manifest, settings_tds());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto ref = synth_mixed_scene(Rng(5).split(i), 64, settings_tds());
    CHECK(max_image_diff(scenes[i].gt, clamp01(ref.gt)) <= 1.0 / 255.0);
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(max_image_diff(scenes[i].renders.entries[k].second, clamp01(ref.renders.entries[k].second)) <= 1.0 / 255.0);
  }
}

TEST_CASE("synthetic scenes are exact blends of their renderings") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto scene = synth_mixed_scene(Rng(seed), 64, settings_tds());
    CHECK(mse(blend_unclamped(scene.masks, scene.renders), scene.gt, false) == 0.0);
    for (std::size_t j = 0; j < scene.masks.entries[0].second.size(); ++j) {
      double sum = 0.0;
      for (const auto& [s, p] : scene.masks.entries) {
        CHECK(p.data[j] >= 0.0f);
        sum += p.data[j];
      }
      REQUIRE(std::abs(sum - 1.0) <= 1e-6);
    }
  }
  SynthOptions opts;
  opts.one_hot = WbSetting::shade;
  const auto hot = synth_mixed_scene(Rng(4), 64, settings_tds(), opts);
  CHECK(hot.gt == hot.renders.entries[2].second);

  const auto dir = test::scratch_dir("harness_synth_hot");
  REQUIRE(run_awb("synth --count 2 --size 64 --seed 1 --one-hot d --out " + dir.string(), dir).code == 0);
  for (const auto& r : DatasetManifest::load(dir / "manifest.jsonl", settings_tds()).records)
    CHECK(read_png(r.gt) == read_png(r.inputs.at(WbSetting::daylight)));
}

TEST_CASE("fit-colormap") {
  const auto& fx = fixture();
  const auto dir = test::scratch_dir("harness_fit");
  REQUIRE(run_awb("fit-colormap --pairs " + (fx.data / "colormap_pairs.jsonl").string() + " --out " + (dir / "m1").string(), dir).code == 0);
  REQUIRE(run_awb("fit-colormap --pairs " + (fx.data / "colormap_pairs.jsonl").string() + " --out " + (dir / "m1").string(), dir).code == 0);
  REQUIRE(run_awb("fit-colormap --pairs " + (fx.data / "colormap_pairs.jsonl").string() + " --out " + (dir / "m2").string(), dir).code == 0);
  CHECK(fs::exists(dir / "m1" / "mapping_t.json"));
  CHECK(fs::exists(dir / "m1" / "mapping_s.json"));
  CHECK(same_tree(dir / "m1", dir / "m2"));

  const std::string img = (fx.data / "scenes" / "scene_0000" / "d.png").string();
  write(dir / "identity.jsonl", "{\"setting\": \"t\", \"source\": \"" + img + "\", \"target\": \"" + img + "\"}\n");
  const auto r = run_awb("fit-colormap --pairs " + (dir / "identity.jsonl").string() + " --out " + (dir / "id").string(), dir);
  REQUIRE(r.code == 0);
  const auto pos = r.out.find("rmse ");
  REQUIRE(pos != std::string::npos);
  CHECK(std::stod(r.out.substr(pos + 5)) <= 1e-6);

  write(dir / "missing.jsonl", "{\"setting\": \"t\", \"source\": \"nope.png\", \"target\": \"" + img + "\"}\n");
  const auto bad = run_awb("fit-colormap --pairs " + (dir / "missing.jsonl").string() + " --out " + (dir / "x").string(), dir);
  CHECK(bad.code == 3);
  CHECK(bad.err.find("nope.png") != std::string::npos);
}

TEST_CASE("train command") {
  const auto& fx = fixture();
  CHECK(fs::exists(fx.ckpt));
  const auto dir = test::scratch_dir("harness_train");
  write(dir / "bad.json", R"({"train": {"lambda": -1}})");
  const auto bad = run_awb("train --config " + (dir / "bad.json").string() + " --manifest " +
                               (fx.data / "manifest.jsonl").string() + " --out " + (dir / "bad").string(),
                           dir);
  CHECK(bad.code == 2);
  CHECK(bad.err.find("lambda") != std::string::npos);

  write(dir / "unknown.json", R"({"train": {"batchsize": 4}})");
  const auto unk = run_awb("train --config " + (dir / "unknown.json").string() + " --manifest " +
                               (fx.data / "manifest.jsonl").string() + " --out " + (dir / "unk").string(),
                           dir);
  CHECK(unk.code == 2);
  CHECK(unk.err.find("batchsize") != std::string::npos);

  const auto missing = run_awb("train --config " + (fx.dir / "cfg.json").string() + " --manifest " +
                                   (dir / "nope.jsonl").string() + " --out " + (dir / "m").string(),
                               dir);
  CHECK(missing.code == 3);

  const auto syn = test::scratch_dir("harness_train_data");
  REQUIRE(run_awb("synth --count 4 --size 64 --seed 9 --out " + syn.string(), dir).code == 0);
  const auto smoke = run_awb("train --config " + (fx.dir / "cfg.json").string() + " --manifest " +
                                 (syn / "manifest.jsonl").string() + " --out " + (dir / "smoke").string() + " --epochs 2",
                             dir);
  REQUIRE(smoke.code == 0);
  const auto pos = smoke.out.find("total ");
  REQUIRE(pos != std::string::npos);
  CHECK(std::isfinite(std::stod(smoke.out.substr(pos + 6))));
  CHECK(count_lines(dir / "smoke" / "loss_curve.csv") == 5);
}

TEST_CASE("infer command") {
  const auto& fx = fixture();
  const auto dir = test::scratch_dir("harness_infer");
  const std::string base = "infer --checkpoint " + fx.ckpt.string() + " --size 32 --manifest " +
                           (fx.data / "manifest.jsonl").string();
  REQUIRE(run_awb(base + " --one-hot s --out-dir " + (dir / "hot").string(), dir).code == 0);
  for (const auto& r : DatasetManifest::load(fx.data / "manifest.jsonl", settings_tds()).records)
    CHECK(read_png(dir / "hot" / (r.id + ".png")) == read_png(r.inputs.at(WbSetting::shade)));

  REQUIRE(run_awb(base + " --out-dir " + (dir / "a").string(), dir).code == 0);
  REQUIRE(run_awb(base + " --out-dir " + (dir / "b").string(), dir).code == 0);
  CHECK(same_tree(dir / "a", dir / "b"));

  const std::string img = (fx.data / "scenes" / "scene_0001" / "d.png").string();
  REQUIRE(run_awb("fit-colormap --pairs " + (fx.data / "colormap_pairs.jsonl").string() + " --out " + (dir / "maps").string(), dir).code == 0);
  const auto single = run_awb("infer --checkpoint " + fx.ckpt.string() + " --size 32 --ms --eas --input " + img +
                                  " --mappings " + (dir / "maps").string() + " --output " + (dir / "one.png").string(),
                              dir);
  REQUIRE(single.code == 0);
  CHECK(single.out.find("render-small > forward > ms > eas > clamp > resize > clamp > blend") != std::string::npos);
  CHECK(read_png(dir / "one.png").height() == 64);

  const auto bad = run_awb("infer --checkpoint " + (dir / "none.awbs").string() + " --input " + img + " --output " +
                               (dir / "x.png").string(),
                           dir);
  CHECK(bad.code == 3);
}

TEST_CASE("full-resolution blend matches a scalar resize-then-blend oracle") {
  const auto& fx = fixture();
  Model model = load_model(fx.ckpt);
  test::randomize_params(model.params, Rng(3), 0.3);
  const auto rec = DatasetManifest::load(fx.data / "manifest.jsonl", settings_tds()).records.at(0);
  RenderedSet full;
  for (WbSetting s : settings_tds()) full.entries.emplace_back(s, read_png(rec.inputs.at(s)));
  InferenceOptions opts;
  opts.size = 32;
  const auto result = infer_renders(full, model, opts);

  const auto small_maps = forward(resize(full, 32, 32), model.params, model.config);
  const std::size_t h = full.height(), w = full.width();
  std::vector<std::vector<double>> up(3, std::vector<double>(h * w));
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& p = small_maps.entries[i].second;
    std::vector<double> src(p.data.begin(), p.data.end());
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        up[i][y * w + x] = std::clamp(test::bilinear_oracle(src, 32, 32, h, w, y, x), 0.0, 1.0);
  }
  int worst = 0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        double v = 0.0;
        for (std::size_t i = 0; i < 3; ++i) v += up[i][y * w + x] * full.entries[i].second.at(y, x, c);
        const int oracle = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        worst = std::max(worst, std::abs(oracle - int(quantize8(result.corrected.at(y, x, c)))));
      }
  CHECK(worst <= 1);
}

TEST_CASE("eval command") {
  const auto& fx = fixture();
  const auto dir = test::scratch_dir("harness_eval");
  fs::create_directories(dir / "pred");
  fs::create_directories(dir / "gt");
  for (const auto& r : DatasetManifest::load(fx.data / "manifest.jsonl", settings_tds()).records)
    fs::copy_file(r.gt, dir / "pred" / (r.id + ".png"));

  REQUIRE(run_awb("eval --pred " + (dir / "pred").string() + " --gt-manifest " + (fx.data / "manifest.jsonl").string() +
                      " --out " + (dir / "same").string(),
                  dir)
              .code == 0);
  {
    std::ifstream f(dir / "same" / "summary.csv");
    std::string line;
    std::getline(f, line);
    while (std::getline(f, line)) CHECK(line.substr(line.find(',')) == ",0.000000,0.000000,0.000000,0.000000");
  }

  fs::copy_file(dir / "pred" / "scene_0000.png", dir / "gt" / "scene_0000.png");
  fs::create_directories(dir / "one");
  fs::copy_file(fx.data / "scenes" / "scene_0000" / "t.png", dir / "one" / "scene_0000.png");
  REQUIRE(run_awb("eval --pred " + (dir / "one").string() + " --gt-dir " + (dir / "gt").string() + " --out " +
                      (dir / "single").string(),
                  dir)
              .code == 0);
  {
    std::ifstream f(dir / "single" / "summary.csv");
    std::string line;
    std::getline(f, line);
    while (std::getline(f, line)) {
      std::vector<std::string> cells;
      std::istringstream ls(line);
      for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
      REQUIRE(cells.size() == 5);
      CHECK(cells[1] == cells[2]);
      CHECK(cells[1] == cells[3]);
      CHECK(cells[1] == cells[4]);
      CHECK(std::stod(cells[1]) > 0.0);
    }
  }

  const auto unmatched = run_awb("eval --pred " + (dir / "pred").string() + " --gt-dir " + (dir / "gt").string() +
                                     " --out " + (dir / "bad").string(),
                                 dir);
  CHECK(unmatched.code == 3);
  CHECK(unmatched.err.find("scene_0001") != std::string::npos);
  CHECK(unmatched.err.find("scene_0002") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "bad" / "summary.csv"));
}

TEST_CASE("command line errors") {
  const auto dir = test::scratch_dir("harness_cli");
  CHECK(run_awb("", dir).code == 2);
  CHECK(run_awb("synth --count notanumber", dir).code == 2);
  CHECK(run_awb("frobnicate", dir).code == 2);
}
