#include "awb/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"

#include "awb/checkpoint.hpp"
#include "awb/errors.hpp"

namespace awb {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  network.validate();
  if (patch_size < network.size_multiple() || patch_size % network.size_multiple() != 0) {
    throw ConfigError("train: patch size must be a positive multiple of " + std::to_string(network.size_multiple()));
  }
  if (batch < 1) throw ConfigError("train: batch must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train: lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("train: Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("train: Adam eps must be positive");
  if (!(clip_norm >= 0.0)) throw ConfigError("train: clip_norm must be >= 0");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("train: lambda must be >= 0");
}

Rng batch_rng(std::uint64_t seed, std::uint64_t step) { return Rng(seed).split("batch").split(step); }

namespace {

LossTerms<float> step_loss(const TrainConfig& config, const ParamStore<float>& params, const PatchBatch& batch) {
  Tensor<float> maps = forward_maps(batch.inputs, params, config.network);
  return total_loss(batch.gt, batch.inputs, maps, config.lambda);
}

}  // namespace

LossBreakdown train_step(const TrainConfig& config, ParamStore<float>& params, AdamState<float>& adam,
                         const PatchBatch& batch) {
  auto terms = step_loss(config, params, batch);
  backward(terms.total, params);
  adam_step(params, adam, config.adam());
  return terms.breakdown;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw DataError("cannot write '" + tmp.string() + "'");
    f << content;
  }
  fs::rename(tmp, path);
}

bool same_run(const TrainConfig& a, const TrainConfig& b) {
  TrainConfig x = a, y = b;
  x.epochs = y.epochs = 0;
  x.max_steps = y.max_steps = 0;
  return x == y;
}

}  // namespace

LossBreakdown evaluate_step_loss(const TrainConfig& config, const ParamStore<float>& params,
                                 const std::vector<Scene>& scenes, std::uint64_t step) {
  Rng rng = batch_rng(config.seed, step);
  auto batch = sample_patches(scenes, config.network.settings, config.patch_size, config.batch, rng);
  return step_loss(config, params, batch).breakdown;
}

TrainResult train(const TrainConfig& config, const std::vector<Scene>& scenes, const fs::path& out_dir,
                  const TrainOptions& options) {
  config.validate();
  if (scenes.empty()) throw DataError("train: no training scenes");
  fs::create_directories(out_dir);

  Checkpoint ck;
  std::vector<std::string> curve_rows;
  const fs::path curve_path = out_dir / "loss_curve.csv";
  if (options.resume) {
    ck = load_checkpoint(*options.resume);
    if (!same_run(ck.config, config)) {
      throw ConfigError("resume: checkpoint '" + options.resume->string() +
                        "' was trained with a different configuration");
    }
    check_params_match(ck.params, config.network);
    std::ifstream f(curve_path);
    std::string line;
    std::getline(f, line);
    while (std::getline(f, line)) {
      if (std::stoull(line.substr(0, line.find(','))) <= ck.adam.step) curve_rows.push_back(line);
    }
  } else {
    ck.params = init_params<float>(config.network, config.seed);
  }
  ck.config = config;

  const std::size_t spe =
      config.steps_per_epoch > 0 ? config.steps_per_epoch : (scenes.size() + config.batch - 1) / config.batch;
  std::uint64_t total = static_cast<std::uint64_t>(config.epochs) * spe;
  if (config.max_steps > 0 && config.max_steps < total) total = config.max_steps;

  TrainResult result;
  result.last_checkpoint = out_dir / "checkpoint_last.awbs";
  result.curve = curve_path;
  result.step = ck.adam.step;
  if (config.epochs == 0) {
    save_checkpoint(result.last_checkpoint, ck);
    return result;
  }

  double epoch_sum = 0.0;
  std::size_t epoch_count = 0;
  auto flush_curve = [&] {
    std::string s = "step,l_r,l_s,total\n";
    for (const auto& r : curve_rows) s += r + "\n";
    write_atomic(curve_path, s);
  };

  for (std::uint64_t step = ck.adam.step; step < total; ++step) {
    Rng rng = batch_rng(config.seed, step);
    PatchBatch batch = sample_patches(scenes, config.network.settings, config.patch_size, config.batch, rng);
    LossBreakdown lb;
    try {
      lb = train_step(config, ck.params, ck.adam, batch);
    } catch (const NumericError& e) {
      nlohmann::json dump;
      dump["step"] = step;
      dump["error"] = e.what();
      dump["batch_ids"] = batch.ids;
      dump["offsets"] = batch.offsets;
      if (!result.losses.empty()) {
        const auto& prev = result.losses.back();
        dump["previous_loss"] = {{"l_r", prev.l_r}, {"l_s", prev.l_s}, {"total", prev.total}};
      }
      nlohmann::json norms;
      for (const auto& [name, t] : ck.params) {
        double s = 0.0;
        for (float v : t.values()) s += double(v) * v;
        norms[name] = std::sqrt(s);
      }
      dump["param_norms"] = norms;
      const fs::path dump_path = out_dir / "nonfinite_dump.json";
      write_atomic(dump_path, dump.dump(2) + "\n");
      flush_curve();
      throw NumericError("non-finite value at training step " + std::to_string(step + 1) + " (" + e.what() +
                         "); state dumped to " + dump_path.string());
    }
    result.losses.push_back(lb);
    curve_rows.push_back(std::to_string(step + 1) + "," + fmt(lb.l_r) + "," + fmt(lb.l_s) + "," + fmt(lb.total));
    epoch_sum += lb.total;
    ++epoch_count;
    if (options.log_every > 0 && (step + 1) % options.log_every == 0) {
      std::cout << "step " << step + 1 << "/" << total << "  l_r " << fmt(lb.l_r) << "  l_s " << fmt(lb.l_s)
                << "  total " << fmt(lb.total) << std::endl;
    }
    if ((step + 1) % spe == 0 || step + 1 == total) {
      ck.epoch = (step + spe) / spe;
      const double mean = epoch_sum / static_cast<double>(epoch_count);
      epoch_sum = 0.0;
      epoch_count = 0;
      if (mean < ck.best_loss) {
        ck.best_loss = mean;
        result.best_checkpoint = out_dir / "checkpoint_best.awbs";
        save_checkpoint(result.best_checkpoint, ck);
      }
      save_checkpoint(result.last_checkpoint, ck);
      flush_curve();
    }
  }
  result.step = ck.adam.step;
  if (result.losses.empty()) {
    save_checkpoint(result.last_checkpoint, ck);
    flush_curve();
  }
  return result;
}

}  // namespace awb
