#include "awb/config.hpp"

#include <fstream>
#include <set>

#include "awb/errors.hpp"

namespace awb {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

}  // namespace

void AppConfig::validate() const {
  train.validate();
  if (inference.size < 16 || inference.size % train.network.size_multiple() != 0) {
    throw ConfigError("inference size must be a multiple of " + std::to_string(train.network.size_multiple()) +
                      " and at least 16");
  }
  inference.post.scales.validate();
  inference.post.solver.validate();
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

json to_json(const NetworkConfig& c) {
  json j;
  j["settings"] = settings_string(c.settings);
  j["enc_channels"] = c.enc_channels;
  j["backbone_channels"] = c.backbone_channels;
  j["style_dim"] = c.style_dim;
  j["head_dim"] = c.head_dim;
  j["mlp_layers"] = c.mlp_layers;
  j["levels"] = c.levels;
  j["external_z_dim"] = c.external_z_dim;
  j["slope"] = c.slope;
  return j;
}

json to_json(const TrainConfig& c) {
  json j;
  j["network"] = to_json(c.network);
  j["patch_size"] = c.patch_size;
  j["batch"] = c.batch;
  j["lr"] = c.lr;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["adam_eps"] = c.adam_eps;
  j["clip_norm"] = c.clip_norm;
  j["lambda"] = c.lambda;
  j["epochs"] = c.epochs;
  j["steps_per_epoch"] = c.steps_per_epoch;
  j["max_steps"] = c.max_steps;
  j["seed"] = c.seed;
  return j;
}

json to_json(const PostprocOptions& o) {
  json j;
  j["ms"] = o.ms;
  j["eas"] = o.eas;
  j["scales"] = o.scales.scales;
  j["solver"] = {{"sigma_spatial", o.solver.sigma_spatial}, {"sigma_luma", o.solver.sigma_luma},
                 {"sigma_chroma", o.solver.sigma_chroma},   {"lambda", o.solver.lambda},
                 {"confidence", o.solver.confidence},       {"max_iters", o.solver.max_iters},
                 {"tolerance", o.solver.tolerance}};
  return j;
}

json to_json(const AppConfig& c) {
  json j;
  j["settings"] = settings_string(c.settings());
  json net = to_json(c.train.network);
  net.erase("settings");
  j["network"] = net;
  json tr = to_json(c.train);
  tr.erase("network");
  j["train"] = tr;
  json inf = to_json(c.inference.post);
  inf["size"] = c.inference.size;
  j["inference"] = inf;
  j["paths"] = {{"manifest", c.paths.manifest},
                {"out_dir", c.paths.out_dir},
                {"checkpoint", c.paths.checkpoint},
                {"mappings_dir", c.paths.mappings_dir}};
  j["threads"] = c.threads;
  return j;
}

void from_json(const json& j, NetworkConfig& out) {
  const std::string w = "network";
  reject_unknown(j, {"preset", "settings", "enc_channels", "backbone_channels", "style_dim", "head_dim", "mlp_layers",
                     "levels", "external_z_dim", "slope"},
                 w);
  if (j.contains("preset")) {
    const auto preset = j.at("preset").get<std::string>();
    if (preset == "tiny") {
      out = NetworkConfig::tiny(out.settings);
    } else if (preset == "default") {
      NetworkConfig d;
      d.settings = out.settings;
      out = d;
    } else {
      throw ConfigError("network.preset: expected 'default' or 'tiny', got '" + preset + "'");
    }
  }
  if (j.contains("settings")) out.settings = parse_settings(j.at("settings").get<std::string>());
  read(j, "enc_channels", out.enc_channels, w);
  read(j, "backbone_channels", out.backbone_channels, w);
  read(j, "style_dim", out.style_dim, w);
  read(j, "head_dim", out.head_dim, w);
  read(j, "mlp_layers", out.mlp_layers, w);
  read(j, "levels", out.levels, w);
  read(j, "external_z_dim", out.external_z_dim, w);
  read(j, "slope", out.slope, w);
}

void from_json(const json& j, TrainConfig& out) {
  const std::string w = "train";
  reject_unknown(j, {"network", "patch_size", "batch", "lr", "beta1", "beta2", "adam_eps", "clip_norm", "lambda",
                     "epochs", "steps_per_epoch", "max_steps", "seed"},
                 w);
  if (j.contains("network")) from_json(j.at("network"), out.network);
  read(j, "patch_size", out.patch_size, w);
  read(j, "batch", out.batch, w);
  read(j, "lr", out.lr, w);
  read(j, "beta1", out.beta1, w);
  read(j, "beta2", out.beta2, w);
  read(j, "adam_eps", out.adam_eps, w);
  read(j, "clip_norm", out.clip_norm, w);
  read(j, "lambda", out.lambda, w);
  read(j, "epochs", out.epochs, w);
  read(j, "steps_per_epoch", out.steps_per_epoch, w);
  read(j, "max_steps", out.max_steps, w);
  read(j, "seed", out.seed, w);
}

void from_json(const json& j, PostprocOptions& out) {
  const std::string w = "inference";
  reject_unknown(j, {"size", "ms", "eas", "scales", "solver"}, w);
  read(j, "ms", out.ms, w);
  read(j, "eas", out.eas, w);
  read(j, "scales", out.scales.scales, w);
  if (j.contains("solver")) {
    const json& s = j.at("solver");
    const std::string ws = "inference.solver";
    reject_unknown(s, {"sigma_spatial", "sigma_luma", "sigma_chroma", "lambda", "confidence", "max_iters", "tolerance"},
                   ws);
    read(s, "sigma_spatial", out.solver.sigma_spatial, ws);
    read(s, "sigma_luma", out.solver.sigma_luma, ws);
    read(s, "sigma_chroma", out.solver.sigma_chroma, ws);
    read(s, "lambda", out.solver.lambda, ws);
    read(s, "confidence", out.solver.confidence, ws);
    read(s, "max_iters", out.solver.max_iters, ws);
    read(s, "tolerance", out.solver.tolerance, ws);
  }
}

void from_json(const json& j, AppConfig& out) {
  reject_unknown(j, {"settings", "network", "train", "inference", "paths", "threads"}, "config");
  try {
    if (j.contains("settings")) out.train.network.settings = parse_settings(j.at("settings").get<std::string>());
    if (j.contains("network")) from_json(j.at("network"), out.train.network);
    if (j.contains("train")) {
      if (j.at("train").contains("network")) throw ConfigError("train.network: use the top-level 'network' key");
      from_json(j.at("train"), out.train);
    }
    if (j.contains("inference")) {
      from_json(j.at("inference"), out.inference.post);
      read(j.at("inference"), "size", out.inference.size, "inference");
    }
    if (j.contains("paths")) {
      const json& p = j.at("paths");
      reject_unknown(p, {"manifest", "out_dir", "checkpoint", "mappings_dir"}, "paths");
      read(p, "manifest", out.paths.manifest, "paths");
      read(p, "out_dir", out.paths.out_dir, "paths");
      read(p, "checkpoint", out.paths.checkpoint, "paths");
      read(p, "mappings_dir", out.paths.mappings_dir, "paths");
    }
    read(j, "threads", out.threads, "config");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

AppConfig load_app_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  AppConfig c;
  from_json(j, c);
  c.validate();
  return c;
}

}  // namespace awb
