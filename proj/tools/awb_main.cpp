#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "awb/commands.hpp"
#include "awb/errors.hpp"
#include "awb/parallel.hpp"

namespace {

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

int env_threads(int fallback) {
  const auto v = env("AWB_THREADS");
  if (!v) return fallback;
  try {
    const int n = std::stoi(*v);
    if (n >= 1) return n;
  } catch (const std::exception&) {
  }
  throw awb::ConfigError("AWB_THREADS must be a positive integer, got '" + *v + "'");
}

awb::ScaleSet parse_scales(const std::string& s) {
  awb::ScaleSet out;
  out.scales.clear();
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.scales.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw awb::ConfigError("bad scale '" + item + "'");
    }
  }
  out.validate();
  return out;
}

struct PostFlags {
  bool ms = false;
  bool eas = false;
  std::string scales;
  double solver_lambda = -1;
  std::size_t solver_iters = 0;
};

void add_post_flags(CLI::App* cmd, PostFlags& f) {
  cmd->add_flag("--ms", f.ms, "Average maps predicted at several scales");
  cmd->add_flag("--eas", f.eas, "Edge-aware smoothing of the maps");
  cmd->add_option("--scales", f.scales, "Comma-separated scales for --ms (default 1,0.5,0.25)");
  cmd->add_option("--solver-lambda", f.solver_lambda, "Bilateral solver smoothness");
  cmd->add_option("--solver-iters", f.solver_iters, "Bilateral solver iteration cap");
}

void apply_post_flags(const PostFlags& f, awb::PostprocOptions& post) {
  post.ms = post.ms || f.ms;
  post.eas = post.eas || f.eas;
  if (!f.scales.empty()) post.scales = parse_scales(f.scales);
  if (f.solver_lambda >= 0) post.solver.lambda = f.solver_lambda;
  if (f.solver_iters > 0) post.solver.max_iters = f.solver_iters;
  post.solver.validate();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-illuminant white balance: colour mappings, training, inference and evaluation"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: AWB_THREADS or 1)");

  awb::FitColormapArgs fit;
  auto* c_fit = app.add_subcommand("fit-colormap", "Fit polynomial colour mappings from image pairs");
  c_fit->add_option("--pairs", fit.pairs, "JSON lines of {setting, source, target}")->required();
  std::string fit_out;
  c_fit->add_option("--out", fit_out, "Output directory for mapping_<tag>.json");

  awb::SynthArgs syn;
  std::string syn_out;
  auto* c_syn = app.add_subcommand("synth", "Generate synthetic mixed-illuminant scenes");
  c_syn->add_option("--count", syn.count, "Number of scenes");
  c_syn->add_option("--size", syn.size, "Scene side length in pixels");
  c_syn->add_option("--seed", syn.seed, "Random seed");
  c_syn->add_option("--settings", syn.settings, "Setting set, e.g. tds or tfdcs");
  c_syn->add_option("--out", syn_out, "Output directory");
  char one_hot_syn = 0;
  c_syn->add_option("--one-hot", one_hot_syn, "Use one-hot masks selecting this setting");

  std::string train_config, train_manifest, train_out, train_resume, train_preset;
  long long train_epochs = -1, train_max_steps = -1, train_seed = -1;
  double train_lr = -1;
  std::size_t log_every = 0;
  auto* c_train = app.add_subcommand("train", "Train the blending network");
  c_train->add_option("--config", train_config, "JSON configuration file");
  c_train->add_option("--manifest", train_manifest, "Training manifest (JSON lines)");
  c_train->add_option("--out", train_out, "Output directory");
  c_train->add_option("--resume", train_resume, "Checkpoint to resume from");
  c_train->add_option("--preset", train_preset, "Network preset: tiny or default");
  c_train->add_option("--epochs", train_epochs, "Epochs");
  c_train->add_option("--max-steps", train_max_steps, "Stop after this many optimizer steps");
  c_train->add_option("--seed", train_seed, "Random seed");
  c_train->add_option("--lr", train_lr, "Learning rate");
  c_train->add_option("--log-every", log_every, "Print losses every N steps");

  awb::InferArgs inf;
  PostFlags inf_post;
  std::string inf_input, inf_output, inf_mappings, inf_manifest, inf_out_dir, inf_dump, inf_config;
  char one_hot_inf = 0;
  auto* c_inf = app.add_subcommand("infer", "Correct images with a trained model");
  c_inf->add_option("--checkpoint", inf.checkpoint, "Model checkpoint")->required();
  c_inf->add_option("--config", inf_config, "JSON configuration file (inference section)");
  c_inf->add_option("--input", inf_input, "Input PNG rendered with the daylight setting");
  c_inf->add_option("--mappings", inf_mappings, "Directory with mapping_<tag>.json files");
  c_inf->add_option("--output", inf_output, "Output PNG");
  c_inf->add_option("--manifest", inf_manifest, "Manifest with rendered inputs; writes <id>.png");
  c_inf->add_option("--out-dir", inf_out_dir, "Output directory for --manifest");
  c_inf->add_option("--dump-maps", inf_dump, "Write weight maps as grayscale PNGs to this directory");
  c_inf->add_option("--size", inf.options.size, "Network input size");
  c_inf->add_option("--one-hot", one_hot_inf, "Skip the network and select this setting everywhere");
  c_inf->add_flag("--16bit", inf.bit16, "Write 16-bit PNG");
  add_post_flags(c_inf, inf_post);

  awb::EvalArgs ev;
  std::string ev_gt_dir, ev_gt_manifest, ev_out;
  auto* c_ev = app.add_subcommand("eval", "Compute MSE, MAE and CIEDE2000 against ground truth");
  c_ev->add_option("--pred", ev.pred_dir, "Directory of predicted PNGs")->required();
  c_ev->add_option("--gt-dir", ev_gt_dir, "Directory of ground-truth PNGs with matching names");
  c_ev->add_option("--gt-manifest", ev_gt_manifest, "Manifest whose gt entries are matched by id");
  c_ev->add_option("--out", ev_out, "Report directory");
  c_ev->add_option("--title", ev.title, "Report title");

  awb::AblateArgs ab;
  PostFlags ab_post;
  std::string ab_out;
  auto* c_ab = app.add_subcommand("ablate", "Evaluate every ms/eas combination and the static baselines");
  c_ab->add_option("--checkpoint", ab.checkpoint, "Model checkpoint")->required();
  c_ab->add_option("--manifest", ab.manifest, "Evaluation manifest")->required();
  c_ab->add_option("--out", ab_out, "Report directory");
  c_ab->add_option("--size", ab.size, "Network input size");
  add_post_flags(c_ab, ab_post);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const auto out_dir = [](const std::string& given, const char* sub) -> std::filesystem::path {
    if (!given.empty()) return given;
    if (auto e = env("AWB_OUT_DIR")) return std::filesystem::path(*e) / sub;
    throw awb::ConfigError("no output directory given (use --out or AWB_OUT_DIR)");
  };

  try {
    awb::set_num_threads(threads > 0 ? threads : env_threads(1));
    if (c_fit->parsed()) {
      fit.out_dir = out_dir(fit_out, "mappings");
      return awb::cmd_fit_colormap(fit, std::cout);
    }
    if (c_syn->parsed()) {
      syn.out_dir = out_dir(syn_out, "synth");
      if (one_hot_syn) syn.one_hot = one_hot_syn;
      return awb::cmd_synth(syn, std::cout);
    }
    if (c_train->parsed()) {
      awb::TrainArgs ta;
      if (!train_config.empty()) ta.config = awb::load_app_config(train_config);
      if (!train_preset.empty()) {
        const auto settings = ta.config.settings();
        if (train_preset == "tiny") ta.config.train.network = awb::NetworkConfig::tiny(settings);
        else if (train_preset == "default") { ta.config.train.network = awb::NetworkConfig{}; ta.config.train.network.settings = settings; }
        else throw awb::ConfigError("unknown preset '" + train_preset + "'");
      }
      if (!train_manifest.empty()) ta.config.paths.manifest = train_manifest;
      if (!train_out.empty()) ta.config.paths.out_dir = train_out;
      if (ta.config.paths.out_dir.empty()) ta.config.paths.out_dir = out_dir("", "train").string();
      if (train_epochs >= 0) ta.config.train.epochs = static_cast<std::size_t>(train_epochs);
      if (train_max_steps >= 0) ta.config.train.max_steps = static_cast<std::size_t>(train_max_steps);
      if (train_seed >= 0) ta.config.train.seed = static_cast<std::uint64_t>(train_seed);
      if (train_lr > 0) ta.config.train.lr = train_lr;
      if (threads > 0) ta.config.threads = threads;
      else if (env("AWB_THREADS")) ta.config.threads = env_threads(1);
      if (!train_resume.empty()) ta.resume = std::filesystem::path(train_resume);
      ta.log_every = log_every;
      return awb::cmd_train(ta, std::cout);
    }
    if (c_inf->parsed()) {
      if (!inf_config.empty()) {
        const auto cfg = awb::load_app_config(inf_config);
        if (c_inf->count("--size") == 0) inf.options.size = cfg.inference.size;
        inf.options.post = cfg.inference.post;
        if (inf_mappings.empty() && !cfg.paths.mappings_dir.empty()) inf_mappings = cfg.paths.mappings_dir;
      }
      apply_post_flags(inf_post, inf.options.post);
      if (!inf_input.empty()) inf.input = std::filesystem::path(inf_input);
      if (!inf_output.empty()) inf.output = std::filesystem::path(inf_output);
      if (!inf_mappings.empty()) inf.mappings_dir = std::filesystem::path(inf_mappings);
      if (!inf_manifest.empty()) {
        inf.manifest = std::filesystem::path(inf_manifest);
        inf.out_dir = out_dir(inf_out_dir, "infer");
      }
      if (!inf_dump.empty()) inf.dump_maps = std::filesystem::path(inf_dump);
      if (one_hot_inf) inf.options.one_hot = awb::setting_from_tag(one_hot_inf);
      return awb::cmd_infer(inf, std::cout);
    }
    if (c_ev->parsed()) {
      if (!ev_gt_dir.empty()) ev.gt_dir = std::filesystem::path(ev_gt_dir);
      if (!ev_gt_manifest.empty()) ev.gt_manifest = std::filesystem::path(ev_gt_manifest);
      ev.out_dir = out_dir(ev_out, "eval");
      return awb::cmd_eval(ev, std::cout);
    }
    if (c_ab->parsed()) {
      apply_post_flags(ab_post, ab.post);
      ab.out_dir = out_dir(ab_out, "ablate");
      return awb::cmd_ablate(ab, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return awb::exit_code_for(e);
  }
  return 1;
}
