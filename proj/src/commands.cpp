#include "awb/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include "json.hpp"

#include "awb/checkpoint.hpp"
#include "awb/dataset.hpp"
#include "awb/errors.hpp"
#include "awb/parallel.hpp"
#include "awb/synth.hpp"

namespace awb {

namespace fs = std::filesystem;
using nlohmann::json;

void write_text_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw DataError("cannot write '" + tmp.string() + "'");
    f << content;
    if (!f) throw DataError("failed writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const DimensionError*>(&e)) return 3;
  if (dynamic_cast<const NumericError*>(&e)) return 4;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return 3;
  return 1;
}

namespace {

std::string mapping_file(WbSetting s) { return std::string("mapping_") + tag(s) + ".json"; }

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open '" + path.string() + "'");
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw DataError("'" + path.string() + "' line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path q(p);
  return q.is_absolute() ? q : base / q;
}

std::string rel(const fs::path& base, const fs::path& p) { return p.lexically_relative(base).generic_string(); }

void write_maps(const fs::path& dir, const std::string& prefix, const WeightMaps& maps) {
  fs::create_directories(dir);
  for (const auto& [s, plane] : maps.entries) {
    write_gray_png(dir / (prefix + "map_" + std::string(1, tag(s)) + ".png"), plane);
  }
}

}  // namespace

std::vector<PolyMapping> load_mappings(const fs::path& dir, const SettingSet& settings) {
  std::vector<PolyMapping> out;
  for (WbSetting s : settings) {
    const fs::path p = dir / mapping_file(s);
    if (s == WbSetting::daylight && !fs::exists(p)) continue;
    if (!fs::exists(p)) throw DataError("missing mapping cache '" + p.string() + "'");
    PolyMapping m = load_mapping(p);
    if (m.setting != s) throw FormatError("mapping cache '" + p.string() + "' holds a different setting");
    out.push_back(std::move(m));
  }
  return out;
}

int cmd_fit_colormap(const FitColormapArgs& args, std::ostream& log) {
  const auto records = read_jsonl(args.pairs);
  const fs::path base = args.pairs.parent_path();
  std::map<std::size_t, std::vector<std::pair<fs::path, fs::path>>> by_setting;
  for (const auto& r : records) {
    std::string t, src, dst;
    try {
      t = r.at("setting").get<std::string>();
      src = r.at("source").get<std::string>();
      dst = r.at("target").get<std::string>();
    } catch (const json::exception& e) {
      throw DataError("pairs file '" + args.pairs.string() + "': " + e.what());
    }
    if (t.size() != 1) throw DataError("pairs file: bad setting '" + t + "'");
    by_setting[canonical_index(setting_from_tag(t[0]))].emplace_back(resolve(base, src), resolve(base, dst));
  }
  if (by_setting.empty()) throw DataError("pairs file '" + args.pairs.string() + "' is empty");
  for (const auto& [idx, pairs] : by_setting) {
    const WbSetting s = kAllSettings[idx];
    std::vector<float> sp[3], tp[3];
    for (const auto& [src, dst] : pairs) {
      const ImageRGB a = read_png(src), b = read_png(dst);
      if (a.height() != b.height() || a.width() != b.width()) {
        throw DataError("pair '" + src.string() + "' / '" + dst.string() + "' differ in size");
      }
      for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t np = a.pixels();
        sp[c].insert(sp[c].end(), a.data().begin() + c * np, a.data().begin() + (c + 1) * np);
        tp[c].insert(tp[c].end(), b.data().begin() + c * np, b.data().begin() + (c + 1) * np);
      }
    }
    const std::size_t n = sp[0].size();
    ImageRGB source(n, 1), target(n, 1);
    for (std::size_t c = 0; c < 3; ++c) {
      std::copy(sp[c].begin(), sp[c].end(), source.data().begin() + c * n);
      std::copy(tp[c].begin(), tp[c].end(), target.data().begin() + c * n);
    }
    FitResult fit = fit_mapping(source, target, s);
    fit.mapping.source_id = rel(base, pairs.front().first) + (pairs.size() > 1 ? " +" + std::to_string(pairs.size() - 1) : "");
    fit.mapping.target_id = rel(base, pairs.front().second) + (pairs.size() > 1 ? " +" + std::to_string(pairs.size() - 1) : "");
    save_mapping(args.out_dir / mapping_file(s), fit.mapping);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%c (%dK): %zu pairs, %zu px, rmse %.6g\n", tag(s), kelvin(s), pairs.size(), n,
                  fit.rmse);
    log << buf;
  }
  return 0;
}

int cmd_synth(const SynthArgs& args, std::ostream& log) {
  const SettingSet settings = parse_settings(args.settings);
  if (args.count == 0) throw ConfigError("synth: count must be >= 1");
  SynthOptions opts;
  if (args.one_hot) opts.one_hot = setting_from_tag(*args.one_hot);
  const fs::path out = args.out_dir;
  fs::create_directories(out);
  DatasetManifest manifest;
  std::string pairs;
  const Rng root(args.seed);
  for (std::size_t i = 0; i < args.count; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "scene_%04zu", i);
    const SynthScene scene = synth_mixed_scene(root.split(i), args.size, settings, opts);
    const fs::path dir = out / "scenes" / id;
    ManifestRecord rec;
    rec.id = id;
    for (const auto& [s, img] : scene.renders.entries) {
      const fs::path p = dir / (std::string(1, tag(s)) + ".png");
      write_png(p, img);
      rec.inputs[s] = p;
    }
    for (const auto& [s, m] : scene.masks.entries) write_gray_png(dir / ("mask_" + std::string(1, tag(s)) + ".png"), m);
    rec.gt = dir / "gt.png";
    write_png(rec.gt, scene.gt);
    for (WbSetting s : settings) {
      if (s == WbSetting::daylight) continue;
      json j;
      j["setting"] = std::string(1, tag(s));
      j["source"] = rel(out, rec.inputs.at(WbSetting::daylight));
      j["target"] = rel(out, rec.inputs.at(s));
      pairs += j.dump() + "\n";
    }
    manifest.records.push_back(std::move(rec));
  }
  manifest.save(out / "manifest.jsonl");
  if (std::find(settings.begin(), settings.end(), WbSetting::daylight) != settings.end()) {
    write_text_file(out / "colormap_pairs.jsonl", pairs);
  }
  json info;
  info["seed"] = args.seed;
  info["count"] = args.count;
  info["size"] = args.size;
  info["settings"] = settings_string(settings);
  info["one_hot"] = args.one_hot ? json(std::string(1, *args.one_hot)) : json(nullptr);
  write_text_file(out / "synth_log.json", info.dump(2) + "\n");
  log << "wrote " << args.count << " scenes (" << args.size << "px, settings " << settings_string(settings)
      << ", seed " << args.seed << ") to " << out.string() << "\n";
  return 0;
}

int cmd_train(const TrainArgs& args, std::ostream& log) {
  const AppConfig& cfg = args.config;
  cfg.validate();
  if (cfg.paths.manifest.empty()) throw ConfigError("train: no manifest given");
  if (cfg.paths.out_dir.empty()) throw ConfigError("train: no output directory given");
  set_num_threads(cfg.threads);
  const auto manifest = DatasetManifest::load(cfg.paths.manifest, cfg.settings());
  const auto scenes = load_scenes(manifest, cfg.settings());
  const fs::path out = cfg.paths.out_dir;
  fs::create_directories(out);
  write_text_file(out / "config.json", to_json(cfg).dump(2) + "\n");
  TrainOptions opts;
  opts.resume = args.resume;
  opts.log_every = args.log_every;
  const auto params = init_params<float>(cfg.train.network, cfg.train.seed);
  log << "training on " << scenes.size() << " scenes, " << params.total_numel() << " parameters\n";
  TrainResult res = train(cfg.train, scenes, out, opts);
  if (res.losses.empty()) {
    log << "no optimizer steps run; checkpoint " << res.last_checkpoint.string() << "\n";
  } else {
    const auto& lb = res.losses.back();
    char buf[200];
    std::snprintf(buf, sizeof buf, "final step %llu: l_r %.6g  l_s %.6g  lambda %g  total %.6g\n",
                  static_cast<unsigned long long>(res.step), lb.l_r, lb.l_s, lb.lambda, lb.total);
    log << buf << "checkpoint " << res.last_checkpoint.string() << "\n";
  }
  return 0;
}

int cmd_infer(const InferArgs& args, std::ostream& log) {
  const Model model = load_model(args.checkpoint);
  if (args.options.size % model.config.size_multiple() != 0 || args.options.size < 16) {
    throw ConfigError("infer: size must be a multiple of " + std::to_string(model.config.size_multiple()));
  }
  args.options.post.scales.validate();
  args.options.post.solver.validate();
  const int bits = args.bit16 ? 16 : 8;
  if (args.manifest) {
    if (!args.out_dir) throw ConfigError("infer: --manifest needs --out-dir");
    const auto manifest = DatasetManifest::load(*args.manifest, model.config.settings);
    for (const auto& rec : manifest.records) {
      RenderedSet full;
      for (WbSetting s : model.config.settings) full.entries.emplace_back(s, read_png(rec.inputs.at(s)));
      InferenceResult r = infer_renders(full, model, args.options);
      write_png(*args.out_dir / (rec.id + ".png"), r.corrected, bits);
      if (args.dump_maps) write_maps(*args.dump_maps, rec.id + "_", r.maps);
    }
    log << "corrected " << manifest.records.size() << " scenes into " << args.out_dir->string() << "\n";
    return 0;
  }
  if (!args.input || !args.output) throw ConfigError("infer: give --input and --output (or --manifest)");
  const ImageRGB init = read_png(*args.input);
  std::vector<PolyMapping> mappings;
  if (args.mappings_dir) {
    mappings = load_mappings(*args.mappings_dir, model.config.settings);
  } else if (!args.options.one_hot || model.config.settings.size() > 1) {
    for (WbSetting s : model.config.settings) {
      if (s != WbSetting::daylight) throw ConfigError("infer: --mappings is required to render non-daylight settings");
    }
  }
  InferenceResult r = infer_image(init, mappings, model, args.options);
  write_png(*args.output, r.corrected, bits);
  if (args.dump_maps) write_maps(*args.dump_maps, "", r.maps);
  std::string trace;
  for (const auto& t : r.trace) trace += (trace.empty() ? "" : " > ") + t;
  log << "wrote " << args.output->string() << " (" << trace << ")\n";
  return 0;
}

int cmd_eval(const EvalArgs& args, std::ostream& log) {
  if (args.gt_dir.has_value() == args.gt_manifest.has_value()) {
    throw ConfigError("eval: give exactly one of --gt-dir or --gt-manifest");
  }
  if (!fs::is_directory(args.pred_dir)) throw DataError("eval: prediction directory '" + args.pred_dir.string() + "' not found");
  std::map<std::string, fs::path> preds, gts;
  for (const auto& e : fs::directory_iterator(args.pred_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") preds[e.path().stem().string()] = e.path();
  }
  if (args.gt_dir) {
    if (!fs::is_directory(*args.gt_dir)) throw DataError("eval: ground-truth directory '" + args.gt_dir->string() + "' not found");
    for (const auto& e : fs::directory_iterator(*args.gt_dir)) {
      if (e.is_regular_file() && e.path().extension() == ".png") gts[e.path().stem().string()] = e.path();
    }
  } else {
    for (const auto& r : read_jsonl(*args.gt_manifest)) {
      try {
        gts[r.at("id").get<std::string>()] = resolve(args.gt_manifest->parent_path(), r.at("gt").get<std::string>());
      } catch (const json::exception& e) {
        throw DataError("eval: bad ground-truth manifest: " + std::string(e.what()));
      }
    }
  }
  std::vector<std::string> unmatched;
  for (const auto& [id, _] : preds)
    if (!gts.count(id)) unmatched.push_back("prediction without ground truth: " + id);
  for (const auto& [id, _] : gts)
    if (!preds.count(id)) unmatched.push_back("ground truth without prediction: " + id);
  if (!unmatched.empty()) {
    std::string msg = "eval: unmatched files:";
    for (const auto& u : unmatched) msg += "\n  " + u;
    throw DataError(msg);
  }
  if (preds.empty()) throw DataError("eval: no PNG predictions in '" + args.pred_dir.string() + "'");
  std::vector<ImageMetrics> rows;
  for (const auto& [id, p] : preds) rows.push_back(evaluate_pair(id, read_png(p), read_png(gts.at(id))));
  const MetricsReport report = MetricsReport::from_images(std::move(rows));
  write_text_file(args.out_dir / "per_image.csv", report.per_image_csv());
  write_text_file(args.out_dir / "summary.csv", report.summary_csv());
  const std::string table = report.text_table(args.title);
  write_text_file(args.out_dir / "report.txt", table);
  log << table;
  return 0;
}

int cmd_ablate(const AblateArgs& args, std::ostream& log) {
  const Model model = load_model(args.checkpoint);
  const auto manifest = DatasetManifest::load(args.manifest, model.config.settings);
  const auto scenes = load_scenes(manifest, model.config.settings);
  struct Row {
    std::string name;
    MetricsReport report;
  };
  std::vector<Row> rows;
  for (WbSetting s : model.config.settings) {
    std::vector<ImageMetrics> m;
    for (const auto& sc : scenes) m.push_back(evaluate_pair(sc.id, sc.renders.at(s), sc.gt));
    rows.push_back({std::string("static-") + tag(s), MetricsReport::from_images(std::move(m))});
  }
  for (int eas = 0; eas <= 1; ++eas) {
    for (int ms = 0; ms <= 1; ++ms) {
      InferenceOptions opts;
      opts.size = args.size;
      opts.post = args.post;
      opts.post.ms = ms;
      opts.post.eas = eas;
      std::vector<ImageMetrics> m;
      for (const auto& sc : scenes) m.push_back(evaluate_pair(sc.id, infer_renders(sc.renders, model, opts).corrected, sc.gt));
      rows.push_back({std::string("ms=") + char('0' + ms) + " eas=" + char('0' + eas),
                      MetricsReport::from_images(std::move(m))});
    }
  }
  std::string csv = "config,mse_mean,mse_q1,mse_q2,mse_q3,mae_mean,mae_q1,mae_q2,mae_q3,de_mean,de_q1,de_q2,de_q3\n";
  std::string txt;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-14s %10s %10s %10s %10s | %8s %8s | %8s %8s\n", "config", "MSE", "Q1", "Q2", "Q3",
                "MAE", "Q2", "dE2000", "Q2");
  txt += buf;
  for (const auto& r : rows) {
    const auto& a = r.report;
    csv += r.name;
    for (const QuantileRow* q : {&a.mse, &a.mae, &a.delta_e})
      for (double v : {q->mean, q->q1, q->q2, q->q3}) csv += "," + format_number(v, 6);
    csv += "\n";
    std::snprintf(buf, sizeof buf, "%-14s %10.4f %10.4f %10.4f %10.4f | %8.4f %8.4f | %8.4f %8.4f\n", r.name.c_str(),
                  a.mse.mean, a.mse.q1, a.mse.q2, a.mse.q3, a.mae.mean, a.mae.q2, a.delta_e.mean, a.delta_e.q2);
    txt += buf;
  }
  txt += "scenes: " + std::to_string(scenes.size()) + "\n";
  write_text_file(args.out_dir / "ablation.csv", csv);
  write_text_file(args.out_dir / "ablation.txt", txt);
  log << txt;
  return 0;
}

}  // namespace awb
