#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "awb/config.hpp"
#include "awb/metrics.hpp"
#include "awb/pipeline.hpp"

namespace awb {

struct FitColormapArgs {
  /// JSON lines {"setting": "t", "source": path, "target": path}.
  std::filesystem::path pairs;
  std::filesystem::path out_dir;
};

struct SynthArgs {
  std::size_t count = 10;
  std::size_t size = 128;
  std::uint64_t seed = 0;
  std::string settings = "tds";
  std::filesystem::path out_dir;
  std::optional<char> one_hot;
};

struct TrainArgs {
  AppConfig config;
  std::optional<std::filesystem::path> resume;
  std::size_t log_every = 0;
};

struct InferArgs {
  std::filesystem::path checkpoint;
  /// Either a single daylight image (with mapping caches) ...
  std::optional<std::filesystem::path> input;
  std::optional<std::filesystem::path> mappings_dir;
  std::optional<std::filesystem::path> output;
  /// ... or every record of a manifest (renders given), written as <id>.png.
  std::optional<std::filesystem::path> manifest;
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::filesystem::path> dump_maps;
  InferenceOptions options;
  bool bit16 = false;
};

struct EvalArgs {
  std::filesystem::path pred_dir;
  std::optional<std::filesystem::path> gt_dir;
  std::optional<std::filesystem::path> gt_manifest;
  std::filesystem::path out_dir;
  std::string title;
};

struct AblateArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path manifest;
  std::filesystem::path out_dir;
  std::size_t size = 384;
  PostprocOptions post;
};

int cmd_fit_colormap(const FitColormapArgs& args, std::ostream& log);
int cmd_synth(const SynthArgs& args, std::ostream& log);
int cmd_train(const TrainArgs& args, std::ostream& log);
int cmd_infer(const InferArgs& args, std::ostream& log);
int cmd_eval(const EvalArgs& args, std::ostream& log);
/// Evaluates a model on a manifest with ms/eas in all four combinations and
/// the per-setting static baselines; writes ablation.csv and ablation.txt.
int cmd_ablate(const AblateArgs& args, std::ostream& log);

/// Loads mapping_<tag>.json files of `dir` for the non-daylight settings.
std::vector<PolyMapping> load_mappings(const std::filesystem::path& dir, const SettingSet& settings);

/// Writes text via a temporary file renamed into place.
void write_text_file(const std::filesystem::path& path, const std::string& content);

/// Exit status for an exception thrown by a command.
int exit_code_for(const std::exception& e);

}  // namespace awb
