#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "awb/network.hpp"
#include "awb/postproc.hpp"
#include "awb/trainer.hpp"

namespace awb {

inline constexpr std::size_t kDefaultInferenceSize = 384;

struct InferenceConfig {
  std::size_t size = kDefaultInferenceSize;
  PostprocOptions post;
  bool operator==(const InferenceConfig&) const = default;
};

struct PathsConfig {
  std::string manifest;
  std::string out_dir;
  std::string checkpoint;
  std::string mappings_dir;
  bool operator==(const PathsConfig&) const = default;
};

/// Everything the CLI needs. `train.network.settings` is the setting set.
struct AppConfig {
  TrainConfig train;
  InferenceConfig inference;
  PathsConfig paths;
  int threads = 1;

  void validate() const;
  const SettingSet& settings() const { return train.network.settings; }
  bool operator==(const AppConfig&) const = default;
};

nlohmann::json to_json(const NetworkConfig& c);
nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const PostprocOptions& o);
nlohmann::json to_json(const AppConfig& c);

/// Strict readers: unknown keys raise ConfigError, missing keys keep the
/// value already in `out`.
void from_json(const nlohmann::json& j, NetworkConfig& out);
void from_json(const nlohmann::json& j, TrainConfig& out);
void from_json(const nlohmann::json& j, PostprocOptions& out);
void from_json(const nlohmann::json& j, AppConfig& out);

AppConfig load_app_config(const std::filesystem::path& path);

}  // namespace awb
