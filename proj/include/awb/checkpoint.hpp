#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>

#include "awb/adam.hpp"
#include "awb/network.hpp"
#include "awb/tensor.hpp"
#include "awb/trainer.hpp"

namespace awb {

inline constexpr char kCheckpointMagic[] = "AWBS1";

/// Parameters, optimizer state and the configuration they were trained with.
struct Checkpoint {
  TrainConfig config;
  ParamStore<float> params;
  AdamState<float> adam;
  std::uint64_t epoch = 0;
  double best_loss = std::numeric_limits<double>::infinity();
};

/// Layout: "AWBS1", u64 little-endian header length, JSON header with the
/// configuration and a tensor table (name, shape, offset), then raw f32
/// little-endian payload. Written to a temporary file and renamed.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// FormatError on a wrong magic, bad header or truncated payload.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// ConfigError naming the first tensor whose shape differs from what
/// `config` would create (or that is missing/unexpected).
void check_params_match(const ParamStore<float>& params, const NetworkConfig& config);

}  // namespace awb
