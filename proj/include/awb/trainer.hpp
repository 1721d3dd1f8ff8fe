#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "awb/adam.hpp"
#include "awb/dataset.hpp"
#include "awb/losses.hpp"
#include "awb/network.hpp"

namespace awb {

struct TrainConfig {
  NetworkConfig network;
  std::size_t patch_size = 64;
  std::size_t batch = 32;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 0.0;
  double lambda = kDefaultLambda;
  std::size_t epochs = 20;
  /// 0 means ceil(scenes / batch).
  std::size_t steps_per_epoch = 0;
  /// Stops after this many optimizer steps in total; 0 means no cap.
  std::size_t max_steps = 0;
  std::uint64_t seed = 0;

  void validate() const;
  AdamOptions adam() const { return {lr, beta1, beta2, adam_eps, clip_norm}; }
  bool operator==(const TrainConfig&) const = default;
};

struct TrainOptions {
  /// Continue from this checkpoint (config must match).
  std::optional<std::filesystem::path> resume;
  /// Print one progress line every this many steps; 0 is silent.
  std::size_t log_every = 0;
};

struct TrainResult {
  std::filesystem::path last_checkpoint;
  std::filesystem::path best_checkpoint;  // empty when no epoch completed
  std::filesystem::path curve;
  std::vector<LossBreakdown> losses;  // one per step run in this call
  std::uint64_t step = 0;             // optimizer steps taken in total
};

/// Loss of the batch drawn for optimizer step `step` (0-based), evaluated
/// without updating anything.
LossBreakdown evaluate_step_loss(const TrainConfig& config, const ParamStore<float>& params,
                                 const std::vector<Scene>& scenes, std::uint64_t step);

/// One forward/backward/Adam update on a fixed batch; returns the loss
/// before the update.
LossBreakdown train_step(const TrainConfig& config, ParamStore<float>& params, AdamState<float>& adam,
                         const PatchBatch& batch);

/// Batch sampling stream for a given step; independent of history so that
/// resumed runs see the same batches.
Rng batch_rng(std::uint64_t seed, std::uint64_t step);

TrainResult train(const TrainConfig& config, const std::vector<Scene>& scenes, const std::filesystem::path& out_dir,
                  const TrainOptions& options = {});

}  // namespace awb
