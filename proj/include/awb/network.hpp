#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "awb/blend.hpp"
#include "awb/tensor.hpp"
#include "awb/wb_setting.hpp"

namespace awb {

/// Architecture of the weighting-map predictor.
///
/// Layout: a strided conv backbone pools the 3K-channel render stack into z;
/// a 5-layer MLP maps z to the style code w; one head + projection per
/// encoder level turns w into that level's AdaIN (gamma, beta). The encoder
/// is five residual blocks (AdaIN after the first conv, stride-2 conv
/// between levels) whose outputs feed a mirrored decoder through skips.
struct NetworkConfig {
  SettingSet settings = settings_tds();
  std::vector<std::size_t> enc_channels{16, 32, 64, 64, 64};
  std::vector<std::size_t> backbone_channels{16, 32, 64};
  std::size_t style_dim = 128;
  std::size_t head_dim = 128;
  std::size_t mlp_layers = 5;
  std::size_t levels = 5;
  /// When > 0 the backbone is dropped and z is supplied externally with
  /// this many features.
  std::size_t external_z_dim = 0;
  double slope = 0.2;

  std::size_t num_settings() const { return settings.size(); }
  /// Input spatial dims must be a multiple of this (4 exact halvings).
  std::size_t size_multiple() const { return std::size_t{1} << (levels - 1); }
  void validate() const;

  /// Small widths for CPU training and gradient checks.
  static NetworkConfig tiny(SettingSet settings = settings_tds());

  bool operator==(const NetworkConfig&) const = default;
};

template <typename T>
struct AffineParams {
  std::vector<Tensor<T>> gamma;  // per level, N×C_i
  std::vector<Tensor<T>> beta;
};

template <typename T>
struct EncoderOutput {
  Tensor<T> latent;
  std::vector<Tensor<T>> skips;  // level 1 (full res) .. level 5
};

/// How each encoder AdaIN obtains its (gamma, beta).
enum class NormMode {
  affine,      // from the style heads (normal operation)
  self_stats,  // gamma = sigma(h), beta = mu(h): AdaIN reduces to identity
  none,        // AdaIN skipped (reference residual path)
};

template <typename T>
ParamStore<T> init_params(const NetworkConfig& config, std::uint64_t seed);

template <typename T>
Tensor<T> backbone_features(const Tensor<T>& stack, const ParamStore<T>& params, const NetworkConfig& config);

template <typename T>
Tensor<T> style_extract(const Tensor<T>& z, const ParamStore<T>& params, const NetworkConfig& config);

/// level is 1-based.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> head_project(const Tensor<T>& w, std::size_t level, const ParamStore<T>& params,
                                             const NetworkConfig& config);

template <typename T>
AffineParams<T> affine_params(const Tensor<T>& w, const ParamStore<T>& params, const NetworkConfig& config);

template <typename T>
EncoderOutput<T> encode(const Tensor<T>& stack, const AffineParams<T>& affine, const ParamStore<T>& params,
                        const NetworkConfig& config, NormMode mode = NormMode::affine);

template <typename T>
Tensor<T> decode(const Tensor<T>& latent, const std::vector<Tensor<T>>& skips, const ParamStore<T>& params,
                 const NetworkConfig& config);

/// Raw (unclamped) maps N×K×H×W from an N×3K×H×W stack. z overrides the
/// backbone when given (required when config.external_z_dim > 0).
template <typename T>
Tensor<T> forward_maps(const Tensor<T>& stack, const ParamStore<T>& params, const NetworkConfig& config,
                       const Tensor<T>& z = Tensor<T>());

/// Renders must match config.settings exactly (canonical order).
template <typename T>
WeightMaps forward(const RenderedSet& renders, const ParamStore<T>& params, const NetworkConfig& config);

/// Reads JSON lines {"image_id": ..., "z": [...]}.
std::map<std::string, std::vector<float>> load_z_file(const std::filesystem::path& path);

}  // namespace awb
