#include "awb/network.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

#include "awb/errors.hpp"
#include "awb/ops.hpp"
#include "awb/rng.hpp"

namespace awb {

void NetworkConfig::validate() const {
  validate_settings(settings);
  if (settings.size() != 3 && settings.size() != 5) {
    throw ConfigError("network: setting set must hold 3 or 5 WB settings, got " + settings_string(settings));
  }
  if (levels != 5) throw ConfigError("network: encoder must have 5 levels");
  if (mlp_layers != 5) throw ConfigError("network: style extractor must have 5 layers");
  if (enc_channels.size() != levels) throw ConfigError("network: enc_channels must list one width per level");
  for (auto c : enc_channels)
    if (c < 1) throw ConfigError("network: channel widths must be >= 1");
  if (external_z_dim == 0) {
    if (backbone_channels.empty()) throw ConfigError("network: backbone needs at least one conv");
    for (auto c : backbone_channels)
      if (c < 1) throw ConfigError("network: channel widths must be >= 1");
  }
  if (style_dim < 1 || head_dim < 1) throw ConfigError("network: style/head dims must be >= 1");
  if (!(slope >= 0.0 && slope < 1.0)) throw ConfigError("network: activation slope must lie in [0, 1)");
}

NetworkConfig NetworkConfig::tiny(SettingSet settings) {
  NetworkConfig c;
  c.settings = std::move(settings);
  c.enc_channels = {8, 12, 16, 16, 16};
  c.backbone_channels = {8, 16, 16};
  c.style_dim = 32;
  c.head_dim = 32;
  return c;
}

namespace {

std::string pname(const std::string& prefix, const char* leaf) { return prefix + "." + leaf; }

std::string level_name(const char* base, std::size_t level) { return base + std::to_string(level); }

// Kaiming-style uniform bound for leaky-ReLU networks.
std::vector<double> kaiming_uniform(Rng rng, std::size_t count, std::size_t fan_in, double slope) {
  const double bound = std::sqrt(6.0 / ((1.0 + slope * slope) * static_cast<double>(fan_in)));
  std::vector<double> v(count);
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return v;
}

template <typename T>
void add_layer(ParamStore<T>& store, const Rng& root, const std::string& prefix, Shape wshape, double slope,
               double scale = 1.0, double bias = 0.0) {
  std::size_t fan_in = 1;
  for (std::size_t i = 1; i < wshape.size(); ++i) fan_in *= wshape[i];
  const std::string wname = pname(prefix, "weight");
  auto vals = kaiming_uniform(root.split(wname), shape_numel(wshape), fan_in, slope);
  std::vector<T> tv(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) tv[i] = static_cast<T>(vals[i] * scale);
  const std::size_t out = wshape[0];
  store.add(wname, Tensor<T>(std::move(wshape), std::move(tv))).set_requires_grad(true);
  store.add(pname(prefix, "bias"), Tensor<T>({out}, static_cast<T>(bias))).set_requires_grad(true);
}

template <typename T>
Tensor<T> conv(const Tensor<T>& x, const ParamStore<T>& p, const std::string& prefix, int stride, int pad) {
  return conv2d(x, p.at(pname(prefix, "weight")), p.at(pname(prefix, "bias")), stride, pad);
}

template <typename T>
Tensor<T> fc(const Tensor<T>& x, const ParamStore<T>& p, const std::string& prefix) {
  return linear(x, p.at(pname(prefix, "weight")), p.at(pname(prefix, "bias")));
}

template <typename T>
Tensor<T> act(const Tensor<T>& x, const NetworkConfig& c) {
  return leaky_relu(x, static_cast<T>(c.slope));
}

void check_stack(const Shape& s, const NetworkConfig& config, const char* who) {
  if (s.size() != 4 || s[1] != 3 * config.num_settings()) {
    throw DimensionError(std::string(who) + ": expected N×" + std::to_string(3 * config.num_settings()) +
                         "×H×W stack, got " + shape_str(s));
  }
}

}  // namespace

template <typename T>
ParamStore<T> init_params(const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  const Rng root(seed);
  const double a = config.slope;
  const std::size_t in_c = 3 * config.num_settings();
  ParamStore<T> p;

  std::size_t z_dim = config.external_z_dim;
  if (z_dim == 0) {
    std::size_t c = in_c;
    for (std::size_t i = 0; i < config.backbone_channels.size(); ++i) {
      const std::size_t o = config.backbone_channels[i];
      add_layer(p, root, level_name("backbone.conv", i + 1), {o, c, 3, 3}, a);
      c = o;
    }
    z_dim = c;
  }
  std::size_t f = z_dim;
  for (std::size_t i = 0; i < config.mlp_layers; ++i) {
    add_layer(p, root, level_name("style.fc", i + 1), {config.style_dim, f}, a);
    f = config.style_dim;
  }
  for (std::size_t l = 1; l <= config.levels; ++l) {
    const std::string head = level_name("head", l);
    add_layer(p, root, head + ".hidden", {config.head_dim, config.style_dim}, a);
    add_layer(p, root, head + ".proj", {2 * config.enc_channels[l - 1], config.head_dim}, a);
  }
  std::size_t c = in_c;
  for (std::size_t l = 1; l <= config.levels; ++l) {
    const std::size_t o = config.enc_channels[l - 1];
    const std::string enc = level_name("enc", l);
    add_layer(p, root, enc + ".conv1", {o, c, 3, 3}, a);
    add_layer(p, root, enc + ".conv2", {o, o, 3, 3}, a);
    add_layer(p, root, enc + ".shortcut", {o, c, 1, 1}, a);
    add_layer(p, root, enc + ".down", {o, o, 3, 3}, a);
    c = o;
  }
  std::size_t cur = config.enc_channels.back();
  for (std::size_t l = config.levels; l >= 1; --l) {
    const std::size_t skip = config.enc_channels[l - 1];
    const std::size_t o = skip;
    const std::string dec = level_name("dec", l);
    add_layer(p, root, dec + ".conv1", {o, cur + skip, 3, 3}, a);
    add_layer(p, root, dec + ".conv2", {o, o, 3, 3}, a);
    add_layer(p, root, dec + ".shortcut", {o, cur + skip, 1, 1}, a);
    cur = o;
  }
  // Starts as an exact uniform blend of the renderings.
  add_layer(p, root, "out", {config.num_settings(), cur, 1, 1}, a, 0.0,
            1.0 / static_cast<double>(config.num_settings()));
  return p;
}

template <typename T>
Tensor<T> backbone_features(const Tensor<T>& stack, const ParamStore<T>& params, const NetworkConfig& config) {
  check_stack(stack.shape(), config, "backbone_features");
  if (config.external_z_dim > 0) throw ConfigError("backbone_features: network configured for external z");
  if (stack.dim(2) < 16 || stack.dim(3) < 16) {
    throw DimensionError("backbone_features: input must be at least 16×16, got " + shape_str(stack.shape()));
  }
  Tensor<T> x = stack;
  for (std::size_t i = 0; i < config.backbone_channels.size(); ++i) {
    x = act(conv(x, params, level_name("backbone.conv", i + 1), 2, 1), config);
  }
  return global_avg_pool(x);
}

template <typename T>
Tensor<T> style_extract(const Tensor<T>& z, const ParamStore<T>& params, const NetworkConfig& config) {
  Tensor<T> w = z;
  for (std::size_t i = 0; i < config.mlp_layers; ++i) w = act(fc(w, params, level_name("style.fc", i + 1)), config);
  return w;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> head_project(const Tensor<T>& w, std::size_t level, const ParamStore<T>& params,
                                             const NetworkConfig& config) {
  if (level < 1 || level > config.levels) {
    throw ConfigError("head_project: level " + std::to_string(level) + " outside 1.." +
                      std::to_string(config.levels));
  }
  const std::string head = level_name("head", level);
  const std::size_t c = config.enc_channels[level - 1];
  Tensor<T> h = act(fc(w, params, head + ".hidden"), config);
  Tensor<T> y = fc(h, params, head + ".proj");
  Tensor<T> gamma = add_scalar(softplus(slice_columns(y, 0, c)), T(0.1));
  Tensor<T> beta = slice_columns(y, c, c);
  return {gamma, beta};
}

template <typename T>
AffineParams<T> affine_params(const Tensor<T>& w, const ParamStore<T>& params, const NetworkConfig& config) {
  AffineParams<T> a;
  for (std::size_t l = 1; l <= config.levels; ++l) {
    auto [g, b] = head_project(w, l, params, config);
    a.gamma.push_back(g);
    a.beta.push_back(b);
  }
  return a;
}

template <typename T>
EncoderOutput<T> encode(const Tensor<T>& stack, const AffineParams<T>& affine, const ParamStore<T>& params,
                        const NetworkConfig& config, NormMode mode) {
  check_stack(stack.shape(), config, "encode");
  const std::size_t m = config.size_multiple();
  if (stack.dim(2) < m || stack.dim(3) < m || stack.dim(2) % m != 0 || stack.dim(3) % m != 0) {
    throw DimensionError("encode: spatial dims must be positive multiples of " + std::to_string(m) + ", got " +
                         shape_str(stack.shape()));
  }
  if (mode == NormMode::affine && (affine.gamma.size() != config.levels || affine.beta.size() != config.levels)) {
    throw DimensionError("encode: expected affine parameters for " + std::to_string(config.levels) + " levels");
  }
  EncoderOutput<T> out;
  Tensor<T> x = stack;
  for (std::size_t l = 1; l <= config.levels; ++l) {
    const std::string enc = level_name("enc", l);
    Tensor<T> h = conv(x, params, enc + ".conv1", 1, 1);
    switch (mode) {
      case NormMode::affine:
        h = adain(h, affine.gamma[l - 1], affine.beta[l - 1]);
        break;
      case NormMode::self_stats: {
        auto [mu, sigma] = instance_stats(h);
        h = adain(h, sigma, mu);
        break;
      }
      case NormMode::none:
        break;
    }
    h = act(h, config);
    h = conv(h, params, enc + ".conv2", 1, 1);
    Tensor<T> f = act(add(h, conv(x, params, enc + ".shortcut", 1, 0)), config);
    out.skips.push_back(f);
    x = act(conv(f, params, enc + ".down", 2, 1), config);
  }
  out.latent = x;
  return out;
}

template <typename T>
Tensor<T> decode(const Tensor<T>& latent, const std::vector<Tensor<T>>& skips, const ParamStore<T>& params,
                 const NetworkConfig& config) {
  if (skips.size() != config.levels) {
    throw DimensionError("decode: expected " + std::to_string(config.levels) + " skips, got " +
                         std::to_string(skips.size()));
  }
  Tensor<T> cur = latent;
  for (std::size_t l = config.levels; l >= 1; --l) {
    const Tensor<T>& skip = skips[l - 1];
    if (skip.rank() != 4 || skip.dim(1) != config.enc_channels[l - 1] || skip.dim(0) != cur.dim(0)) {
      throw DimensionError("decode: skip " + std::to_string(l) + " has shape " + shape_str(skip.shape()));
    }
    const std::string dec = level_name("dec", l);
    Tensor<T> u = concat_channels<T>({bilinear_resize(cur, skip.dim(2), skip.dim(3)), skip});
    Tensor<T> h = act(conv(u, params, dec + ".conv1", 1, 1), config);
    h = conv(h, params, dec + ".conv2", 1, 1);
    cur = act(add(h, conv(u, params, dec + ".shortcut", 1, 0)), config);
  }
  return conv(cur, params, "out", 1, 0);
}

template <typename T>
Tensor<T> forward_maps(const Tensor<T>& stack, const ParamStore<T>& params, const NetworkConfig& config,
                       const Tensor<T>& z) {
  Tensor<T> feat = z;
  if (!feat.defined()) {
    if (config.external_z_dim > 0) throw ConfigError("forward: network expects an external z vector");
    feat = backbone_features(stack, params, config);
  } else if (feat.rank() != 2 || feat.dim(0) != stack.dim(0)) {
    throw DimensionError("forward: z must be N×F, got " + shape_str(feat.shape()));
  }
  Tensor<T> w = style_extract(feat, params, config);
  auto affine = affine_params(w, params, config);
  auto enc = encode(stack, affine, params, config);
  return decode(enc.latent, enc.skips, params, config);
}

template <typename T>
WeightMaps forward(const RenderedSet& renders, const ParamStore<T>& params, const NetworkConfig& config) {
  renders.validate();
  if (renders.settings() != config.settings) {
    throw ConfigError("forward: renders carry settings " + settings_string(renders.settings()) +
                      " but the network expects " + settings_string(config.settings));
  }
  auto maps = forward_maps(stack_renders<T>(renders), params, config);
  return maps_from_tensor(maps, config.settings);
}

std::map<std::string, std::vector<float>> load_z_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open z file '" + path.string() + "'");
  std::map<std::string, std::vector<float>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out[j.at("image_id").get<std::string>()] = j.at("z").get<std::vector<float>>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("z file '" + path.string() + "' line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

#define AWB_INSTANTIATE_NET(T)                                                                                 \
  template ParamStore<T> init_params<T>(const NetworkConfig&, std::uint64_t);                                 \
  template Tensor<T> backbone_features(const Tensor<T>&, const ParamStore<T>&, const NetworkConfig&);         \
  template Tensor<T> style_extract(const Tensor<T>&, const ParamStore<T>&, const NetworkConfig&);             \
  template std::pair<Tensor<T>, Tensor<T>> head_project(const Tensor<T>&, std::size_t, const ParamStore<T>&,  \
                                                        const NetworkConfig&);                                \
  template AffineParams<T> affine_params(const Tensor<T>&, const ParamStore<T>&, const NetworkConfig&);       \
  template EncoderOutput<T> encode(const Tensor<T>&, const AffineParams<T>&, const ParamStore<T>&,            \
                                   const NetworkConfig&, NormMode);                                           \
  template Tensor<T> decode(const Tensor<T>&, const std::vector<Tensor<T>>&, const ParamStore<T>&,            \
                            const NetworkConfig&);                                                            \
  template Tensor<T> forward_maps(const Tensor<T>&, const ParamStore<T>&, const NetworkConfig&,               \
                                  const Tensor<T>&);                                                          \
  template WeightMaps forward<T>(const RenderedSet&, const ParamStore<T>&, const NetworkConfig&);

AWB_INSTANTIATE_NET(float)
AWB_INSTANTIATE_NET(double)

#undef AWB_INSTANTIATE_NET

}  // namespace awb
