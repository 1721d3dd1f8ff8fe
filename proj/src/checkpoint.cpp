#include "awb/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "awb/config.hpp"
#include "awb/errors.hpp"

namespace awb {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kMagicLen = 5;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  json table = json::array();
  std::string payload;
  std::size_t offset = 0;
  auto add = [&](const std::string& name, const Shape& shape, const std::vector<float>& values) {
    table.push_back({{"name", name}, {"shape", shape}, {"offset", offset}});
    for (float v : values) put_u32(payload, std::bit_cast<std::uint32_t>(v));
    offset += values.size() * 4;
  };
  for (const auto& [name, t] : ckpt.params) add(name, t.shape(), t.values());
  for (const auto& [name, mom] : ckpt.adam.moments) {
    const Shape& shape = ckpt.params.at(name).shape();
    add("adam.m/" + name, shape, mom.m);
    add("adam.v/" + name, shape, mom.v);
  }
  json header;
  header["format"] = kCheckpointMagic;
  header["dtype"] = "f32le";
  header["config"] = to_json(ckpt.config);
  header["adam_step"] = ckpt.adam.step;
  header["epoch"] = ckpt.epoch;
  header["best_loss"] = std::isfinite(ckpt.best_loss) ? json(ckpt.best_loss) : json(nullptr);
  header["tensors"] = table;
  const std::string h = header.dump();

  std::string out(kCheckpointMagic, kMagicLen);
  put_u64(out, h.size());
  out += h;
  out += payload;

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw DataError("cannot write checkpoint '" + tmp.string() + "'");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("failed writing checkpoint '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const std::string where = "checkpoint '" + path.string() + "'";
  if (bytes.size() < kMagicLen + 8 || bytes.compare(0, kMagicLen, kCheckpointMagic) != 0) {
    throw FormatError(where + ": bad magic (not an AWBS1 file)");
  }
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint64_t hlen = get_u64(raw + kMagicLen);
  const std::size_t payload_start = kMagicLen + 8 + hlen;
  if (hlen > bytes.size() || payload_start > bytes.size()) throw FormatError(where + ": truncated header");
  json header;
  try {
    header = json::parse(bytes.substr(kMagicLen + 8, hlen));
  } catch (const json::exception& e) {
    throw FormatError(where + ": bad header: " + e.what());
  }
  Checkpoint ck;
  try {
    if (header.at("dtype").get<std::string>() != "f32le") throw FormatError(where + ": unsupported dtype");
    from_json(header.at("config"), ck.config);
    ck.adam.step = header.at("adam_step").get<std::uint64_t>();
    ck.epoch = header.at("epoch").get<std::uint64_t>();
    if (!header.at("best_loss").is_null()) ck.best_loss = header.at("best_loss").get<double>();
    const std::size_t payload = bytes.size() - payload_start;
    for (const auto& e : header.at("tensors")) {
      const auto name = e.at("name").get<std::string>();
      const auto shape = e.at("shape").get<Shape>();
      const auto offset = e.at("offset").get<std::size_t>();
      const std::size_t n = shape_numel(shape);
      if (offset > payload || n * 4 > payload - offset) {
        throw FormatError(where + ": truncated payload at tensor '" + name + "'");
      }
      std::vector<float> v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = std::bit_cast<float>(get_u32(raw + payload_start + offset + 4 * i));
      if (name.rfind("adam.m/", 0) == 0) {
        ck.adam.moments[name.substr(7)].m = std::move(v);
      } else if (name.rfind("adam.v/", 0) == 0) {
        ck.adam.moments[name.substr(7)].v = std::move(v);
      } else {
        ck.params.add(name, Tensor<float>(shape, std::move(v))).set_requires_grad(true);
      }
    }
  } catch (const json::exception& e) {
    throw FormatError(where + ": bad header: " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(where + ": bad config: " + e.what());
  }
  for (const auto& [name, mom] : ck.adam.moments) {
    if (!ck.params.contains(name) || mom.m.size() != ck.params.at(name).numel() ||
        mom.v.size() != ck.params.at(name).numel()) {
      throw FormatError(where + ": optimizer state for '" + name + "' does not match the parameters");
    }
  }
  return ck;
}

void check_params_match(const ParamStore<float>& params, const NetworkConfig& config) {
  const auto expected = init_params<float>(config, 0);
  for (const auto& [name, t] : expected) {
    if (!params.contains(name)) throw ConfigError("checkpoint is missing tensor '" + name + "'");
    const auto& have = params.at(name).shape();
    if (have != t.shape()) {
      throw ConfigError("tensor '" + name + "' has shape " + shape_str(have) + " but the configuration (" +
                        std::to_string(config.num_settings()) + " settings) expects " + shape_str(t.shape()));
    }
  }
  for (const auto& [name, _] : params) {
    if (!expected.contains(name)) throw ConfigError("checkpoint has unexpected tensor '" + name + "'");
  }
}

}  // namespace awb
