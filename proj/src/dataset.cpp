#include "awb/dataset.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"

#include "awb/errors.hpp"

namespace awb {

namespace fs = std::filesystem;

DatasetManifest DatasetManifest::load(const fs::path& path, const SettingSet& settings) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open manifest '" + path.string() + "'");
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path q(p);
    return q.is_absolute() ? q : base / q;
  };
  DatasetManifest m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ManifestRecord r;
    try {
      auto j = nlohmann::json::parse(line);
      r.id = j.at("id").get<std::string>();
      for (auto& [key, val] : j.at("inputs").items()) {
        if (key.size() != 1) throw DataError("manifest line " + std::to_string(lineno) + ": bad setting '" + key + "'");
        r.inputs[setting_from_tag(key[0])] = resolve(val.get<std::string>());
      }
      r.gt = resolve(j.at("gt").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError("manifest '" + path.string() + "' line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw DataError("manifest '" + path.string() + "' line " + std::to_string(lineno) + ": " + e.what());
    }
    for (WbSetting s : settings) {
      auto it = r.inputs.find(s);
      if (it == r.inputs.end()) {
        throw DataError("manifest record '" + r.id + "' has no '" + std::string(1, tag(s)) + "' input");
      }
      if (!fs::exists(it->second)) throw DataError("manifest record '" + r.id + "': missing file '" + it->second.string() + "'");
    }
    if (!fs::exists(r.gt)) throw DataError("manifest record '" + r.id + "': missing file '" + r.gt.string() + "'");
    m.records.push_back(std::move(r));
  }
  if (m.records.empty()) throw DataError("manifest '" + path.string() + "' has no records");
  return m;
}

void DatasetManifest::save(const fs::path& path) const {
  const fs::path base = path.parent_path();
  auto rel = [&](const fs::path& p) { return base.empty() ? p.generic_string() : p.lexically_relative(base).generic_string(); };
  std::ostringstream os;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
    for (const auto& [s, p] : r.inputs) inputs[std::string(1, tag(s))] = rel(p);
    j["inputs"] = inputs;
    j["gt"] = rel(r.gt);
    os << j.dump() << '\n';
  }
  if (!base.empty()) fs::create_directories(base);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw DataError("cannot write manifest '" + tmp.string() + "'");
    f << os.str();
  }
  fs::rename(tmp, path);
}

std::vector<Scene> load_scenes(const DatasetManifest& manifest, const SettingSet& settings) {
  validate_settings(settings);
  std::vector<Scene> out;
  for (const auto& r : manifest.records) {
    Scene s;
    s.id = r.id;
    for (WbSetting w : settings) s.renders.entries.emplace_back(w, read_png(r.inputs.at(w)));
    s.gt = read_png(r.gt);
    s.renders.validate();
    if (s.gt.height() != s.renders.height() || s.gt.width() != s.renders.width()) {
      throw DataError("scene '" + r.id + "': ground truth and renders differ in size");
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

struct Crop {
  const Scene* scene;
  std::size_t y0, x0;
};

PatchBatch crop_batch(const std::vector<Crop>& crops, const SettingSet& settings, std::size_t p) {
  const std::size_t k = settings.size();
  const std::size_t plane = p * p;
  const std::size_t batch = crops.size();
  PatchBatch b;
  std::vector<float> gt(batch * 3 * plane);
  std::vector<float> in(batch * 3 * k * plane);
  for (std::size_t n = 0; n < batch; ++n) {
    const Scene& s = *crops[n].scene;
    const std::size_t y0 = crops[n].y0, x0 = crops[n].x0;
    b.ids.push_back(s.id);
    b.offsets.emplace_back(y0, x0);
    auto copy = [&](const ImageRGB& img, float* dst) {
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < p; ++y)
          for (std::size_t x = 0; x < p; ++x) dst[(c * p + y) * p + x] = img.at(y0 + y, x0 + x, c);
    };
    copy(s.gt, gt.data() + n * 3 * plane);
    for (std::size_t i = 0; i < k; ++i) copy(s.renders.at(settings[i]), in.data() + (n * 3 * k + 3 * i) * plane);
  }
  b.gt = Tensor<float>({batch, 3, p, p}, std::move(gt));
  b.inputs = Tensor<float>({batch, 3 * k, p, p}, std::move(in));
  return b;
}

}  // namespace

PatchBatch sample_patches(const std::vector<Scene>& scenes, const SettingSet& settings, std::size_t p,
                          std::size_t batch, Rng& rng) {
  if (p == 0 || batch == 0) throw ConfigError("sample_patches: patch size and batch must be positive");
  std::vector<const Scene*> usable;
  for (const auto& s : scenes) {
    if (s.gt.height() >= p && s.gt.width() >= p) {
      usable.push_back(&s);
    } else {
      std::cerr << "warning: scene '" << s.id << "' is smaller than the " << p << "px patch; skipped\n";
    }
  }
  if (usable.empty()) throw DataError("sample_patches: no scene is at least " + std::to_string(p) + "px");

  std::vector<Crop> crops;
  for (std::size_t n = 0; n < batch; ++n) {
    const Scene& s = *usable[rng.below(usable.size())];
    const std::size_t y0 = rng.below(s.gt.height() - p + 1);
    const std::size_t x0 = rng.below(s.gt.width() - p + 1);
    crops.push_back({&s, y0, x0});
  }
  return crop_batch(crops, settings, p);
}

PatchBatch fixed_patches(const std::vector<Scene>& scenes, const SettingSet& settings, std::size_t p) {
  if (p == 0 || scenes.empty()) throw ConfigError("fixed_patches: need scenes and a positive patch size");
  std::vector<Crop> crops;
  for (const auto& s : scenes) {
    if (s.gt.height() < p || s.gt.width() < p) {
      throw DataError("fixed_patches: scene '" + s.id + "' is smaller than " + std::to_string(p) + "px");
    }
    crops.push_back({&s, 0, 0});
  }
  return crop_batch(crops, settings, p);
}

}  // namespace awb
