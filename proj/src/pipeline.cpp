#include "awb/pipeline.hpp"

#include <algorithm>

#include "awb/checkpoint.hpp"
#include "awb/errors.hpp"

namespace awb {

Model load_model(const std::filesystem::path& checkpoint) {
  Checkpoint ck = load_checkpoint(checkpoint);
  check_params_match(ck.params, ck.config.network);
  return Model{ck.config.network, std::move(ck.params)};
}

RenderedSet render_full(const ImageRGB& init, const std::vector<PolyMapping>& mappings, const SettingSet& settings) {
  validate_settings(settings);
  RenderedSet out;
  for (WbSetting s : settings) {
    auto it = std::find_if(mappings.begin(), mappings.end(), [s](const PolyMapping& m) { return m.setting == s; });
    if (it != mappings.end()) {
      out.entries.emplace_back(s, apply_mapping(*it, init));
    } else if (s == WbSetting::daylight) {
      out.entries.emplace_back(s, clamp01(init));
    } else {
      throw ConfigError(std::string("no mapping for setting '") + tag(s) + "'");
    }
  }
  return out;
}

namespace {

WeightMaps one_hot_maps(const SettingSet& settings, WbSetting chosen, std::size_t h, std::size_t w) {
  if (std::find(settings.begin(), settings.end(), chosen) == settings.end()) {
    throw ConfigError(std::string("one-hot setting '") + tag(chosen) + "' is not among " + settings_string(settings));
  }
  WeightMaps m;
  for (WbSetting s : settings) m.entries.emplace_back(s, Plane(h, w, s == chosen ? 1.0f : 0.0f));
  return m;
}

const ImageRGB& guide_of(const RenderedSet& set) {
  for (const auto& [s, img] : set.entries)
    if (s == WbSetting::daylight) return img;
  return set.entries.front().second;
}

InferenceResult run(const RenderedSet& small, const RenderedSet& full, const Model& model,
                    const InferenceOptions& options) {
  InferenceResult res;
  res.trace.push_back("render-small");
  const SettingSet settings = model.config.settings;
  if (full.settings() != settings) {
    throw ConfigError("renders carry settings " + settings_string(full.settings()) + " but the model expects " +
                      settings_string(settings));
  }
  MapPredictor predict = [&](const RenderedSet& r) { return forward(r, model.params, model.config); };
  if (options.one_hot) {
    predict = [&](const RenderedSet& r) { return one_hot_maps(settings, *options.one_hot, r.height(), r.width()); };
  }
  WeightMaps maps = predict(small);
  res.trace.push_back("forward");
  maps = apply_postproc(maps, small, guide_of(small), options.post, predict, &res.trace,
                        model.config.size_multiple());
  maps = resize(maps, full.height(), full.width());
  res.trace.push_back("resize");
  res.maps = clamp_maps(std::move(maps));
  res.trace.push_back("clamp");
  res.corrected = blend(res.maps, full);
  res.trace.push_back("blend");
  return res;
}

}  // namespace

InferenceResult infer_renders(const RenderedSet& full, const Model& model, const InferenceOptions& options) {
  full.validate();
  return run(resize(full, options.size, options.size), full, model, options);
}

InferenceResult infer_image(const ImageRGB& init, const std::vector<PolyMapping>& mappings, const Model& model,
                            const InferenceOptions& options) {
  RenderedSet small = render_wb_set(init, mappings, model.config.settings, options.size);
  RenderedSet full = render_full(init, mappings, model.config.settings);
  return run(small, full, model, options);
}

}  // namespace awb
