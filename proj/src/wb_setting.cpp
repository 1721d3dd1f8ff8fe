#include "awb/wb_setting.hpp"

#include <algorithm>

#include "awb/errors.hpp"

namespace awb {

char tag(WbSetting s) {
  switch (s) {
    case WbSetting::tungsten: return 't';
    case WbSetting::fluorescent: return 'f';
    case WbSetting::daylight: return 'd';
    case WbSetting::cloudy: return 'c';
    case WbSetting::shade: return 's';
  }
  return '?';
}

int kelvin(WbSetting s) {
  switch (s) {
    case WbSetting::tungsten: return 2850;
    case WbSetting::fluorescent: return 3800;
    case WbSetting::daylight: return 5500;
    case WbSetting::cloudy: return 6500;
    case WbSetting::shade: return 7500;
  }
  return 0;
}

std::size_t canonical_index(WbSetting s) { return static_cast<std::size_t>(s); }

WbSetting setting_from_tag(char t) {
  for (auto s : kAllSettings) {
    if (tag(s) == t) return s;
  }
  throw ConfigError(std::string("unknown WB setting tag '") + t + "'");
}

SettingSet parse_settings(std::string_view spec) {
  SettingSet out;
  for (char ch : spec) {
    if (ch == ',' || ch == ' ' || ch == '{' || ch == '}') continue;
    out.push_back(setting_from_tag(ch));
  }
  std::sort(out.begin(), out.end());
  validate_settings(out);
  return out;
}

std::string settings_string(const SettingSet& set) {
  std::string s;
  for (auto v : set) s.push_back(tag(v));
  return s;
}

void validate_settings(const SettingSet& set) {
  if (set.size() < 2) throw ConfigError("a setting set needs at least two WB settings");
  for (std::size_t i = 1; i < set.size(); ++i) {
    if (set[i] == set[i - 1]) throw ConfigError(std::string("duplicate WB setting '") + tag(set[i]) + "'");
    if (set[i] < set[i - 1]) throw ConfigError("WB settings not in canonical order t,f,d,c,s");
  }
}

}  // namespace awb
