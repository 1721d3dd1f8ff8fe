#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace awb {

/// Fixed white-balance presets in canonical (ascending temperature) order.
enum class WbSetting { tungsten, fluorescent, daylight, cloudy, shade };

inline constexpr std::array<WbSetting, 5> kAllSettings{WbSetting::tungsten, WbSetting::fluorescent,
                                                       WbSetting::daylight, WbSetting::cloudy,
                                                       WbSetting::shade};

char tag(WbSetting s);
int kelvin(WbSetting s);
std::size_t canonical_index(WbSetting s);
WbSetting setting_from_tag(char tag);

/// Settings sorted in canonical order, no duplicates, at least two.
using SettingSet = std::vector<WbSetting>;

/// Parses "tds", "t,d,s" or "tfdcs".
SettingSet parse_settings(std::string_view spec);
std::string settings_string(const SettingSet& set);
/// Throws ConfigError unless canonical, duplicate-free and of size >= 2.
void validate_settings(const SettingSet& set);

inline const SettingSet& settings_tds() {
  static const SettingSet s{WbSetting::tungsten, WbSetting::daylight, WbSetting::shade};
  return s;
}
inline const SettingSet& settings_tfdcs() {
  static const SettingSet s{kAllSettings.begin(), kAllSettings.end()};
  return s;
}

}  // namespace awb
