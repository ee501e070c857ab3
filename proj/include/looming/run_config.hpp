#pragma once

// Pipeline configuration shared by the command-line driver. Settings come
// from a flat `key=value` file and from flags; flags win.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "looming/errors.hpp"
#include "looming/geometry.hpp"
#include "looming/io.hpp"
#include "looming/looming_map.hpp"
#include "looming/range_image.hpp"

namespace looming {

struct RunConfig {
  GridSpec grid;
  double dt = 0.1;
  ThreatThresholds thresholds;
  double clamp = kDefaultClamp;
  std::size_t fill = 0;
  std::size_t decimate_theta = 1;
  std::size_t decimate_phi = 1;
  io::ColorScale scale;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::size_t edge = 1;
  std::optional<Vec3> velocity;

  LoomOptions loom_options() const { return {clamp, kDefaultMaxRange}; }
};

/// Keys accepted in config files; each matches the long flag of the same name.
inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {"grid",     "phi-span", "dt",   "thresholds", "clamp",
                                                "fill",     "decimate", "scale", "noise",     "seed",
                                                "edge",     "velocity"};
  return keys;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  while (true) {
    const std::size_t k = s.find(sep);
    out.push_back(trim(s.substr(0, k)));
    if (k == std::string_view::npos) break;
    s.remove_prefix(k + 1);
  }
  return out;
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw InvalidInput("config '" + std::string(key) + "': bad number '" + std::string(text) + "'");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(v)) throw InvalidInput("config '" + std::string(key) + "': value must be finite");
  }
  return v;
}

template <typename T>
std::vector<T> parse_list(std::string_view key, std::string_view text, char sep, std::size_t n) {
  const auto parts = split(text, sep);
  if (parts.size() != n) {
    throw InvalidInput("config '" + std::string(key) + "': expected " + std::to_string(n) + " values");
  }
  std::vector<T> out;
  for (auto p : parts) out.push_back(parse_number<T>(key, p));
  return out;
}

}  // namespace detail

/// Applies one setting. Values use the same syntax as the flags:
/// grid=WxH, phi-span=MIN,MAX (degrees), thresholds=L1,L2,L3,
/// decimate=A,B, velocity=X,Y,Z; the rest are scalars.
inline void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  using detail::parse_list;
  using detail::parse_number;
  value = detail::trim(value);
  if (key == "grid") {
    const auto wh = parse_list<std::size_t>(key, value, 'x', 2);
    cfg.grid.width = wh[0];
    cfg.grid.height = wh[1];
  } else if (key == "phi-span") {
    const auto span = parse_list<double>(key, value, ',', 2);
    cfg.grid.phi_min = deg_to_rad(span[0]);
    cfg.grid.phi_max = deg_to_rad(span[1]);
  } else if (key == "dt") {
    cfg.dt = parse_number<double>(key, value);
  } else if (key == "thresholds") {
    const auto th = parse_list<double>(key, value, ',', 3);
    cfg.thresholds = {th[0], th[1], th[2]};
  } else if (key == "clamp") {
    cfg.clamp = parse_number<double>(key, value);
  } else if (key == "fill") {
    cfg.fill = parse_number<std::size_t>(key, value);
  } else if (key == "decimate") {
    const auto f = parse_list<std::size_t>(key, value, ',', 2);
    cfg.decimate_theta = f[0];
    cfg.decimate_phi = f[1];
  } else if (key == "scale") {
    cfg.scale.saturation = parse_number<double>(key, value);
  } else if (key == "noise") {
    cfg.noise = parse_number<double>(key, value);
  } else if (key == "seed") {
    cfg.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "edge") {
    cfg.edge = parse_number<std::size_t>(key, value);
  } else if (key == "velocity") {
    const auto v = parse_list<double>(key, value, ',', 3);
    cfg.velocity = Vec3{v[0], v[1], v[2]};
  } else {
    throw InvalidInput("unknown config key '" + std::string(key) + "'");
  }
}

/// Re-checks every constraint the downstream modules impose.
inline void validate(const RunConfig& cfg) {
  if (!cfg.grid.valid()) throw InvalidInput("config: grid needs width, height >= 2 and phi-span min < max");
  if (!(cfg.dt > 0.0)) throw InvalidInput("config: dt must be positive");
  if (!cfg.thresholds.valid()) throw InvalidInput("config: thresholds must satisfy L3 > L2 > L1 > 0");
  if (!(cfg.clamp > 0.0)) throw InvalidInput("config: clamp must be positive");
  if (cfg.decimate_theta == 0 || cfg.decimate_phi == 0 || cfg.grid.width % cfg.decimate_theta != 0 ||
      cfg.grid.height % cfg.decimate_phi != 0) {
    throw InvalidInput("config: decimation factors must be >= 1 and divide the grid");
  }
  if (!cfg.scale.valid()) throw InvalidInput("config: scale must be positive");
  if (!(cfg.noise >= 0.0)) throw InvalidInput("config: noise must be >= 0");
  if (cfg.velocity && !is_finite(*cfg.velocity)) throw InvalidInput("config: velocity must be finite");
}

/// Reads `key=value` lines; '#' starts a comment, blank lines are skipped.
inline std::map<std::string, std::string> parse_config(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string_view body = detail::trim(line);
    if (body.empty()) continue;
    const std::size_t eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("config line " + std::to_string(line_no) + ": expected key=value", line_no, true);
    }
    out[std::string(detail::trim(body.substr(0, eq)))] = std::string(detail::trim(body.substr(eq + 1)));
  }
  return out;
}

/// Builds a config from file settings overlaid with flag settings.
inline RunConfig make_config(const std::map<std::string, std::string>& file_settings,
                             const std::map<std::string, std::string>& flag_settings) {
  RunConfig cfg;
  for (const auto& [k, v] : file_settings) apply_setting(cfg, k, v);
  for (const auto& [k, v] : flag_settings) apply_setting(cfg, k, v);
  validate(cfg);
  return cfg;
}

}  // namespace looming
