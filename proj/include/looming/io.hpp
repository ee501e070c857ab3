#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "looming/errors.hpp"
#include "looming/geometry.hpp"
#include "looming/looming_map.hpp"
#include "looming/range_image.hpp"

namespace looming::io {

// ---------------------------------------------------------------------------
// Byte helpers. All binary payloads are little-endian regardless of host.

namespace detail {

inline void put_f32(std::string& out, float f) {
  const auto u = std::bit_cast<std::uint32_t>(f);
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((u >> (8 * k)) & 0xFFu));
}

inline float get_f32(std::string_view bytes, std::size_t offset) noexcept {
  std::uint32_t u = 0;
  for (int k = 0; k < 4; ++k) {
    u |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + k])) << (8 * k);
  }
  return std::bit_cast<float>(u);
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes through a temporary sibling and renames it into place so readers
/// never observe a partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "'");
  }
}

// ---------------------------------------------------------------------------
// KITTI Velodyne scans: packed records of four little-endian float32
// (x, y, z, reflectance).

inline constexpr std::size_t kVelodyneRecordBytes = 16;

struct VelodyneScan {
  PointCloud cloud;
  std::size_t records = 0;
  std::size_t dropped_nonfinite = 0;
};

inline VelodyneScan parse_velodyne(std::string_view bytes) {
  if (const std::size_t tail = bytes.size() % kVelodyneRecordBytes; tail != 0) {
    const std::size_t offset = bytes.size() - tail;
    throw ParseError("velodyne scan truncated: " + std::to_string(tail) + " trailing bytes at offset " +
                         std::to_string(offset),
                     offset, true);
  }
  VelodyneScan scan;
  scan.records = bytes.size() / kVelodyneRecordBytes;
  scan.cloud.points.reserve(scan.records);
  scan.cloud.intensity.reserve(scan.records);
  for (std::size_t i = 0; i < scan.records; ++i) {
    const std::size_t o = i * kVelodyneRecordBytes;
    const float x = detail::get_f32(bytes, o);
    const float y = detail::get_f32(bytes, o + 4);
    const float z = detail::get_f32(bytes, o + 8);
    const float refl = detail::get_f32(bytes, o + 12);
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z) || !std::isfinite(refl)) {
      ++scan.dropped_nonfinite;
      continue;
    }
    scan.cloud.points.push_back({x, y, z});
    scan.cloud.intensity.push_back(refl);
  }
  return scan;
}

inline VelodyneScan read_velodyne_bin(const std::filesystem::path& path) {
  return parse_velodyne(read_file(path));
}

/// Inverse of parse_velodyne. Coordinates are narrowed to float32; missing
/// intensities are written as 0.
inline std::string encode_velodyne(const PointCloud& cloud) {
  std::string out;
  out.reserve(cloud.points.size() * kVelodyneRecordBytes);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3& p = cloud.points[i];
    detail::put_f32(out, static_cast<float>(p.x));
    detail::put_f32(out, static_cast<float>(p.y));
    detail::put_f32(out, static_cast<float>(p.z));
    detail::put_f32(out, cloud.has_intensity() ? cloud.intensity[i] : 0.0f);
  }
  return out;
}

inline void write_velodyne_bin(const PointCloud& cloud, const std::filesystem::path& path) {
  write_file_atomic(path, encode_velodyne(cloud));
}

// ---------------------------------------------------------------------------
// Ego-motion CSV: `timestamp,vx,vy,vz` with '#' comments. Velocities are in
// the sensor frame.

struct EgoMotionRecord {
  double timestamp = 0.0;
  Vec3 t;
};

class EgoMotionTrack {
 public:
  EgoMotionTrack() = default;
  explicit EgoMotionTrack(std::vector<EgoMotionRecord> records) : records_(std::move(records)) {
    for (std::size_t i = 1; i < records_.size(); ++i) {
      if (!(records_[i].timestamp > records_[i - 1].timestamp)) {
        throw InvalidInput("ego motion: timestamps must be strictly increasing");
      }
    }
  }

  const std::vector<EgoMotionRecord>& records() const noexcept { return records_; }
  bool empty() const noexcept { return records_.empty(); }

  /// Piecewise-linear velocity; clamped to the first/last record outside
  /// the covered interval.
  Vec3 velocity_at(double time) const {
    if (records_.empty()) throw InvalidInput("ego motion: no records");
    if (time <= records_.front().timestamp) return records_.front().t;
    if (time >= records_.back().timestamp) return records_.back().t;
    const auto hi = std::upper_bound(records_.begin(), records_.end(), time,
                                     [](double v, const EgoMotionRecord& r) { return v < r.timestamp; });
    const auto lo = hi - 1;
    const double f = (time - lo->timestamp) / (hi->timestamp - lo->timestamp);
    return lo->t + (hi->t - lo->t) * f;
  }

 private:
  std::vector<EgoMotionRecord> records_;
};

inline EgoMotionTrack parse_ego_motion(std::istream& in) {
  std::vector<EgoMotionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    std::array<double, 4> v{};
    std::size_t field = 0;
    std::string_view rest(line);
    bool ok = true;
    while (ok) {
      const std::size_t comma = rest.find(',');
      std::string_view tok = rest.substr(0, comma);
      while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
      while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t' || tok.back() == '\r')) tok.remove_suffix(1);
      if (field >= v.size()) {
        ok = false;
        break;
      }
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v[field]);
      if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty() || !std::isfinite(v[field])) ok = false;
      ++field;
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!ok || field != v.size()) {
      throw ParseError("ego motion line " + std::to_string(line_no) + ": expected 'timestamp,vx,vy,vz'", line_no,
                       true);
    }
    if (!records.empty() && !(v[0] > records.back().timestamp)) {
      throw ParseError("ego motion line " + std::to_string(line_no) + ": timestamp not strictly increasing",
                       line_no, true);
    }
    records.push_back({v[0], {v[1], v[2], v[3]}});
  }
  return EgoMotionTrack(std::move(records));
}

inline EgoMotionTrack read_ego_motion(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return parse_ego_motion(in);
}

// ---------------------------------------------------------------------------
// PPM (P6, maxval 255) renderings. Image rows run from the highest elevation
// row at the top down to phi_min; columns follow azimuth from theta_min.

struct ColorScale {
  double saturation = 1.0;  // |L| mapping to full intensity, 1/s

  bool valid() const noexcept { return saturation > 0.0 && std::isfinite(saturation); }
};

using Rgb = std::array<std::uint8_t, 3>;

inline std::uint8_t quantize(double fraction) noexcept {
  const double x = std::min(std::max(fraction, 0.0), 1.0) * 255.0;
  return static_cast<std::uint8_t>(std::floor(x + 0.5));
}

/// Red for approaching (L > 0), blue for receding, black for EMPTY.
inline Rgb looming_color(double value, const ColorScale& scale) noexcept {
  if (value > 0.0) return {quantize(value / scale.saturation), 0, 0};
  if (value < 0.0) return {0, 0, quantize(-value / scale.saturation)};
  return {0, 0, 0};
}

inline constexpr std::array<Rgb, 4> kThreatPalette = {{
    {0, 0, 0},      // None
    {255, 255, 0},  // Low
    {255, 165, 0},  // Medium
    {255, 0, 0},    // High
}};

namespace detail {

template <typename PixelFn>
std::string encode_ppm(const GridSpec& spec, PixelFn&& pixel) {
  std::string out = "P6\n" + std::to_string(spec.width) + " " + std::to_string(spec.height) + "\n255\n";
  out.reserve(out.size() + spec.cell_count() * 3);
  for (std::size_t k = 0; k < spec.height; ++k) {
    const std::size_t row = spec.height - 1 - k;
    for (std::size_t col = 0; col < spec.width; ++col) {
      const Rgb c = pixel(row * spec.width + col);
      out.append(reinterpret_cast<const char*>(c.data()), 3);
    }
  }
  return out;
}

}  // namespace detail

inline std::string encode_looming_ppm(const LoomingMap& map, const ColorScale& scale) {
  if (!scale.valid()) throw InvalidInput("color scale saturation must be positive");
  return detail::encode_ppm(map.spec, [&](std::size_t i) -> Rgb {
    return map.valid(i) ? looming_color(map.values[i], scale) : Rgb{0, 0, 0};
  });
}

inline void write_looming_ppm(const LoomingMap& map, const ColorScale& scale, const std::filesystem::path& path) {
  write_file_atomic(path, encode_looming_ppm(map, scale));
}

inline std::string encode_threat_ppm(const ThreatMap& map) {
  return detail::encode_ppm(map.spec, [&](std::size_t i) { return kThreatPalette[static_cast<std::size_t>(map.classes[i])]; });
}

inline void write_threat_ppm(const ThreatMap& map, const std::filesystem::path& path) {
  write_file_atomic(path, encode_threat_ppm(map));
}

struct PpmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<Rgb> pixels;  // top row first
};

inline PpmImage decode_ppm(std::string_view bytes) {
  std::size_t pos = 0;
  const auto token = [&]() -> std::string_view {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
  };
  const auto number = [&](const char* what) {
    const std::string_view t = token();
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
      throw ParseError(std::string("ppm: bad ") + what, pos, true);
    }
    return v;
  };
  if (token() != "P6") throw FormatError("ppm: expected magic \"P6\"", 0, true);
  PpmImage img;
  img.width = number("width");
  img.height = number("height");
  if (number("maxval") != 255) throw FormatError("ppm: only maxval 255 is supported", pos, true);
  ++pos;  // single whitespace before the raster
  const std::size_t need = img.width * img.height * 3;
  if (pos > bytes.size() || bytes.size() - pos != need) {
    throw ParseError("ppm: raster has " + std::to_string(pos > bytes.size() ? 0 : bytes.size() - pos) +
                         " bytes, expected " + std::to_string(need),
                     pos, true);
  }
  img.pixels.resize(img.width * img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    for (std::size_t k = 0; k < 3; ++k) img.pixels[i][k] = static_cast<std::uint8_t>(bytes[pos + 3 * i + k]);
  }
  return img;
}

/// Recovers threat classes (grid order) from a threat PPM.
inline std::vector<ThreatLevel> decode_threat_ppm(std::string_view bytes) {
  const PpmImage img = decode_ppm(bytes);
  std::vector<ThreatLevel> classes(img.pixels.size());
  for (std::size_t k = 0; k < img.height; ++k) {
    const std::size_t row = img.height - 1 - k;
    for (std::size_t col = 0; col < img.width; ++col) {
      const Rgb& px = img.pixels[k * img.width + col];
      const auto it = std::find(kThreatPalette.begin(), kThreatPalette.end(), px);
      if (it == kThreatPalette.end()) throw ParseError("threat ppm: pixel outside the threat palette");
      classes[row * img.width + col] = static_cast<ThreatLevel>(it - kThreatPalette.begin());
    }
  }
  return classes;
}

// ---------------------------------------------------------------------------
// RGRID / LGRID v1: one ASCII header line
//   <MAGIC> 1 <width> <height> <theta_min> <theta_max> <phi_min> <phi_max> <timestamp>\n
// then width*height little-endian float32 cells, row-major with elevation
// rows outermost. RGRID stores EMPTY as -1. LGRID stores EMPTY values as 0
// and appends a width*height byte mask (0 = EMPTY, 1 = VALID).

inline constexpr int kGridVersion = 1;
inline constexpr float kEmptyRange = -1.0f;

struct GridHeader {
  GridSpec spec;
  double timestamp = 0.0;
  std::size_t payload_offset = 0;
};

namespace detail {

inline std::string grid_header(std::string_view magic, const GridSpec& spec, double timestamp) {
  std::string h(magic);
  h += " " + std::to_string(kGridVersion) + " " + std::to_string(spec.width) + " " + std::to_string(spec.height);
  for (double v : {spec.theta_min, spec.theta_max, spec.phi_min, spec.phi_max, timestamp}) h += " " + format_double(v);
  h += "\n";
  return h;
}

inline GridHeader parse_grid_header(std::string_view bytes, std::string_view magic) {
  const std::size_t eol = bytes.find('\n');
  if (bytes.substr(0, std::min(bytes.size(), magic.size() + 1)) != std::string(magic) + " ") {
    throw FormatError("grid file: expected magic \"" + std::string(magic) + "\"", 0, true);
  }
  if (eol == std::string_view::npos) throw ParseError("grid file: header line is not terminated", bytes.size(), true);

  std::vector<std::string_view> tok;
  std::string_view line = bytes.substr(0, eol);
  while (!line.empty()) {
    const std::size_t sp = line.find(' ');
    if (sp != 0) tok.push_back(line.substr(0, sp));
    if (sp == std::string_view::npos) break;
    line.remove_prefix(sp + 1);
  }
  if (tok.size() != 9) {
    throw ParseError("grid file: header has " + std::to_string(tok.size()) + " fields, expected 9", 0, true);
  }
  const auto to_size = [&](std::string_view t, const char* what) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) throw ParseError(std::string("grid file: bad ") + what, 0, true);
    return v;
  };
  const auto to_double = [&](std::string_view t, const char* what) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) {
      throw ParseError(std::string("grid file: bad ") + what, 0, true);
    }
    return v;
  };
  const std::size_t version = to_size(tok[1], "version");
  if (version != kGridVersion) {
    throw FormatError(std::string(magic) + " version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kGridVersion) + ")",
                      0, true);
  }
  GridHeader h;
  h.spec.width = to_size(tok[2], "width");
  h.spec.height = to_size(tok[3], "height");
  h.spec.theta_min = to_double(tok[4], "theta_min");
  h.spec.theta_max = to_double(tok[5], "theta_max");
  h.spec.phi_min = to_double(tok[6], "phi_min");
  h.spec.phi_max = to_double(tok[7], "phi_max");
  h.timestamp = to_double(tok[8], "timestamp");
  if (!h.spec.valid() || h.spec.width > (1u << 20) || h.spec.height > (1u << 20)) {
    throw FormatError("grid file: invalid grid geometry in header", 0, true);
  }
  h.payload_offset = eol + 1;
  return h;
}

}  // namespace detail

inline std::string encode_rgrid(const RangeImage& img) {
  std::string out = detail::grid_header("RGRID", img.spec(), img.timestamp());
  out.reserve(out.size() + img.spec().cell_count() * 4);
  for (std::size_t i = 0; i < img.spec().cell_count(); ++i) {
    detail::put_f32(out, img.valid(i) ? static_cast<float>(img.range(i)) : kEmptyRange);
  }
  return out;
}

inline RangeImage decode_rgrid(std::string_view bytes) {
  const GridHeader h = detail::parse_grid_header(bytes, "RGRID");
  const std::size_t n = h.spec.cell_count();
  const std::size_t body = bytes.size() - h.payload_offset;
  if (body != n * 4) {
    throw ParseError("RGRID payload has " + std::to_string(body) + " bytes, expected " + std::to_string(n * 4),
                     h.payload_offset, true);
  }
  RangeImage img(h.spec, h.timestamp);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t off = h.payload_offset + 4 * i;
    const float v = detail::get_f32(bytes, off);
    if (v == kEmptyRange) continue;
    if (!(v > 0.0f) || !std::isfinite(v)) {
      throw ParseError("RGRID cell " + std::to_string(i) + " holds an invalid range", off, true);
    }
    img.set(i, v);
  }
  return img;
}

inline void write_rgrid(const RangeImage& img, const std::filesystem::path& path) {
  write_file_atomic(path, encode_rgrid(img));
}

inline RangeImage read_rgrid(const std::filesystem::path& path) { return decode_rgrid(read_file(path)); }

inline std::string encode_lgrid(const LoomingMap& map) {
  std::string out = detail::grid_header("LGRID", map.spec, map.timestamp);
  const std::size_t n = map.spec.cell_count();
  out.reserve(out.size() + n * 5);
  for (std::size_t i = 0; i < n; ++i) detail::put_f32(out, map.valid(i) ? static_cast<float>(map.values[i]) : 0.0f);
  for (std::size_t i = 0; i < n; ++i) out.push_back(map.valid(i) ? '\1' : '\0');
  return out;
}

/// Count of VALID cells whose magnitude sits at or beyond `limit`; the
/// clamp counter of a map read back from disk.
inline std::size_t count_at_clamp(const LoomingMap& map, double limit) noexcept {
  std::size_t n = 0;
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    if (map.valid(i) && std::abs(map.values[i]) >= limit) ++n;
  }
  return n;
}

inline LoomingMap decode_lgrid(std::string_view bytes, double clamp_limit = kDefaultClamp) {
  const GridHeader h = detail::parse_grid_header(bytes, "LGRID");
  const std::size_t n = h.spec.cell_count();
  const std::size_t body = bytes.size() - h.payload_offset;
  if (body < n * 4) {
    throw ParseError("LGRID value block has " + std::to_string(body) + " bytes, expected " + std::to_string(n * 4),
                     h.payload_offset, true);
  }
  const std::size_t mask_offset = h.payload_offset + n * 4;
  if (body - n * 4 != n) {
    throw ParseError("LGRID mask block has " + std::to_string(body - n * 4) + " bytes, expected " + std::to_string(n) +
                         " (width x height)",
                     mask_offset, true);
  }
  LoomingMap map(h.spec, clamp_limit);
  map.timestamp = h.timestamp;
  for (std::size_t i = 0; i < n; ++i) {
    const auto m = static_cast<unsigned char>(bytes[mask_offset + i]);
    if (m > 1) throw ParseError("LGRID mask byte " + std::to_string(i) + " is not 0 or 1", mask_offset + i, true);
    const std::size_t off = h.payload_offset + 4 * i;
    const float v = detail::get_f32(bytes, off);
    if (!std::isfinite(v)) throw ParseError("LGRID cell " + std::to_string(i) + " is not finite", off, true);
    map.values[i] = m ? v : 0.0;
    map.mask[i] = m ? Cell::Valid : Cell::Empty;
  }
  map.clamped = count_at_clamp(map, clamp_limit);
  return map;
}

inline void write_lgrid(const LoomingMap& map, const std::filesystem::path& path) {
  write_file_atomic(path, encode_lgrid(map));
}

inline LoomingMap read_lgrid(const std::filesystem::path& path, double clamp_limit = kDefaultClamp) {
  return decode_lgrid(read_file(path), clamp_limit);
}

}  // namespace looming::io
