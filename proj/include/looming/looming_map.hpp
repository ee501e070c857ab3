#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "looming/errors.hpp"
#include "looming/geometry.hpp"
#include "looming/range_image.hpp"

namespace looming {

inline constexpr double kDefaultClamp = 20.0;

/// Grid of looming values in 1/s with a validity mask.
///
/// `range` optionally carries the range (m) each value was computed at; it
/// is filled by the estimators and the simulator and used to find range
/// discontinuities when comparing maps. It is empty for maps read from disk.
struct LoomingMap {
  GridSpec spec;
  std::vector<double> values;
  std::vector<Cell> mask;
  std::vector<double> range;
  double dt = 0.0;  // sample spacing for the two-scan estimator, 0 for instantaneous maps
  double timestamp = 0.0;
  double clamp_limit = kDefaultClamp;
  std::size_t clamped = 0;  // cells whose raw |L| exceeded clamp_limit

  LoomingMap() = default;
  explicit LoomingMap(const GridSpec& s, double clamp = kDefaultClamp)
      : spec(s), values(s.cell_count(), 0.0), mask(s.cell_count(), Cell::Empty), clamp_limit(clamp) {
    require_valid(s);
    if (!(clamp > 0.0)) throw InvalidInput("looming map: clamp limit must be positive");
  }

  bool valid(std::size_t i) const noexcept { return mask[i] == Cell::Valid; }
  std::size_t valid_count() const noexcept {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), Cell::Valid));
  }
  bool has_range() const noexcept { return range.size() == values.size(); }

  // Stores a value, clamping it into [-clamp_limit, clamp_limit].
  void store(std::size_t i, double raw) {
    if (std::abs(raw) > clamp_limit) {
      ++clamped;
      raw = std::copysign(clamp_limit, raw);
    }
    values[i] = raw;
    mask[i] = Cell::Valid;
  }
};

struct LoomOptions {
  double clamp = kDefaultClamp;
  double r_max = kDefaultMaxRange;
};

/// Two-scan estimator: L = -((r_curr - r_prev) / dt) / r_curr per cell
/// where both scans are VALID.
inline LoomingMap loom_from_grids(const RangeImage& prev, const RangeImage& curr, double dt,
                                  const LoomOptions& opts = {}) {
  if (!(prev.spec() == curr.spec())) throw InvalidInput("loom_from_grids: scans use different grids");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidInput("loom_from_grids: dt must be positive");
  LoomingMap map(curr.spec(), opts.clamp);
  map.dt = dt;
  map.timestamp = curr.timestamp();
  map.range.assign(map.values.size(), 0.0);
  const std::size_t n = map.values.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!prev.valid(i) || !curr.valid(i)) continue;
    const double r1 = prev.range(i);
    const double r2 = curr.range(i);
    map.store(i, -((r2 - r1) / dt) / r2);
    map.range[i] = r2;
  }
  return map;
}

/// Instantaneous estimator: L = t.e_r / r for every point, binned into the
/// grid. A cell keeps the value of its nearest point, matching the range
/// image min rule. No rotation input exists because none enters the result.
inline LoomingMap loom_from_velocity(const PointCloud& cloud, const Vec3& t, const GridSpec& spec,
                                     const LoomOptions& opts = {}) {
  if (!is_finite(t)) throw InvalidInput("loom_from_velocity: translation velocity must be finite");
  if (cloud.points.empty()) throw InvalidInput("loom_from_velocity: empty point cloud");
  LoomingMap map(spec, opts.clamp);
  map.timestamp = cloud.timestamp;
  map.range.assign(map.values.size(), std::numeric_limits<double>::infinity());
  std::vector<double> raw(map.values.size(), 0.0);

  for (const Vec3& p : cloud.points) {
    const SphericalCoord s = cart_to_spherical(p);
    if (!(s.r > 0.0) || s.r > opts.r_max) continue;
    const auto cell = cell_of(spec, s.theta, s.phi);
    if (!cell || !(s.r < map.range[*cell])) continue;
    map.range[*cell] = s.r;
    raw[*cell] = looming_radial(t, s).value;
  }
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (std::isfinite(map.range[i])) {
      map.store(i, raw[i]);
    } else {
      map.range[i] = 0.0;
    }
  }
  return map;
}

enum class ThreatLevel : std::uint8_t { None = 0, Low = 1, Medium = 2, High = 3 };

struct ThreatThresholds {
  double low = 0.2;     // L1
  double medium = 0.5;  // L2
  double high = 1.0;    // L3

  bool valid() const noexcept { return low > 0.0 && medium > low && high > medium; }
};

/// High iff L > L3, Medium iff L3 >= L > L2, Low iff L2 >= L > L1, else
/// None. A value equal to a threshold belongs to the lower class.
inline ThreatLevel threat_level(double value, const ThreatThresholds& th) noexcept {
  if (value > th.high) return ThreatLevel::High;
  if (value > th.medium) return ThreatLevel::Medium;
  if (value > th.low) return ThreatLevel::Low;
  return ThreatLevel::None;
}

struct ThreatMap {
  GridSpec spec;
  std::vector<ThreatLevel> classes;
  ThreatThresholds thresholds;

  // Indexed by ThreatLevel.
  std::array<std::size_t, 4> counts() const noexcept {
    std::array<std::size_t, 4> c{};
    for (ThreatLevel l : classes) ++c[static_cast<std::size_t>(l)];
    return c;
  }
};

inline ThreatMap classify_threat(const LoomingMap& map, const ThreatThresholds& th) {
  if (!th.valid()) throw InvalidInput("classify_threat: thresholds must satisfy L3 > L2 > L1 > 0");
  ThreatMap out{map.spec, std::vector<ThreatLevel>(map.values.size(), ThreatLevel::None), th};
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    if (map.valid(i)) out.classes[i] = threat_level(map.values[i], th);
  }
  return out;
}

/// Locus of points sharing one looming level under translation t: a sphere
/// through the origin centered on t.
struct EqualLoomingSphere {
  Vec3 center;
  double radius = 0.0;
  double level = 0.0;
};

// t.p = L p.p  <=>  |p - t/(2L)|^2 = |t|^2 / (4L^2)
inline EqualLoomingSphere equal_looming_sphere(const Vec3& t, double level) {
  if (level == 0.0) throw NoFiniteSphere("equal_looming_sphere: level 0 is the plane t.p = 0");
  if (!std::isfinite(level)) throw InvalidInput("equal_looming_sphere: level must be finite");
  const double speed = norm(t);
  if (!(speed > 0.0) || !std::isfinite(speed)) {
    throw InvalidInput("equal_looming_sphere: translation must be non-zero and finite");
  }
  return {t / (2.0 * level), speed / (2.0 * std::abs(level)), level};
}

struct ErrorStats {
  double median = 0.0;  // median |est - truth|, 1/s
  double p90 = 0.0;     // 90th percentile |est - truth|, 1/s
  double frac10 = 0.0;  // fraction of cells with |est - truth| <= 0.1 |truth|
  std::size_t cells = 0;
  std::size_t clamped = 0;
  bool empty = true;  // no cell was comparable
};

/// Cells within `radius` azimuth steps of a truth discontinuity. A
/// discontinuity sits between two azimuth neighbors in the same row when
/// exactly one is VALID, or when both are VALID and their ranges differ by
/// more than `jump` meters (only checked when truth carries ranges).
inline std::vector<bool> edge_cells(const LoomingMap& truth, std::size_t radius, double jump = 1.0) {
  const GridSpec& s = truth.spec;
  std::vector<bool> out(s.cell_count(), false);
  if (radius == 0) return out;
  const bool ranged = truth.has_range();
  const std::size_t w = s.width;
  const std::size_t pairs = s.wraps() ? w : w - 1;
  const auto mark = [&](std::size_t row, std::ptrdiff_t col) {
    const auto wi = static_cast<std::ptrdiff_t>(w);
    if (s.wraps()) {
      col = ((col % wi) + wi) % wi;
    } else if (col < 0 || col >= wi) {
      return;
    }
    out[row * w + static_cast<std::size_t>(col)] = true;
  };
  for (std::size_t row = 0; row < s.height; ++row) {
    for (std::size_t c = 0; c < pairs; ++c) {
      const std::size_t a = row * w + c;
      const std::size_t b = row * w + (c + 1) % w;
      const bool va = truth.valid(a), vb = truth.valid(b);
      bool edge = va != vb;
      if (va && vb && ranged) edge = std::abs(truth.range[a] - truth.range[b]) > jump;
      if (!edge) continue;
      const auto left = static_cast<std::ptrdiff_t>(c);
      for (std::size_t k = 0; k < radius; ++k) {
        const auto dk = static_cast<std::ptrdiff_t>(k);
        mark(row, left - dk);
        mark(row, left + 1 + dk);
      }
    }
  }
  return out;
}

/// Error statistics of an estimate against ground truth over cells VALID in
/// both and outside the edge-exclusion band of truth discontinuities.
inline ErrorStats compare_maps(const LoomingMap& est, const LoomingMap& truth, std::size_t edge_exclusion,
                               double jump = 1.0) {
  if (!(est.spec == truth.spec)) throw InvalidInput("compare_maps: maps use different grids");
  const std::vector<bool> excluded = edge_cells(truth, edge_exclusion, jump);

  std::vector<double> errors;
  std::size_t within = 0;
  for (std::size_t i = 0; i < est.values.size(); ++i) {
    if (!est.valid(i) || !truth.valid(i) || excluded[i]) continue;
    const double e = std::abs(est.values[i] - truth.values[i]);
    errors.push_back(e);
    if (e <= 0.1 * std::abs(truth.values[i])) ++within;
  }

  ErrorStats stats;
  stats.clamped = est.clamped;
  stats.cells = errors.size();
  if (errors.empty()) return stats;
  stats.empty = false;

  std::sort(errors.begin(), errors.end());
  const std::size_t n = errors.size();
  stats.median = n % 2 == 1 ? errors[n / 2] : 0.5 * (errors[n / 2 - 1] + errors[n / 2]);
  // nearest-rank percentile
  const auto rank = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(n)));
  stats.p90 = errors[std::max<std::size_t>(rank, 1) - 1];
  stats.frac10 = static_cast<double>(within) / static_cast<double>(n);
  return stats;
}

}  // namespace looming
