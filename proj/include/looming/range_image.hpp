#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "looming/errors.hpp"
#include "looming/geometry.hpp"

namespace looming {

inline constexpr double deg_to_rad(double deg) noexcept { return deg * std::numbers::pi / 180.0; }

/// Default maximum sensor range in meters (HDL-64E class sensor).
inline constexpr double kDefaultMaxRange = 120.0;

/// Discretization of the sphere into width azimuth columns and height
/// elevation rows. Cells are half-open: column c covers
/// [theta_min + c*dtheta, theta_min + (c+1)*dtheta).
struct GridSpec {
  std::size_t width = 2000;
  std::size_t height = 64;
  double theta_min = -std::numbers::pi;
  double theta_max = std::numbers::pi;
  double phi_min = deg_to_rad(-24.8);
  double phi_max = deg_to_rad(2.0);

  double theta_step() const noexcept { return (theta_max - theta_min) / static_cast<double>(width); }
  double phi_step() const noexcept { return (phi_max - phi_min) / static_cast<double>(height); }
  std::size_t cell_count() const noexcept { return width * height; }

  bool valid() const noexcept {
    return width >= 2 && height >= 2 && std::isfinite(theta_min) && std::isfinite(theta_max) &&
           std::isfinite(phi_min) && std::isfinite(phi_max) && theta_max > theta_min &&
           phi_max > phi_min;
  }

  /// Whether columns 0 and width-1 are neighbors on the circle.
  bool wraps() const noexcept {
    return std::abs((theta_max - theta_min) - 2.0 * std::numbers::pi) < 1e-12;
  }

  double theta_center(std::size_t col) const noexcept {
    return theta_min + (static_cast<double>(col) + 0.5) * theta_step();
  }
  double phi_center(std::size_t row) const noexcept {
    return phi_min + (static_cast<double>(row) + 0.5) * phi_step();
  }

  std::optional<std::size_t> column_of(double theta) const noexcept {
    if (!(theta >= theta_min && theta < theta_max)) return std::nullopt;
    const auto c = static_cast<std::size_t>(std::floor((theta - theta_min) / theta_step()));
    return std::min(c, width - 1);
  }
  std::optional<std::size_t> row_of(double phi) const noexcept {
    if (!(phi >= phi_min && phi < phi_max)) return std::nullopt;
    const auto r = static_cast<std::size_t>(std::floor((phi - phi_min) / phi_step()));
    return std::min(r, height - 1);
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

inline void require_valid(const GridSpec& spec) {
  if (!spec.valid()) throw InvalidInput("grid spec: need width, height >= 2 and increasing angle spans");
}

enum class Cell : std::uint8_t { Empty = 0, Valid = 1 };

/// One sweep as a grid of ranges in meters. Storage is row-major with rows
/// indexed by elevation (row 0 = phi_min) and columns by azimuth.
class RangeImage {
 public:
  RangeImage() = default;
  explicit RangeImage(const GridSpec& spec, double timestamp = 0.0)
      : spec_(spec),
        range_(spec.cell_count(), 0.0),
        mask_(spec.cell_count(), Cell::Empty),
        timestamp_(timestamp) {
    require_valid(spec);
  }

  const GridSpec& spec() const noexcept { return spec_; }
  std::size_t width() const noexcept { return spec_.width; }
  std::size_t height() const noexcept { return spec_.height; }
  double timestamp() const noexcept { return timestamp_; }
  void set_timestamp(double t) noexcept { timestamp_ = t; }

  std::size_t index(std::size_t col, std::size_t row) const noexcept { return row * spec_.width + col; }

  bool valid(std::size_t i) const noexcept { return mask_[i] == Cell::Valid; }
  bool valid(std::size_t col, std::size_t row) const noexcept { return valid(index(col, row)); }

  std::optional<double> at(std::size_t col, std::size_t row) const noexcept {
    const std::size_t i = index(col, row);
    if (!valid(i)) return std::nullopt;
    return range_[i];
  }

  // Unchecked raw range; meaningless for EMPTY cells.
  double range(std::size_t i) const noexcept { return range_[i]; }

  void set(std::size_t col, std::size_t row, double r) { set(index(col, row), r); }
  void set(std::size_t i, double r) {
    if (!(r > 0.0) || !std::isfinite(r)) throw InvalidInput("range image: VALID cells need 0 < r < inf");
    range_[i] = r;
    mask_[i] = Cell::Valid;
  }
  void clear(std::size_t i) noexcept {
    range_[i] = 0.0;
    mask_[i] = Cell::Empty;
  }

  std::size_t valid_count() const noexcept {
    return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), Cell::Valid));
  }

  std::span<const double> ranges() const noexcept { return range_; }
  std::span<const Cell> mask() const noexcept { return mask_; }

  friend bool operator==(const RangeImage&, const RangeImage&) = default;

 private:
  GridSpec spec_;
  std::vector<double> range_;
  std::vector<Cell> mask_;
  double timestamp_ = 0.0;
};

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<float> intensity;  // empty, or one entry per point
  double timestamp = 0.0;

  std::size_t size() const noexcept { return points.size(); }
  bool has_intensity() const noexcept { return !intensity.empty(); }
};

enum class CellReduction { Min, Mean };

struct ProjectOptions {
  double r_max = kDefaultMaxRange;
  CellReduction reduction = CellReduction::Min;
};

struct ProjectStats {
  std::size_t total = 0;
  std::size_t binned = 0;
  std::size_t dropped_origin = 0;
  std::size_t dropped_span = 0;   // outside the grid's angular span
  std::size_t dropped_range = 0;  // beyond r_max

  std::size_t dropped() const noexcept { return dropped_origin + dropped_span + dropped_range; }
};

struct Projection {
  RangeImage image;
  ProjectStats stats;
};

/// Cell a direction falls in, or nothing when outside the grid span.
inline std::optional<std::size_t> cell_of(const GridSpec& spec, double theta, double phi) noexcept {
  const auto col = spec.column_of(theta);
  const auto row = spec.row_of(phi);
  if (!col || !row) return std::nullopt;
  return *row * spec.width + *col;
}

inline Projection project_with_stats(const PointCloud& cloud, const GridSpec& spec,
                                     const ProjectOptions& opts = {}) {
  Projection out{RangeImage(spec, cloud.timestamp), {}};
  out.stats.total = cloud.points.size();

  std::vector<double> acc(spec.cell_count(), opts.reduction == CellReduction::Min
                                                 ? std::numeric_limits<double>::infinity()
                                                 : 0.0);
  std::vector<std::uint32_t> hits(spec.cell_count(), 0);

  for (const Vec3& p : cloud.points) {
    const SphericalCoord s = cart_to_spherical(p);
    if (!(s.r > 0.0)) {
      ++out.stats.dropped_origin;
      continue;
    }
    if (s.r > opts.r_max) {
      ++out.stats.dropped_range;
      continue;
    }
    const auto cell = cell_of(spec, s.theta, s.phi);
    if (!cell) {
      ++out.stats.dropped_span;
      continue;
    }
    ++out.stats.binned;
    ++hits[*cell];
    if (opts.reduction == CellReduction::Min) {
      acc[*cell] = std::min(acc[*cell], s.r);
    } else {
      acc[*cell] += s.r;
    }
  }

  for (std::size_t i = 0; i < acc.size(); ++i) {
    if (hits[i] == 0) continue;
    out.image.set(i, opts.reduction == CellReduction::Min ? acc[i] : acc[i] / hits[i]);
  }
  return out;
}

/// Bins a cloud into a range image. Cells hit by several points keep the
/// nearest return (or the mean with CellReduction::Mean); points at the
/// origin, beyond r_max or outside the angular span are dropped.
inline RangeImage project(const PointCloud& cloud, const GridSpec& spec, const ProjectOptions& opts = {}) {
  return project_with_stats(cloud, spec, opts).image;
}

/// One point per VALID cell, placed at the cell center direction.
inline PointCloud points_of(const RangeImage& img) {
  PointCloud cloud;
  cloud.timestamp = img.timestamp();
  cloud.points.reserve(img.valid_count());
  const GridSpec& spec = img.spec();
  for (std::size_t row = 0; row < spec.height; ++row) {
    for (std::size_t col = 0; col < spec.width; ++col) {
      if (const auto r = img.at(col, row)) {
        cloud.points.push_back(spherical_to_cart({*r, spec.theta_center(col), spec.phi_center(row)}));
      }
    }
  }
  return cloud;
}

/// Fills EMPTY runs of at most `max_gap` cells along each azimuth row when
/// both ends are VALID, interpolating range linearly. Runs never cross
/// elevation rows and VALID cells are left untouched.
inline RangeImage fill_gaps(const RangeImage& img, std::size_t max_gap) {
  RangeImage out = img;
  if (max_gap == 0) return out;
  const std::size_t w = img.width();
  for (std::size_t row = 0; row < img.height(); ++row) {
    std::optional<std::size_t> last_valid;
    for (std::size_t col = 0; col < w; ++col) {
      if (!img.valid(col, row)) continue;
      if (last_valid && col - *last_valid > 1) {
        const std::size_t gap = col - *last_valid - 1;
        if (gap <= max_gap) {
          const double a = img.range(img.index(*last_valid, row));
          const double b = img.range(img.index(col, row));
          for (std::size_t k = 1; k <= gap; ++k) {
            const double f = static_cast<double>(k) / static_cast<double>(gap + 1);
            out.set(*last_valid + k, row, a + (b - a) * f);
          }
        }
      }
      last_valid = col;
    }
  }
  return out;
}

/// Block-minimum downsampling by factor_theta columns x factor_phi rows.
inline RangeImage decimate(const RangeImage& img, std::size_t factor_theta, std::size_t factor_phi) {
  if (factor_theta == 0 || factor_phi == 0) throw InvalidInput("decimate: factors must be >= 1");
  if (img.width() % factor_theta != 0 || img.height() % factor_phi != 0) {
    throw InvalidInput("decimate: factors " + std::to_string(factor_theta) + "x" +
                       std::to_string(factor_phi) + " do not divide grid " +
                       std::to_string(img.width()) + "x" + std::to_string(img.height()));
  }
  GridSpec spec = img.spec();
  spec.width /= factor_theta;
  spec.height /= factor_phi;
  RangeImage out(spec, img.timestamp());
  for (std::size_t row = 0; row < spec.height; ++row) {
    for (std::size_t col = 0; col < spec.width; ++col) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t dr = 0; dr < factor_phi; ++dr) {
        for (std::size_t dc = 0; dc < factor_theta; ++dc) {
          if (const auto r = img.at(col * factor_theta + dc, row * factor_phi + dr)) best = std::min(best, *r);
        }
      }
      if (std::isfinite(best)) out.set(col, row, best);
    }
  }
  return out;
}

/// Nearest-cell lookup (floor convention on cell boundaries). Azimuth is
/// wrapped into [-pi, pi) first. Throws when the direction is outside the
/// grid span; returns nothing for EMPTY cells.
inline std::optional<double> sample(const RangeImage& img, double theta, double phi) {
  const GridSpec& spec = img.spec();
  const auto col = spec.column_of(wrap_angle(theta));
  const auto row = spec.row_of(phi);
  if (!col || !row) throw InvalidInput("sample: direction outside grid span");
  return img.at(*col, *row);
}

}  // namespace looming
