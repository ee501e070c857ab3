#pragma once

// Coordinate, relative-velocity-field and looming math for a sensor frame
// with x forward, azimuth theta measured from +x in the XY plane and
// elevation phi measured from the XY plane.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include "looming/errors.hpp"

namespace looming {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3& operator+=(const Vec3& o) noexcept {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr Vec3& operator-=(const Vec3& o) noexcept {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  constexpr Vec3& operator*=(double s) noexcept {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }

  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr Vec3 operator+(Vec3 a, const Vec3& b) noexcept { return a += b; }
constexpr Vec3 operator-(Vec3 a, const Vec3& b) noexcept { return a -= b; }
constexpr Vec3 operator-(const Vec3& a) noexcept { return {-a.x, -a.y, -a.z}; }
constexpr Vec3 operator*(Vec3 a, double s) noexcept { return a *= s; }
constexpr Vec3 operator*(double s, Vec3 a) noexcept { return a *= s; }
constexpr Vec3 operator/(const Vec3& a, double s) noexcept { return {a.x / s, a.y / s, a.z / s}; }

constexpr double dot(const Vec3& a, const Vec3& b) noexcept {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

constexpr Vec3 cross(const Vec3& a, const Vec3& b) noexcept {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& a) noexcept { return std::sqrt(dot(a, a)); }

inline bool is_finite(const Vec3& a) noexcept {
  return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

// Rotation about +z by `angle` radians.
inline Vec3 rotate_z(const Vec3& v, double angle) noexcept {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y, v.z};
}

/// Wraps an angle into [-pi, pi).
inline double wrap_angle(double a) noexcept {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (a >= -std::numbers::pi && a < std::numbers::pi) return a;
  double w = std::fmod(a + std::numbers::pi, two_pi);
  if (w < 0.0) w += two_pi;
  w -= std::numbers::pi;
  // fmod can land exactly on +pi after the shift through rounding.
  return w >= std::numbers::pi ? -std::numbers::pi : w;
}

/// Spherical position: range r >= 0, azimuth theta in [-pi, pi), elevation
/// phi in [-pi/2, pi/2]. The constructor puts angles in canonical form.
struct SphericalCoord {
  double r = 0.0;
  double theta = 0.0;
  double phi = 0.0;

  constexpr SphericalCoord() = default;
  SphericalCoord(double range, double azimuth, double elevation)
      : r(range),
        theta(wrap_angle(azimuth)),
        phi(std::clamp(elevation, -std::numbers::pi / 2, std::numbers::pi / 2)) {}
};

/// Time derivatives of (r, theta, phi). theta_dot is empty at the poles,
/// where azimuth is not defined.
struct SphericalRates {
  double r_dot = 0.0;
  std::optional<double> theta_dot = 0.0;
  double phi_dot = 0.0;

  bool degenerate() const noexcept { return !theta_dot.has_value(); }
};

/// Looming value in 1/s. Positive means the range is shrinking.
struct Looming {
  double value = 0.0;

  friend constexpr auto operator<=>(const Looming&, const Looming&) = default;
};

// The origin maps to (0, 0, 0) instead of throwing so that projection can
// tolerate returns at the sensor location.
inline SphericalCoord cart_to_spherical(const Vec3& p) {
  const double r = norm(p);
  if (r == 0.0) return {};
  return {r, std::atan2(p.y, p.x), std::atan2(p.z, std::hypot(p.x, p.y))};
}

inline Vec3 radial_unit_vector(double theta, double phi) noexcept {
  const double cp = std::cos(phi);
  return {cp * std::cos(theta), cp * std::sin(theta), std::sin(phi)};
}

inline Vec3 spherical_to_cart(const SphericalCoord& s) noexcept {
  return radial_unit_vector(s.theta, s.phi) * s.r;
}

/// Velocity of a scene point relative to a sensor translating with `t` and
/// rotating with `omega`: V = -t - omega x r.
constexpr Vec3 relative_velocity_field(const Vec3& t, const Vec3& omega, const Vec3& r_vec) noexcept {
  return -t - cross(omega, r_vec);
}

/// Spherical unit vectors (e_r, e_theta, e_phi) at a direction; the rows of
/// the rectilinear-to-spherical rotation.
struct SphericalBasis {
  Vec3 e_r;
  Vec3 e_theta;
  Vec3 e_phi;
};

inline SphericalBasis spherical_basis(double theta, double phi) noexcept {
  const double ct = std::cos(theta), st = std::sin(theta);
  const double cp = std::cos(phi), sp = std::sin(phi);
  return {{ct * cp, st * cp, sp}, {-st, ct, 0.0}, {-ct * sp, -st * sp, cp}};
}

namespace detail {

inline void require_range(double r, const char* what) {
  if (!(r > 0.0)) throw UndefinedAtOrigin(std::string(what) + ": range must be positive");
}

// cos(phi) below this is treated as a pole.
inline constexpr double kPoleCos = 1e-12;

}  // namespace detail

inline SphericalRates velocity_to_spherical_rates(const Vec3& v, const SphericalCoord& at) {
  detail::require_range(at.r, "velocity_to_spherical_rates");
  const SphericalBasis b = spherical_basis(at.theta, at.phi);
  SphericalRates out;
  out.r_dot = dot(b.e_r, v);
  out.phi_dot = dot(b.e_phi, v) / at.r;
  const double cp = std::cos(at.phi);
  if (std::abs(cp) <= detail::kPoleCos) {
    out.theta_dot.reset();
  } else {
    out.theta_dot = dot(b.e_theta, v) / (at.r * cp);
  }
  return out;
}

// The forward matrix is the transpose of the one used above. A degenerate
// theta_dot contributes nothing since it is multiplied by cos(phi) = 0.
inline Vec3 spherical_rates_to_velocity(const SphericalRates& rates, const SphericalCoord& at) noexcept {
  const SphericalBasis b = spherical_basis(at.theta, at.phi);
  const double tangential = rates.theta_dot ? at.r * *rates.theta_dot * std::cos(at.phi) : 0.0;
  return b.e_r * rates.r_dot + b.e_theta * tangential + b.e_phi * (at.r * rates.phi_dot);
}

/// L = t.r / r.r
inline Looming looming_vector_form(const Vec3& t, const Vec3& r_vec) {
  const double rr = dot(r_vec, r_vec);
  if (!(rr > 0.0)) throw UndefinedAtOrigin("looming_vector_form: zero range vector");
  return {dot(t, r_vec) / rr};
}

/// L = t.e_r / r. Only the radial part of the velocity field enters, so no
/// rotation term appears.
inline Looming looming_radial(const Vec3& t, const SphericalCoord& at) {
  detail::require_range(at.r, "looming_radial");
  return {dot(t, radial_unit_vector(at.theta, at.phi)) / at.r};
}

/// Two-sample looming -((r_curr - r_prev) / dt) / r_curr, normalized by the
/// current range.
inline Looming looming_finite_difference(double r_prev, double r_curr, double dt) {
  if (!(r_prev > 0.0) || !(r_curr > 0.0)) {
    throw InvalidInput("looming_finite_difference: ranges must be positive");
  }
  if (!(dt > 0.0)) throw InvalidInput("looming_finite_difference: dt must be positive");
  return {-((r_curr - r_prev) / dt) / r_curr};
}

}  // namespace looming
