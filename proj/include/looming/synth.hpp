#pragma once

// Ray-casting LiDAR simulator over analytic primitives. Every intersection
// has a closed form, so the ground-truth looming it produces is exact.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "looming/errors.hpp"
#include "looming/geometry.hpp"
#include "looming/looming_map.hpp"
#include "looming/range_image.hpp"

namespace looming::synth {

struct Sphere {
  Vec3 center;
  double radius = 1.0;
  Vec3 velocity;
};

struct Plane {
  Vec3 point;
  Vec3 normal{1.0, 0.0, 0.0};
  Vec3 velocity;
};

struct AxisBox {
  Vec3 min;
  Vec3 max;
  Vec3 velocity;
};

using Primitive = std::variant<Sphere, Plane, AxisBox>;

inline const Vec3& velocity_of(const Primitive& p) noexcept {
  return std::visit([](const auto& o) -> const Vec3& { return o.velocity; }, p);
}

inline void validate(const Primitive& p) {
  std::visit(
      [](const auto& o) {
        using T = std::decay_t<decltype(o)>;
        if (!is_finite(o.velocity)) throw InvalidInput("scene: velocity must be finite");
        if constexpr (std::is_same_v<T, Sphere>) {
          if (!is_finite(o.center) || !(o.radius > 0.0) || !std::isfinite(o.radius)) {
            throw InvalidInput("scene: sphere needs a finite center and radius > 0");
          }
        } else if constexpr (std::is_same_v<T, Plane>) {
          if (!is_finite(o.point) || !is_finite(o.normal) || std::abs(norm(o.normal) - 1.0) > 1e-9) {
            throw InvalidInput("scene: plane needs a finite point and a unit normal");
          }
        } else {
          if (!is_finite(o.min) || !is_finite(o.max) || !(o.min.x < o.max.x) || !(o.min.y < o.max.y) ||
              !(o.min.z < o.max.z)) {
            throw InvalidInput("scene: box needs min < max componentwise");
          }
        }
      },
      p);
}

struct Scene {
  std::vector<Primitive> objects;

  Scene& add(Primitive p) {
    validate(p);
    objects.push_back(std::move(p));
    return *this;
  }
};

/// Sensor pose and motion. `t` is the translation velocity in the sensor
/// frame (x forward); heading rotates the sensor frame about world z.
struct VehicleState {
  Vec3 position;
  double heading = 0.0;
  Vec3 t;
  double omega_z = 0.0;

  Vec3 world_velocity() const noexcept { return rotate_z(t, heading); }
};

/// Integrates the state over dt with constant sensor-frame velocity and yaw
/// rate (exact arc, not an Euler step).
inline VehicleState advance(const VehicleState& s, double dt) noexcept {
  VehicleState out = s;
  double c_int = std::cos(s.heading) * dt;
  double s_int = std::sin(s.heading) * dt;
  if (std::abs(s.omega_z * dt) > 1e-12) {
    const double h1 = s.heading + s.omega_z * dt;
    c_int = (std::sin(h1) - std::sin(s.heading)) / s.omega_z;
    s_int = (std::cos(s.heading) - std::cos(h1)) / s.omega_z;
  }
  out.position += Vec3{c_int * s.t.x - s_int * s.t.y, s_int * s.t.x + c_int * s.t.y, s.t.z * dt};
  out.heading = wrap_angle(s.heading + s.omega_z * dt);
  return out;
}

struct RayHit {
  double range = 0.0;
  std::size_t object = 0;
};

namespace detail {

inline constexpr double kMinHit = 1e-9;

inline std::optional<double> intersect(const Sphere& s, const Vec3& o, const Vec3& d, double at_time) {
  const Vec3 oc = o - (s.center + s.velocity * at_time);
  const double b = dot(d, oc);
  const double c = dot(oc, oc) - s.radius * s.radius;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  if (const double near = -b - sq; near > kMinHit) return near;
  if (const double far = -b + sq; far > kMinHit) return far;
  return std::nullopt;
}

inline std::optional<double> intersect(const Plane& p, const Vec3& o, const Vec3& d, double at_time) {
  const double denom = dot(p.normal, d);
  if (std::abs(denom) < 1e-15) return std::nullopt;
  const double s = dot(p.normal, (p.point + p.velocity * at_time) - o) / denom;
  if (s > kMinHit) return s;
  return std::nullopt;
}

inline std::optional<double> intersect(const AxisBox& b, const Vec3& o, const Vec3& d, double at_time) {
  const Vec3 lo = b.min + b.velocity * at_time;
  const Vec3 hi = b.max + b.velocity * at_time;
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  const double os[3] = {o.x, o.y, o.z};
  const double ds[3] = {d.x, d.y, d.z};
  const double los[3] = {lo.x, lo.y, lo.z};
  const double his[3] = {hi.x, hi.y, hi.z};
  for (int k = 0; k < 3; ++k) {
    if (ds[k] == 0.0) {
      if (os[k] < los[k] || os[k] > his[k]) return std::nullopt;
      continue;
    }
    double t1 = (los[k] - os[k]) / ds[k];
    double t2 = (his[k] - os[k]) / ds[k];
    if (t1 > t2) std::swap(t1, t2);
    t_near = std::max(t_near, t1);
    t_far = std::min(t_far, t2);
    if (t_near > t_far) return std::nullopt;
  }
  if (t_near > kMinHit) return t_near;
  if (t_far > kMinHit) return t_far;
  return std::nullopt;
}

}  // namespace detail

/// Nearest hit along a unit-direction ray against every object displaced by
/// velocity * at_time; nothing when no hit lies within r_max.
inline std::optional<RayHit> ray_cast(const Scene& scene, const Vec3& origin, const Vec3& direction,
                                      double at_time, double r_max = kDefaultMaxRange) {
  std::optional<RayHit> best;
  for (std::size_t k = 0; k < scene.objects.size(); ++k) {
    const auto d = std::visit(
        [&](const auto& obj) { return detail::intersect(obj, origin, direction, at_time); }, scene.objects[k]);
    if (d && *d <= r_max && (!best || *d < best->range)) best = RayHit{*d, k};
  }
  return best;
}

struct SimOptions {
  double r_max = kDefaultMaxRange;
  double noise_sigma = 0.0;  // additive Gaussian range noise, m
  std::uint64_t seed = 0;
  double clamp = kDefaultClamp;
};

// Sensor-frame direction of a cell center, rotated into the world.
inline Vec3 cell_ray(const GridSpec& spec, const VehicleState& state, std::size_t col, std::size_t row) noexcept {
  return rotate_z(radial_unit_vector(spec.theta_center(col), spec.phi_center(row)), state.heading);
}

/// One instantaneous sweep: one ray per cell center; misses are EMPTY.
inline RangeImage simulate_scan(const Scene& scene, const VehicleState& state, const GridSpec& spec,
                                double at_time, const SimOptions& opts = {}) {
  RangeImage img(spec, at_time);
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> noise(0.0, opts.noise_sigma > 0.0 ? opts.noise_sigma : 1.0);
  for (std::size_t row = 0; row < spec.height; ++row) {
    for (std::size_t col = 0; col < spec.width; ++col) {
      const auto hit = ray_cast(scene, state.position, cell_ray(spec, state, col, row), at_time, opts.r_max);
      if (!hit) continue;
      double r = hit->range;
      if (opts.noise_sigma > 0.0) r += noise(rng);
      if (r > 0.0 && r <= opts.r_max) img.set(col, row, r);
    }
  }
  return img;
}

/// The sweep as a sensor-frame point cloud, one point per VALID cell.
inline PointCloud simulate_cloud(const Scene& scene, const VehicleState& state, const GridSpec& spec,
                                 double at_time, const SimOptions& opts = {}) {
  return points_of(simulate_scan(scene, state, spec, at_time, opts));
}

/// -(dp.dv)/(dp.dp) for relative position dp and relative velocity dv.
inline Looming ground_truth_looming(const Vec3& point_pos, const Vec3& point_vel, const Vec3& veh_pos,
                                    const Vec3& veh_vel) {
  const Vec3 dp = point_pos - veh_pos;
  const double dd = dot(dp, dp);
  if (!(dd > 0.0)) throw UndefinedAtOrigin("ground_truth_looming: point coincides with the vehicle");
  return {-dot(dp, point_vel - veh_vel) / dd};
}

/// Exact looming of whatever each cell's ray hits, using the hit object's
/// velocity and the vehicle's world velocity. Noise is never applied here.
inline LoomingMap ground_truth_map(const Scene& scene, const VehicleState& state, const GridSpec& spec,
                                   double at_time, const SimOptions& opts = {}) {
  LoomingMap map(spec, opts.clamp);
  map.timestamp = at_time;
  map.range.assign(map.values.size(), 0.0);
  const Vec3 veh_vel = state.world_velocity();
  for (std::size_t row = 0; row < spec.height; ++row) {
    for (std::size_t col = 0; col < spec.width; ++col) {
      const Vec3 dir = cell_ray(spec, state, col, row);
      const auto hit = ray_cast(scene, state.position, dir, at_time, opts.r_max);
      if (!hit) continue;
      const Vec3 p = state.position + dir * hit->range;
      const std::size_t i = row * spec.width + col;
      map.store(i, ground_truth_looming(p, velocity_of(scene.objects[hit->object]), state.position, veh_vel).value);
      map.range[i] = hit->range;
    }
  }
  return map;
}

/// Index of the object each cell's ray hits (or nothing on a miss).
inline std::vector<std::optional<std::size_t>> hit_objects(const Scene& scene, const VehicleState& state,
                                                           const GridSpec& spec, double at_time,
                                                           double r_max = kDefaultMaxRange) {
  std::vector<std::optional<std::size_t>> out(spec.cell_count());
  for (std::size_t row = 0; row < spec.height; ++row) {
    for (std::size_t col = 0; col < spec.width; ++col) {
      if (const auto hit = ray_cast(scene, state.position, cell_ray(spec, state, col, row), at_time, r_max)) {
        out[row * spec.width + col] = hit->object;
      }
    }
  }
  return out;
}

/// Parses the line-oriented scene format:
///   SPHERE cx cy cz r vx vy vz
///   PLANE  px py pz nx ny nz vx vy vz
///   BOX    minx miny minz maxx maxy maxz vx vy vz
/// '#' starts a comment. Plane normals are normalized.
inline Scene parse_scene(std::istream& in) {
  Scene scene;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind)) continue;

    std::vector<double> v;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ParseError("scene line " + std::to_string(line_no) + ": bad number '" + tok + "'", line_no, true);
      }
    }
    const auto need = [&](std::size_t n) {
      if (v.size() != n) {
        throw ParseError("scene line " + std::to_string(line_no) + ": " + kind + " takes " + std::to_string(n) +
                             " numbers, got " + std::to_string(v.size()),
                         line_no, true);
      }
    };
    Primitive prim;
    if (kind == "SPHERE") {
      need(7);
      prim = Sphere{{v[0], v[1], v[2]}, v[3], {v[4], v[5], v[6]}};
    } else if (kind == "PLANE") {
      need(9);
      const Vec3 n{v[3], v[4], v[5]};
      const double len = norm(n);
      if (!(len > 0.0)) throw ParseError("scene line " + std::to_string(line_no) + ": zero plane normal", line_no, true);
      prim = Plane{{v[0], v[1], v[2]}, n / len, {v[6], v[7], v[8]}};
    } else if (kind == "BOX") {
      need(9);
      prim = AxisBox{{v[0], v[1], v[2]}, {v[3], v[4], v[5]}, {v[6], v[7], v[8]}};
    } else {
      throw ParseError("scene line " + std::to_string(line_no) + ": unknown primitive '" + kind + "'", line_no, true);
    }
    try {
      scene.add(prim);
    } catch (const InvalidInput& e) {
      throw ParseError("scene line " + std::to_string(line_no) + ": " + e.what(), line_no, true);
    }
  }
  return scene;
}

inline Scene parse_scene(const std::string& text) {
  std::istringstream in(text);
  return parse_scene(in);
}

/// Straight-approach demo: a building face 115 m ahead and three obstacles
/// in the lane, all inside the forward cone. Range images only track point
/// looming where surfaces are seen close to the direction of travel (the
/// fixed-ray range rate on a frontal wall is off by 1/cos^2 of the angle to
/// the travel direction), so this scene keeps every return within ~17 deg.
inline const char* kDemoSceneText =
    "# building face ahead, normal toward the sensor\n"
    "PLANE 115 0 0  -1 0 0  0 0 0\n"
    "# obstacles in the lane\n"
    "SPHERE 20 1.5 -1.0  1.5  0 0 0\n"
    "SPHERE 35 -3 -0.5  2.0  0 0 0\n"
    "SPHERE 55 4 0  3.0  0 0 0\n";

inline Scene demo_scene() { return parse_scene(std::string(kDemoSceneText)); }

}  // namespace looming::synth
