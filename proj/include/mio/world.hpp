#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "mio/errors.hpp"
#include "mio/geometry.hpp"
#include "mio/rng.hpp"

namespace mio {

inline constexpr double kGravity = 9.81;  // m/s^2, world -z

// ============================================================================
// Floorplan - 2.5D world: vertical wall segments on a flat floor
// ============================================================================

struct Wall {
  double x1, y1, x2, y2;  // endpoints on the floor (m)
  double height;          // wall spans z in [0, height]
};

struct Bounds {
  double min_x, min_y, max_x, max_y;

  bool contains(double x, double y) const {
    return x >= min_x && x <= max_x && y >= min_y && y <= max_y;
  }
};

struct Floorplan {
  std::vector<Wall> walls;
  Bounds bounds{0.0, 0.0, 0.0, 0.0};
};

// ============================================================================
// MotionScript - scripted walk through the plan
// ============================================================================

struct Waypoint {
  double t;    // s
  double x;    // m
  double y;    // m
  double yaw;  // rad, unwrapped (linear interpolation between waypoints)
};

struct MotionScript {
  std::vector<Waypoint> waypoints;
  double imu_rate = 100.0;    // Hz
  double radar_rate = 10.0;   // Hz
  double device_height = 1.0; // m above floor
};

// ============================================================================
// Sensor samples
// ============================================================================

struct RadarPoint {
  double x, y, z;    // sensor frame (m)
  double intensity;  // [0,1]
};

struct RadarScan {
  double timestamp = 0.0;
  std::vector<RadarPoint> points;
};

struct ImuSample {
  double timestamp = 0.0;
  Vec3 gyro;   // rad/s, body frame
  Vec3 accel;  // m/s^2, specific force (stationary level sensor reads +g up)
};

struct SensorNoiseConfig {
  double range_sigma = 0.05;                 // m
  double angle_sigma = 1.0 * M_PI / 180.0;   // rad
  double detection_prob = 0.78;              // per ray
  double ghost_rate = 5.0;                   // expected ghost points per scan
  double gyro_sigma = 1e-3;                  // rad/s/sqrt(Hz)
  double accel_sigma = 1e-2;                 // m/s^2/sqrt(Hz)
  Vec3 gyro_bias{0.0, 0.0, 0.01};            // rad/s
  Vec3 accel_bias{0.1, 0.0, 0.0};            // m/s^2
  std::uint64_t rng_seed = 0;
};

struct RadarGeometry {
  double az_fov = 120.0 * M_PI / 180.0;  // full width, rad
  double el_fov = 30.0 * M_PI / 180.0;
  int n_az = 32;
  int n_el = 4;
  double max_range = 8.0;     // m
  std::size_t max_points = 512;  // per-scan cap
};

// ============================================================================
// 2D segment geometry
// ============================================================================

namespace detail {

inline double cross2(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }

// Segment-segment intersection in the plane, touching counts.
inline bool segments_intersect(double ax, double ay, double bx, double by, double cx, double cy,
                               double dx, double dy) {
  const double d1 = cross2(dx - cx, dy - cy, ax - cx, ay - cy);
  const double d2 = cross2(dx - cx, dy - cy, bx - cx, by - cy);
  const double d3 = cross2(bx - ax, by - ay, cx - ax, cy - ay);
  const double d4 = cross2(bx - ax, by - ay, dx - ax, dy - ay);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  auto on_segment = [](double px, double py, double qx, double qy, double rx, double ry) {
    return std::min(px, rx) <= qx && qx <= std::max(px, rx) && std::min(py, ry) <= qy &&
           qy <= std::max(py, ry);
  };
  if (d1 == 0 && on_segment(cx, cy, ax, ay, dx, dy)) return true;
  if (d2 == 0 && on_segment(cx, cy, bx, by, dx, dy)) return true;
  if (d3 == 0 && on_segment(ax, ay, cx, cy, bx, by)) return true;
  if (d4 == 0 && on_segment(ax, ay, dx, dy, bx, by)) return true;
  return false;
}

// Distance along ray (ox,oy)+s*(dx,dy) to the wall segment, if hit with s>eps.
inline std::optional<double> ray_segment(double ox, double oy, double dx, double dy,
                                         const Wall& w) {
  const double ex = w.x2 - w.x1;
  const double ey = w.y2 - w.y1;
  const double denom = cross2(dx, dy, ex, ey);
  if (denom == 0.0) return std::nullopt;  // parallel
  const double rx = w.x1 - ox;
  const double ry = w.y1 - oy;
  const double s = cross2(rx, ry, ex, ey) / denom;
  const double u = cross2(rx, ry, dx, dy) / denom;
  if (s <= 1e-12 || u < 0.0 || u > 1.0) return std::nullopt;
  return s;
}

}  // namespace detail

// ============================================================================
// Trajectory generation
// ============================================================================

namespace detail {

inline void validate_script(const MotionScript& script, const Floorplan& plan) {
  if (script.waypoints.empty())
    throw TrajectoryTooShort("motion script has no waypoints");
  if (script.imu_rate <= 0.0 || script.radar_rate <= 0.0 || script.radar_rate > script.imu_rate)
    throw Error("rates must satisfy 0 < radar_rate <= imu_rate");
  for (std::size_t i = 0; i < script.waypoints.size(); ++i) {
    const Waypoint& w = script.waypoints[i];
    if (i > 0 && w.t <= script.waypoints[i - 1].t)
      throw NonMonotonicTimestamps("waypoint times must strictly increase");
    if (!plan.bounds.contains(w.x, w.y))
      throw WaypointOutsideBounds("waypoint " + std::to_string(i) + " outside floorplan bounds");
  }
  for (std::size_t i = 1; i < script.waypoints.size(); ++i) {
    const Waypoint& a = script.waypoints[i - 1];
    const Waypoint& b = script.waypoints[i];
    for (const Wall& w : plan.walls)
      if (segments_intersect(a.x, a.y, b.x, b.y, w.x1, w.y1, w.x2, w.y2))
        throw PathCrossesWall("script segment " + std::to_string(i - 1) + "->" +
                              std::to_string(i) + " crosses a wall");
  }
}

}  // namespace detail

// Piecewise-linear position and yaw at time t (clamped to the script span).
inline PoseSE3 script_pose_at(const MotionScript& script, double t) {
  const auto& wp = script.waypoints;
  if (t <= wp.front().t) {
    const Waypoint& w = wp.front();
    return PoseSE3::from_yaw(w.yaw, {w.x, w.y, script.device_height});
  }
  if (t >= wp.back().t) {
    const Waypoint& w = wp.back();
    return PoseSE3::from_yaw(w.yaw, {w.x, w.y, script.device_height});
  }
  std::size_t hi = 1;
  while (wp[hi].t < t) ++hi;
  const Waypoint& a = wp[hi - 1];
  const Waypoint& b = wp[hi];
  const double u = (t - a.t) / (b.t - a.t);
  const double x = a.x + u * (b.x - a.x);
  const double y = a.y + u * (b.y - a.y);
  const double yaw = a.yaw + u * (b.yaw - a.yaw);
  return PoseSE3::from_yaw(yaw, {x, y, script.device_height});
}

// Dense ground truth sampled at imu_rate. Zero roll/pitch by construction.
inline Trajectory generate_trajectory(const MotionScript& script, const Floorplan& plan) {
  detail::validate_script(script, plan);
  const double t0 = script.waypoints.front().t;
  const double t1 = script.waypoints.back().t;
  const double dt = 1.0 / script.imu_rate;
  const std::size_t n = static_cast<std::size_t>(std::llround((t1 - t0) * script.imu_rate)) + 1;
  Trajectory traj;
  traj.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = t0 + static_cast<double>(k) * dt;
    traj.push_back({t, script_pose_at(script, std::min(t, t1))});
  }
  return traj;
}

// ============================================================================
// Radar scan synthesis (point-cloud level ray casting)
// ============================================================================

namespace detail {

// Nearest wall hit along a 3D ray; z checked against the wall extent.
inline std::optional<double> cast_ray(const Floorplan& plan, const Vec3& origin, const Vec3& dir,
                                      double max_range) {
  double best = max_range;
  bool hit = false;
  const double dxy = std::hypot(dir.x, dir.y);
  if (dxy < 1e-12) return std::nullopt;  // straight up/down: no wall hit
  for (const Wall& w : plan.walls) {
    const auto s2 = ray_segment(origin.x, origin.y, dir.x, dir.y, w);
    if (!s2) continue;
    const double range = *s2;  // dir is unit, so the planar solve is the 3D range scale
    if (range > best) continue;
    const double z = origin.z + range * dir.z;
    if (z < 0.0 || z > w.height) continue;
    best = range;
    hit = true;
  }
  if (!hit) return std::nullopt;
  return best;
}

inline Vec3 spherical_dir(double az, double el) {
  const double ce = std::cos(el);
  return {ce * std::cos(az), ce * std::sin(az), std::sin(el)};
}

}  // namespace detail

// One scan from the given pose. Deterministic in (cfg.rng_seed, t).
inline RadarScan radar_scan(const Floorplan& plan, const PoseSE3& pose,
                            const RadarGeometry& geom, const SensorNoiseConfig& cfg, double t) {
  if (!plan.bounds.contains(pose.translation.x, pose.translation.y))
    throw PoseOutsideBounds("radar pose outside floorplan bounds");

  Rng rng(cfg.rng_seed, std::bit_cast<std::uint64_t>(t));
  RadarScan scan;
  scan.timestamp = t;

  const double az0 = -0.5 * geom.az_fov;
  const double el0 = -0.5 * geom.el_fov;
  const double daz = geom.az_fov / geom.n_az;
  const double del = geom.el_fov / geom.n_el;

  for (int j = 0; j < geom.n_el; ++j) {
    const double el = el0 + (j + 0.5) * del;
    for (int i = 0; i < geom.n_az; ++i) {
      const double az = az0 + (i + 0.5) * daz;
      const Vec3 dir_world = pose.rotation.rotate(detail::spherical_dir(az, el));
      const auto range = detail::cast_ray(plan, pose.translation, dir_world, geom.max_range);
      if (!range) continue;
      if (rng.uniform() >= cfg.detection_prob) continue;
      const double r = *range + rng.gaussian(0.0, cfg.range_sigma);
      const double az_n = az + rng.gaussian(0.0, cfg.angle_sigma);
      const double el_n = el + rng.gaussian(0.0, cfg.angle_sigma);
      if (r <= 0.0 || r > geom.max_range) continue;  // range gate
      const Vec3 p = r * detail::spherical_dir(az_n, el_n);
      scan.points.push_back({p.x, p.y, p.z, std::clamp(1.0 - r / geom.max_range, 0.0, 1.0)});
    }
  }

  const int ghosts = rng.poisson(cfg.ghost_rate);
  for (int g = 0; g < ghosts; ++g) {
    const double az = rng.uniform(az0, az0 + geom.az_fov);
    const double el = rng.uniform(el0, el0 + geom.el_fov);
    const double r = rng.uniform(0.0, geom.max_range);
    const Vec3 p = r * detail::spherical_dir(az, el);
    scan.points.push_back({p.x, p.y, p.z, std::clamp(1.0 - r / geom.max_range, 0.0, 1.0)});
  }

  if (scan.points.size() > geom.max_points) scan.points.resize(geom.max_points);
  return scan;
}

// ============================================================================
// IMU synthesis
// ============================================================================

namespace detail {

// Rotation vector of a (small) relative quaternion.
inline Vec3 quat_log_vec(const Quat& q) {
  const Vec3 im{q.x, q.y, q.z};
  const double n = im.norm();
  if (n < 1e-14) return 2.0 * im;  // small-angle: 2*im/w, w ~= 1
  const double angle = 2.0 * std::atan2(n, q.w);
  return im * (angle / n);
}

}  // namespace detail

// Body-frame gyro/accel from finite differences of the dense trajectory,
// plus bias and white noise. Noise sigma is a density; per-sample sigma is
// density*sqrt(rate).
inline std::vector<ImuSample> imu_stream(const Trajectory& traj, const SensorNoiseConfig& cfg) {
  if (traj.size() < 3) throw TrajectoryTooShort("imu_stream needs at least 3 trajectory samples");

  const std::size_t n = traj.size();
  const double fs = static_cast<double>(n - 1) / (traj.back().t - traj.front().t);
  const double gyro_sigma_d = cfg.gyro_sigma * std::sqrt(fs);
  const double accel_sigma_d = cfg.accel_sigma * std::sqrt(fs);
  const Vec3 gravity{0.0, 0.0, -kGravity};

  std::vector<Vec3> rate(n), accel_world(n);
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double dt2 = traj[k + 1].t - traj[k - 1].t;
    const Quat dq =
        (traj[k - 1].pose.rotation.conjugate() * traj[k + 1].pose.rotation).normalized();
    rate[k] = detail::quat_log_vec(dq) / dt2;
    const double dt = 0.5 * dt2;
    const Vec3& p0 = traj[k - 1].pose.translation;
    const Vec3& p1 = traj[k].pose.translation;
    const Vec3& p2 = traj[k + 1].pose.translation;
    accel_world[k] = (p2 - p1 * 2.0 + p0) / (dt * dt);
  }
  rate[0] = rate[1];
  rate[n - 1] = rate[n - 2];
  accel_world[0] = accel_world[1];
  accel_world[n - 1] = accel_world[n - 2];

  Rng rng(cfg.rng_seed, 0x494d5553494dULL);
  std::vector<ImuSample> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    ImuSample s;
    s.timestamp = traj[k].t;
    const Quat& q = traj[k].pose.rotation;
    const Vec3 specific_force = q.inverse_rotate(accel_world[k] - gravity);
    s.gyro = rate[k] + cfg.gyro_bias +
             Vec3{rng.gaussian(0.0, gyro_sigma_d), rng.gaussian(0.0, gyro_sigma_d),
                  rng.gaussian(0.0, gyro_sigma_d)};
    s.accel = specific_force + cfg.accel_bias +
              Vec3{rng.gaussian(0.0, accel_sigma_d), rng.gaussian(0.0, accel_sigma_d),
                   rng.gaussian(0.0, accel_sigma_d)};
    out.push_back(s);
  }
  return out;
}

// ============================================================================
// Default desk-scale world: a two-bed apartment and a search walk
// ============================================================================

inline Floorplan default_apartment() {
  Floorplan plan;
  plan.bounds = {0.0, 0.0, 11.0, 8.0};
  const double h = 2.6;
  plan.walls = {
      // outer shell
      {0.0, 0.0, 11.0, 0.0, h},
      {11.0, 0.0, 11.0, 8.0, h},
      {11.0, 8.0, 0.0, 8.0, h},
      {0.0, 8.0, 0.0, 0.0, h},
      // partition between living area (x<6) and bedrooms, two door gaps
      {6.0, 0.0, 6.0, 2.2, h},
      {6.0, 3.2, 6.0, 5.2, h},
      {6.0, 6.2, 6.0, 8.0, h},
      // wall between the two bedrooms
      {6.0, 4.0, 11.0, 4.0, h},
      // kitchen peninsula
      {0.0, 5.0, 2.5, 5.0, h},
  };
  return plan;
}

// Wall-following search loop: living area, bedroom 1, bedroom 2, return.
inline MotionScript default_search_script() {
  MotionScript s;
  s.waypoints = {
      {0.0, 1.2, 1.2, 0.0},
      {6.0, 4.8, 1.2, 0.0},
      {10.0, 4.8, 2.7, M_PI_2},
      {14.0, 8.5, 2.7, 0.0},     // through door 1 into bedroom 1
      {19.0, 9.8, 1.2, -0.8},
      {24.0, 9.8, 3.4, M_PI_2},
      {28.0, 7.2, 3.4, M_PI},    // back toward door 1
      {32.0, 5.0, 2.7, M_PI},
      {36.0, 5.0, 5.7, M_PI_2},  // up the living area toward door 2
      {40.0, 8.5, 5.7, 0.0},     // through door 2 into bedroom 2 (the dark one)
      {44.0, 9.8, 6.8, 0.7},
      {48.0, 8.0, 7.0, M_PI},
      {52.0, 5.2, 5.7, M_PI},
      {55.0, 3.0, 5.9, M_PI},
      {57.5, 3.0, 4.2, -M_PI_2},  // around the kitchen peninsula
      {60.0, 1.2, 1.6, -M_PI_2 - 0.5},
  };
  return s;
}

}  // namespace mio
