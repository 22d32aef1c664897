#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "mio/errors.hpp"

namespace mio {

// ============================================================================
// Vec3
// ============================================================================

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static Vec3 zero() { return {}; }
  static Vec3 unit_x() { return {1.0, 0.0, 0.0}; }
  static Vec3 unit_y() { return {0.0, 1.0, 0.0}; }
  static Vec3 unit_z() { return {0.0, 0.0, 1.0}; }

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double squared_norm() const { return dot(*this); }
  double norm() const { return std::sqrt(squared_norm()); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// ============================================================================
// Quat - unit quaternion (w, x, y, z), canonical sign w >= 0
// ============================================================================

struct Quat {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static Quat identity() { return {}; }

  static Quat from_axis_angle(const Vec3& axis, double angle) {
    const double n = axis.norm();
    if (n == 0.0) return identity();
    const double half = 0.5 * angle;
    const double s = std::sin(half) / n;
    return Quat{std::cos(half), axis.x * s, axis.y * s, axis.z * s}.normalized();
  }

  static Quat yaw(double angle) { return from_axis_angle(Vec3::unit_z(), angle); }

  // Hamilton product.
  Quat operator*(const Quat& o) const {
    return {w * o.w - x * o.x - y * o.y - z * o.z,
            w * o.x + x * o.w + y * o.z - z * o.y,
            w * o.y - x * o.z + y * o.w + z * o.x,
            w * o.z + x * o.y - y * o.x + z * o.w};
  }

  Quat conjugate() const { return {w, -x, -y, -z}; }

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

  // Unit norm plus canonical sign: q and -q are the same rotation, so the
  // representative with w > 0 is chosen (ties broken on x, then y, then z).
  Quat normalized() const {
    const double n = norm();
    Quat q{w / n, x / n, y / n, z / n};
    double lead = q.w;
    if (lead == 0.0) lead = (q.x != 0.0) ? q.x : (q.y != 0.0 ? q.y : q.z);
    if (lead < 0.0) q = {-q.w, -q.x, -q.y, -q.z};
    return q;
  }

  // v' = q * (0,v) * q^-1, expanded to avoid the full products.
  Vec3 rotate(const Vec3& v) const {
    const Vec3 im{x, y, z};
    const Vec3 t = 2.0 * im.cross(v);
    return v + w * t + im.cross(t);
  }

  Vec3 inverse_rotate(const Vec3& v) const { return conjugate().rotate(v); }

  // Rotation angle in [0, pi].
  double angle() const {
    const double c = std::min(1.0, std::abs(w) / norm());
    return 2.0 * std::acos(c);
  }
};

// ============================================================================
// PoseSE3 - rigid transform, rotation then translation
// ============================================================================

struct PoseSE3 {
  Quat rotation;
  Vec3 translation;

  static PoseSE3 identity() { return {}; }
  static PoseSE3 from_translation(double x, double y, double z) {
    return {Quat::identity(), {x, y, z}};
  }
  static PoseSE3 from_yaw(double angle, const Vec3& t = Vec3::zero()) {
    return {Quat::yaw(angle), t};
  }
};

// a then b applied in a's frame.
inline PoseSE3 compose(const PoseSE3& a, const PoseSE3& b) {
  return {(a.rotation * b.rotation).normalized(),
          a.translation + a.rotation.rotate(b.translation)};
}

inline PoseSE3 invert(const PoseSE3& p) {
  const Quat inv = p.rotation.conjugate().normalized();
  return {inv, inv.rotate(-p.translation)};
}

// R*x + t
inline Vec3 transform_point(const PoseSE3& p, const Vec3& v) {
  return p.rotation.rotate(v) + p.translation;
}

// ============================================================================
// SixDof - translation + intrinsic Z-Y-X euler (roll, pitch, yaw)
// ============================================================================

struct SixDof {
  Vec3 translation;
  Vec3 euler;  // (roll, pitch, yaw) radians

  double roll() const { return euler.x; }
  double pitch() const { return euler.y; }
  double yaw() const { return euler.z; }
};

// R = Rz(yaw) * Ry(pitch) * Rx(roll)
inline PoseSE3 pose_from_6dof(const SixDof& d) {
  const Quat q = Quat::yaw(d.yaw()) * Quat::from_axis_angle(Vec3::unit_y(), d.pitch()) *
                 Quat::from_axis_angle(Vec3::unit_x(), d.roll());
  return {q.normalized(), d.translation};
}

inline constexpr double kGimbalLockMargin = 1e-6;

// Inverse of pose_from_6dof. Throws GimbalLock within 1e-6 rad of pitch
// +-pi/2; targets that close to the singularity indicate an upstream bug.
inline SixDof sixdof_from_pose(const PoseSE3& p) {
  const Quat q = p.rotation.normalized();
  const double m00 = 1.0 - 2.0 * (q.y * q.y + q.z * q.z);
  const double m10 = 2.0 * (q.x * q.y + q.w * q.z);
  const double m20 = 2.0 * (q.x * q.z - q.w * q.y);
  const double m21 = 2.0 * (q.y * q.z + q.w * q.x);
  const double m22 = 1.0 - 2.0 * (q.x * q.x + q.y * q.y);

  const double s = std::min(1.0, std::max(-1.0, -m20));
  const double pitch = std::asin(s);
  if (M_PI_2 - std::abs(pitch) < kGimbalLockMargin)
    throw GimbalLock("sixdof_from_pose: pitch within 1e-6 of +-pi/2");

  return {p.translation, {std::atan2(m21, m22), pitch, std::atan2(m10, m00)}};
}

// ============================================================================
// Trajectory
// ============================================================================

struct TimedPose {
  double t = 0.0;
  PoseSE3 pose;
};

// Timestamps strictly increasing.
using Trajectory = std::vector<TimedPose>;

// Index of the entry whose timestamp is nearest to t (ties -> earlier).
inline std::size_t nearest_index(const Trajectory& traj, double t) {
  std::size_t lo = 0, hi = traj.size();
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (traj[mid].t <= t)
      lo = mid;
    else
      hi = mid;
  }
  if (lo + 1 < traj.size() && std::abs(traj[lo + 1].t - t) < std::abs(traj[lo].t - t)) ++lo;
  return lo;
}

// Chains per-frame relative motions onto an origin pose. Entry 0 is the
// origin at origin_time; entry k is compose(entry k-1, rel_motions[k-1]).
inline Trajectory accumulate(const PoseSE3& origin, double origin_time,
                             const std::vector<TimedPose>& rel_motions) {
  Trajectory out;
  out.reserve(rel_motions.size() + 1);
  out.push_back({origin_time, origin});
  double prev_t = origin_time;
  for (const TimedPose& rel : rel_motions) {
    if (rel.t <= prev_t)
      throw NonMonotonicTimestamps("accumulate: timestamps must strictly increase");
    out.push_back({rel.t, compose(out.back().pose, rel.pose)});
    prev_t = rel.t;
  }
  return out;
}

}  // namespace mio
