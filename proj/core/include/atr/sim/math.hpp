#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>

namespace atr::sim {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kGravity = 9.81;

/// Roll/pitch/yaw in radians. The rotation they describe is the extrinsic
/// x-y-z composition R = Rz(yaw) * Ry(pitch) * Rx(roll): a body vector is
/// rolled about world x first, then pitched about world y, then yawed about
/// world z.
struct EulerXYZ {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;

  Vec3 as_vec() const { return {roll, pitch, yaw}; }
  static EulerXYZ from_vec(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
};

Mat3 rot_x(double angle);
Mat3 rot_y(double angle);
Mat3 rot_z(double angle);

Mat3 euler_to_rot(const EulerXYZ& e);

/// Inverse of euler_to_rot on the principal branch |pitch| < pi/2.
EulerXYZ rot_to_euler(const Mat3& r);

/// Maps Euler-angle rates (roll, pitch, yaw rates) to the body-frame angular
/// velocity: omega_body = E(e) * euler_rates.
Mat3 euler_rate_to_body(const EulerXYZ& e);

/// Inverse of euler_rate_to_body. Singular at |pitch| = pi/2.
Mat3 body_to_euler_rate(const EulerXYZ& e);

/// Maps Euler-angle rates to the world-frame angular velocity.
Mat3 euler_rate_to_world(const EulerXYZ& e);

/// Clamp to [-1, 1].
inline double clip_unit(double x) { return x < -1.0 ? -1.0 : (x > 1.0 ? 1.0 : x); }

/// -1 for negative inputs, +1 otherwise (sgn(0) = +1).
inline double sgn(double x) { return x < 0.0 ? -1.0 : 1.0; }

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

}  // namespace atr::sim
