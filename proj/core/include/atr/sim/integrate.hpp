#pragma once

#include <optional>

#include "atr/sim/math.hpp"

namespace atr::sim {

inline constexpr double kDefaultPhysicsDt = 0.002;
inline constexpr int kDefaultDecimation = 10;

/// Floating rigid-body kinematic state: world position and velocity, Euler
/// orientation, and body-frame angular velocity.
struct RigidState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  EulerXYZ orientation;
  Vec3 body_rate = Vec3::Zero();
};

/// Semi-implicit Euler: velocities first, then positions with the updated
/// velocities. Orientation advances by the Euler rates obtained from the new
/// body rate through body_to_euler_rate. Returns nullopt when any input
/// acceleration is non-finite.
std::optional<RigidState> integrate_semi_implicit(const RigidState& s,
                                                  const Vec3& linear_accel,
                                                  const Vec3& angular_accel_body,
                                                  double dt);

/// Scalar variant, returns {position, velocity}.
struct ScalarState {
  double position = 0.0;
  double velocity = 0.0;
};
std::optional<ScalarState> integrate_semi_implicit(const ScalarState& s,
                                                   double accel, double dt);

}  // namespace atr::sim
