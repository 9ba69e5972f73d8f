#include "atr/sim/integrate.hpp"

#include <cmath>

namespace atr::sim {

std::optional<RigidState> integrate_semi_implicit(const RigidState& s,
                                                  const Vec3& linear_accel,
                                                  const Vec3& angular_accel_body,
                                                  double dt) {
  if (!linear_accel.allFinite() || !angular_accel_body.allFinite()) {
    return std::nullopt;
  }
  RigidState out = s;
  out.velocity = s.velocity + linear_accel * dt;
  out.position = s.position + out.velocity * dt;
  out.body_rate = s.body_rate + angular_accel_body * dt;
  const Vec3 rates = body_to_euler_rate(s.orientation) * out.body_rate;
  out.orientation = EulerXYZ::from_vec(s.orientation.as_vec() + rates * dt);
  return out;
}

std::optional<ScalarState> integrate_semi_implicit(const ScalarState& s,
                                                   double accel, double dt) {
  if (!std::isfinite(accel)) return std::nullopt;
  ScalarState out;
  out.velocity = s.velocity + accel * dt;
  out.position = s.position + out.velocity * dt;
  return out;
}

}  // namespace atr::sim
