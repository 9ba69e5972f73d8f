#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "atr/sim/math.hpp"

namespace atr::rewards {

using sim::Vec2;
using sim::Vec3;

inline constexpr int kNumTerms = 18;
inline constexpr int kNumWeights = 20;

/// Weights k0..k19 of the reward table, plus the desired body height and the
/// tolerated contact force.
struct RewardWeights {
  std::array<double, kNumWeights> k = {8.0,  8.0,  30.0, 4.0,  1.0,  1.0,  2.0,
                                       1.0,  1.0,  0.9,  1e-3, 1e-5, 1e-4, 1e-4,
                                       1e-7, 1e-2, 1e-4, 1e-2, 10.0, 10.0};
  double h_des = 0.286;
  double f_tol = 100.0;
  /// Length scale of the exponential tracking kernels.
  double tracking_sigma = 0.5;

  bool valid() const;
};

using RewardTerms = std::array<double, kNumTerms>;

inline double total(const RewardTerms& t) {
  double s = 0.0;
  for (double v : t) s += v;
  return s;
}

/// Human-readable term names r0..r17, in order.
const std::array<std::string, kNumTerms>& term_names();

/// Everything the reward table reads, already expressed in the frames the
/// terms need.
struct RewardInputs {
  // tracking, planar platform frame
  double platform_forward_speed = 0.0;
  double platform_yaw_rate = 0.0;
  double cmd_v = 0.0;
  double cmd_w = 0.0;
  // alignment, world frame
  Vec2 body_xy = Vec2::Zero();
  Vec2 platform_xy = Vec2::Zero();
  double body_yaw = 0.0;
  double platform_yaw = 0.0;
  // stability, platform frame planar coordinates
  Vec2 com_xy = Vec2::Zero();
  std::array<Vec2, 4> foot_xy{};
  std::array<double, 4> normal_force{};
  std::array<bool, 4> contact{};
  std::array<double, 4> contact_force_norm{};
  // height, world z
  double body_z = 0.0;
  double platform_z = 0.0;
  // platform smoothness
  Vec3 platform_linear_accel = Vec3::Zero();
  Vec3 platform_angular_accel = Vec3::Zero();
  // regularization
  double body_roll = 0.0;
  double body_pitch = 0.0;
  Vec3 body_rate = Vec3::Zero();  // body frame
  double body_vz = 0.0;           // world frame
  std::array<double, 12> action{};
  std::array<double, 12> prev_action{};
  std::array<double, 12> tau{};
  std::array<double, 12> dq{};
  std::array<double, 12> ddq{};
  std::array<double, 12> q{};
  std::array<double, 12> q0{};
  bool collision = false;
  bool terminated = false;
};

/// r0..r8.
std::array<double, 9> task_rewards(const RewardInputs& in, const RewardWeights& w);
/// r9..r17.
std::array<double, 9> regularization_rewards(const RewardInputs& in, const RewardWeights& w);
RewardTerms compute(const RewardInputs& in, const RewardWeights& w);

/// Convex hull of the contacting feet, counterclockwise. Empty with fewer
/// than three contacts.
std::vector<Vec2> support_polygon(std::span<const Vec2> feet, std::span<const bool> contact);

/// Half-plane test against a counterclockwise convex polygon; the boundary
/// counts as inside. Polygons with fewer than three vertices contain nothing.
bool point_in_polygon(const Vec2& pt, std::span<const Vec2> poly, double tol = 1e-12);

struct Zmp {
  Vec2 point = Vec2::Zero();
  bool valid = false;
};

/// Center of pressure of the normal forces on a flat support. Invalid when
/// the total normal force is below 1 N.
Zmp zmp(std::span<const Vec2> feet, std::span<const double> normal_force);

}  // namespace atr::rewards
