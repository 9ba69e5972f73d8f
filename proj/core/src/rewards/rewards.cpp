#include "atr/rewards/rewards.hpp"

#include <algorithm>
#include <cmath>

namespace atr::rewards {

bool RewardWeights::valid() const {
  return std::all_of(k.begin(), k.end(), [](double v) { return v >= 0.0; }) && h_des > 0.0 &&
         f_tol >= 0.0 && tracking_sigma > 0.0;
}

const std::array<std::string, kNumTerms>& term_names() {
  static const std::array<std::string, kNumTerms> names = {
      "forward_command", "steering_command", "position_alignment", "heading_alignment",
      "com_stabilization", "zmp_stabilization", "contact_maintenance", "height_maintenance",
      "tp_smoothness", "body_orientation", "body_velocity", "action_smoothness",
      "joint_smoothness", "postural_deviation", "energy_efficiency", "force_regulation",
      "collision_avoidance", "termination"};
  return names;
}

namespace {

double norm12(const std::array<double, 12>& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

double cross2(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

}  // namespace

std::array<double, 9> task_rewards(const RewardInputs& in, const RewardWeights& w) {
  const auto& k = w.k;
  std::array<double, 9> r{};
  r[0] = k[0] * std::exp(-std::abs(in.platform_forward_speed - in.cmd_v) / w.tracking_sigma);
  r[1] = k[1] * std::exp(-std::abs(in.platform_yaw_rate - in.cmd_w) / w.tracking_sigma);
  r[2] = -k[2] * (in.body_xy - in.platform_xy).norm();
  r[3] = -k[3] * std::abs(sim::wrap_angle(in.body_yaw - in.platform_yaw));

  const std::vector<Vec2> poly = support_polygon(in.foot_xy, in.contact);
  const bool com_inside = point_in_polygon(in.com_xy, poly);
  const Zmp z = zmp(in.foot_xy, in.normal_force);
  const bool zmp_inside = z.valid && point_in_polygon(z.point, poly);
  r[4] = com_inside ? 0.0 : -k[4];
  r[5] = zmp_inside ? 0.0 : -k[5];

  int contacts = 0;
  for (bool c : in.contact) contacts += c ? 1 : 0;
  r[6] = -k[6] * (4 - contacts);
  r[7] = -k[7] * std::abs((in.body_z - in.platform_z) - w.h_des);
  r[8] = -k[8] * (in.platform_linear_accel.norm() + in.platform_angular_accel.norm());
  return r;
}

std::array<double, 9> regularization_rewards(const RewardInputs& in, const RewardWeights& w) {
  const auto& k = w.k;
  std::array<double, 9> r{};
  r[0] = -k[9] * std::hypot(in.body_roll, in.body_pitch);
  r[1] = -k[10] * (in.body_rate.head<2>().norm() + std::abs(in.body_vz));

  std::array<double, 12> diff{}, posture{};
  double power = 0.0;
  for (int j = 0; j < 12; ++j) {
    diff[j] = in.action[j] - in.prev_action[j];
    posture[j] = in.q[j] - in.q0[j];
    power += std::max(in.tau[j] * in.dq[j], 0.0);
  }
  r[2] = -k[11] * norm12(diff);
  r[3] = -k[12] * norm12(in.tau) - k[13] * norm12(in.dq) - k[14] * norm12(in.ddq);
  r[4] = -k[15] * norm12(posture);
  r[5] = -k[16] * power;
  double excess = 0.0;
  for (double f : in.contact_force_norm) excess += std::max(f - w.f_tol, 0.0);
  r[6] = -k[17] * excess;
  r[7] = in.collision ? -k[18] : 0.0;
  r[8] = in.terminated ? -k[19] : 0.0;
  return r;
}

RewardTerms compute(const RewardInputs& in, const RewardWeights& w) {
  RewardTerms t{};
  const auto task = task_rewards(in, w);
  const auto reg = regularization_rewards(in, w);
  std::copy(task.begin(), task.end(), t.begin());
  std::copy(reg.begin(), reg.end(), t.begin() + 9);
  return t;
}

std::vector<Vec2> support_polygon(std::span<const Vec2> feet, std::span<const bool> contact) {
  std::vector<Vec2> pts;
  for (std::size_t i = 0; i < feet.size(); ++i) {
    if (contact[i]) pts.push_back(feet[i]);
  }
  if (pts.size() < 3) return {};
  // monotone chain
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t n = 0;
  for (const auto& p : pts) {
    while (n >= 2 && cross2(hull[n - 2], hull[n - 1], p) <= 0.0) --n;
    hull[n++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = n + 1; i-- > 0;) {
    while (n >= lower && cross2(hull[n - 2], hull[n - 1], pts[i]) <= 0.0) --n;
    hull[n++] = pts[i];
  }
  hull.resize(n - 1);
  if (hull.size() < 3) return {};
  return hull;
}

bool point_in_polygon(const Vec2& pt, std::span<const Vec2> poly, double tol) {
  if (poly.size() < 3) return false;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    if (cross2(a, b, pt) < -tol) return false;
  }
  return true;
}

Zmp zmp(std::span<const Vec2> feet, std::span<const double> normal_force) {
  Zmp z;
  double total_n = 0.0;
  Vec2 acc = Vec2::Zero();
  for (std::size_t i = 0; i < feet.size(); ++i) {
    const double n = std::max(normal_force[i], 0.0);
    total_n += n;
    acc += n * feet[i];
  }
  if (total_n < 1.0) return z;
  z.point = acc / total_n;
  z.valid = true;
  return z;
}

}  // namespace atr::rewards
