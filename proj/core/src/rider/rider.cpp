#include "atr/rider/rider.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <stdexcept>

namespace atr::rider {

using transporter::DeckFrame;

Vec3 RiderParams::com_offset() const {
  return payload_mass * com_shift / total_mass();
}

Vec3 RiderParams::inertia_about_com() const {
  // trunk about the shifted center plus the point payload, diagonal terms only
  const Vec3 c = com_offset();
  const Vec3 d = com_shift - c;
  Vec3 out = body_inertia;
  out.x() += body_mass * (c.y() * c.y() + c.z() * c.z()) + payload_mass * (d.y() * d.y() + d.z() * d.z());
  out.y() += body_mass * (c.x() * c.x() + c.z() * c.z()) + payload_mass * (d.x() * d.x() + d.z() * d.z());
  out.z() += body_mass * (c.x() * c.x() + c.y() * c.y()) + payload_mass * (d.x() * d.x() + d.y() * d.y());
  return out;
}

double RiderParams::standing_height() const {
  double h = 0.0;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    h = std::max(h, -leg_fk(leg_slice(q0, leg), leg, *this).z());
  }
  return h;
}

bool RiderParams::valid() const {
  return body_mass > 0 && (body_inertia.array() > 0).all() && l_ab > 0 && l_thigh > 0 &&
         l_shank > 0 && (pd_kp.array() > 0).all() && (pd_kd.array() > 0).all() &&
         joint_inertia > 0 && tau_max > 0 && payload_mass >= 0 &&
         (q0.array() >= q_min.array()).all() && (q0.array() <= q_max.array()).all();
}

namespace {

// Hip flexion that puts the foot straight below the hip for a given knee.
double hip_for_vertical_foot(double l_thigh, double l_shank, double knee) {
  return std::atan2(-l_shank * std::sin(knee), l_thigh + l_shank * std::cos(knee));
}

RiderParams make_preset(const std::string& name, double mass, Vec3 trunk, double hip_x,
                        double hip_y, double l_ab, double l_thigh, double l_shank, double knee,
                        double tau_max, double gain_unit, double joint_inertia) {
  RiderParams p;
  p.name = name;
  p.body_mass = mass;
  p.trunk_dims = trunk;
  const double l2 = trunk.x() * trunk.x(), w2 = trunk.y() * trunk.y(), h2 = trunk.z() * trunk.z();
  p.body_inertia = Vec3(w2 + h2, l2 + h2, l2 + w2) * mass / 12.0;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const double fx = (leg == kFrontRight || leg == kFrontLeft) ? 1.0 : -1.0;
    p.hip_offsets[leg] = Vec3(fx * hip_x, leg_side(leg) * hip_y, 0.0);
  }
  p.l_ab = l_ab;
  p.l_thigh = l_thigh;
  p.l_shank = l_shank;
  const double hip = hip_for_vertical_foot(l_thigh, l_shank, knee);
  for (int leg = 0; leg < kNumLegs; ++leg) {
    p.q0.segment<3>(3 * leg) = LegVec(0.0, hip, knee);
    p.q_min.segment<3>(3 * leg) = LegVec(-0.8, -1.0, -2.7);
    p.q_max.segment<3>(3 * leg) = LegVec(0.8, 2.5, -0.5);
  }
  p.tau_max = tau_max;
  p.pd_gain_unit = gain_unit;
  p.pd_kp = JointVec::Constant(40.0 * gain_unit);
  p.pd_kd = JointVec::Constant(1.0 * gain_unit);
  p.joint_inertia = joint_inertia;
  return p;
}

}  // namespace

RiderParams preset(const std::string& name) {
  // Masses and bounding boxes follow the robot table; link lengths and hip
  // placements are representative proportions for each platform.
  if (name == "a1") {
    return make_preset(name, 11.74, {0.36, 0.20, 0.10}, 0.183, 0.047, 0.08, 0.2, 0.2, -1.5,
                       33.5, 1.0, 0.02);
  }
  if (name == "go1") {
    return make_preset(name, 12.14, {0.38, 0.19, 0.10}, 0.1881, 0.0468, 0.08, 0.213, 0.213,
                       -1.5, 33.5, 1.0, 0.02);
  }
  if (name == "anymalc") {
    return make_preset(name, 43.51, {0.60, 0.30, 0.20}, 0.30, 0.10, 0.10, 0.285, 0.35, -1.4,
                       80.0, 4.0, 0.08);
  }
  if (name == "spot") {
    return make_preset(name, 32.60, {0.60, 0.30, 0.15}, 0.29, 0.055, 0.11, 0.32, 0.33, -1.6,
                       80.0, 4.0, 0.08);
  }
  throw std::invalid_argument("unknown robot preset '" + name +
                              "' (expected a1|go1|anymalc|spot)");
}

std::string group_of(const std::string& name) {
  if (name == "a1" || name == "go1") return "g1";
  if (name == "anymalc" || name == "spot") return "g2";
  throw std::invalid_argument("unknown robot preset '" + name + "'");
}

Vec3 RiderState::base_position(const RiderParams& p) const {
  return com_position - rotation() * p.com_offset();
}

Vec3 RiderState::base_velocity(const RiderParams& p) const {
  return com_velocity + rotation() * body_rate.cross(-p.com_offset());
}

bool RiderState::finite() const {
  return com_position.allFinite() && com_velocity.allFinite() &&
         orientation.as_vec().allFinite() && body_rate.allFinite() && q.allFinite() &&
         dq.allFinite();
}

LegVec leg_fk(const LegVec& q, int leg, const RiderParams& p) {
  const double side = leg_side(leg);
  const double h = q.y(), hk = q.y() + q.z();
  const Vec3 u(-p.l_thigh * std::sin(h) - p.l_shank * std::sin(hk), side * p.l_ab,
               -p.l_thigh * std::cos(h) - p.l_shank * std::cos(hk));
  return p.hip_offsets[leg] + sim::rot_x(q.x()) * u;
}

LegJacobian leg_jacobian(const LegVec& q, int leg, const RiderParams& p) {
  const double side = leg_side(leg);
  const double h = q.y(), hk = q.y() + q.z();
  const double ca = std::cos(q.x()), sa = std::sin(q.x());
  const Vec3 u(-p.l_thigh * std::sin(h) - p.l_shank * std::sin(hk), side * p.l_ab,
               -p.l_thigh * std::cos(h) - p.l_shank * std::cos(hk));
  Mat3 drx;
  drx << 0.0, 0.0, 0.0, 0.0, -sa, -ca, 0.0, ca, -sa;
  const Mat3 rx = sim::rot_x(q.x());
  LegJacobian j;
  j.col(0) = drx * u;
  j.col(1) = rx * Vec3(-p.l_thigh * std::cos(h) - p.l_shank * std::cos(hk), 0.0,
                       p.l_thigh * std::sin(h) + p.l_shank * std::sin(hk));
  j.col(2) = rx * Vec3(-p.l_shank * std::cos(hk), 0.0, p.l_shank * std::sin(hk));
  return j;
}

Vec3 foot_from_com(const RiderState& s, const RiderParams& p, int leg) {
  return leg_fk(leg_slice(s.q, leg), leg, p) - p.com_offset();
}

Vec3 foot_world(const RiderState& s, const RiderParams& p, int leg) {
  return s.com_position + s.rotation() * foot_from_com(s, p, leg);
}

Vec3 foot_velocity_world(const RiderState& s, const RiderParams& p, int leg) {
  const Vec3 r = foot_from_com(s, p, leg);
  const LegJacobian j = leg_jacobian(leg_slice(s.q, leg), leg, p);
  return s.com_velocity + s.rotation() * (s.body_rate.cross(r) + j * leg_slice(s.dq, leg));
}

FootContacts compute_contacts(const RiderState& s, const RiderParams& p,
                              const std::vector<DeckFrame>& decks, transporter::Kind kind,
                              double friction) {
  FootContacts out;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    FootContact& c = out[leg];
    c.deck = transporter::deck_for_foot(kind, leg);
    const DeckFrame& d = decks[c.deck];
    c.world_position = foot_world(s, p, leg);
    c.local_position = d.to_local(c.world_position);
    const double depth = d.surface_offset - c.local_position.z();
    if (depth <= 0.0 || !d.contains_xy(c.local_position)) continue;

    const Vec3 n = d.rotation.col(2);
    const Vec3 v_rel = foot_velocity_world(s, p, leg) - d.point_velocity(c.world_position);
    const double vn = v_rel.dot(n);
    const double fn = p.contact_k * depth - p.contact_d * vn;
    if (fn <= 0.0) continue;

    const Mat3 nn = n * n.transpose();
    const Mat3 tangent_proj = Mat3::Identity() - nn;
    const Vec3 vt = tangent_proj * v_rel;
    const double speed_t = vt.norm();
    const double cap = friction * fn;
    Vec3 ft;
    Mat3 dt_mat;
    if (speed_t < p.v_slip) {
      const double slope = cap / p.v_slip;
      ft = -slope * vt;
      dt_mat = slope * tangent_proj;
    } else {
      const Vec3 t = vt / speed_t;
      ft = -cap * t;
      dt_mat = (cap / speed_t) * (tangent_proj - t * t.transpose());
    }
    c.normal_force = fn;
    c.force = fn * n + ft;
    c.damping = p.contact_d * nn + dt_mat;
    c.in_contact = fn > p.contact_threshold;
  }
  return out;
}

transporter::WrenchSet to_wrenches(const FootContacts& c, const std::vector<DeckFrame>& decks) {
  transporter::WrenchSet w;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const DeckFrame& d = decks[c[leg].deck];
    w[leg].point = c[leg].local_position;
    w[leg].force = d.rotation.transpose() * (-c[leg].force);
    w[leg].in_contact = c[leg].normal_force > 0.0;
  }
  return w;
}

bool trunk_collision(const RiderState& s, const RiderParams& p, const std::vector<DeckFrame>& decks) {
  const Mat3 r = s.rotation();
  const Vec3 base = s.base_position(p);
  const Vec3 half = 0.5 * p.trunk_dims;
  for (int i = 0; i < 8; ++i) {
    const Vec3 corner((i & 1 ? 1 : -1) * half.x(), (i & 2 ? 1 : -1) * half.y(),
                      (i & 4 ? 1 : -1) * half.z());
    const Vec3 w = base + r * corner;
    for (const auto& d : decks) {
      const Vec3 local = d.to_local(w);
      if (d.contains_xy(local) && local.z() <= d.surface_offset) return true;
    }
  }
  return false;
}

JointVec pd_torque(const RiderState& s, const RiderParams& p, const JointVec& q_target) {
  const JointVec raw = p.pd_kp.cwiseProduct(q_target - s.q) - p.pd_kd.cwiseProduct(s.dq);
  return raw.cwiseMax(-p.tau_max).cwiseMin(p.tau_max);
}

std::optional<RiderStep> step_rider(const RiderState& s, const RiderParams& p,
                                    const JointVec& q_target, const FootContacts& contacts,
                                    double dt, const Vec3& push) {
  constexpr int N = 6 + kNumJoints;
  using VecN = Eigen::Matrix<double, N, 1>;
  using MatN = Eigen::Matrix<double, N, N>;
  using Map3N = Eigen::Matrix<double, 3, N>;

  const Mat3 rot = s.rotation();
  const double mass = p.total_mass();
  const Vec3 inertia = p.inertia_about_com();

  const JointVec raw = p.pd_kp.cwiseProduct(q_target - s.q) - p.pd_kd.cwiseProduct(s.dq);
  const JointVec tau = raw.cwiseMax(-p.tau_max).cwiseMin(p.tau_max);

  VecN u;
  u << s.com_velocity, s.body_rate, s.dq;

  VecN f = VecN::Zero();
  f.segment<3>(0) = Vec3(0.0, 0.0, -sim::kGravity * mass) + push;
  f.segment<3>(3) = -s.body_rate.cross(inertia.cwiseProduct(s.body_rate));
  f.segment<kNumJoints>(6) = tau;

  MatN lhs = MatN::Zero();
  for (int i = 0; i < 3; ++i) {
    lhs(i, i) = mass;
    lhs(3 + i, 3 + i) = inertia[i];
  }
  for (int j = 0; j < kNumJoints; ++j) {
    lhs(6 + j, 6 + j) = p.joint_inertia;
    if (std::abs(raw[j]) < p.tau_max) lhs(6 + j, 6 + j) += dt * p.pd_kd[j];
  }

  std::array<Map3N, kNumLegs> maps;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const FootContact& c = contacts[leg];
    Map3N& g = maps[leg];
    g.setZero();
    if (c.normal_force <= 0.0) continue;
    const Vec3 r = foot_from_com(s, p, leg);
    const LegJacobian jac = leg_jacobian(leg_slice(s.q, leg), leg, p);
    g.block<3, 3>(0, 0).setIdentity();
    g.block<3, 3>(0, 3) = -rot * sim::skew(r);
    g.block<3, 3>(0, 6 + 3 * leg) = rot * jac;
    f += g.transpose() * c.force;
    lhs.noalias() += dt * g.transpose() * c.damping * g;
  }

  const VecN du = lhs.llt().solve(dt * f);
  if (!du.allFinite()) return std::nullopt;

  RiderStep out;
  out.contacts = contacts;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    FootContact& c = out.contacts[leg];
    if (c.normal_force <= 0.0) continue;
    c.force = c.force - c.damping * (maps[leg] * du);
  }

  RiderState& n = out.state;
  n = s;
  n.com_velocity = s.com_velocity + du.segment<3>(0);
  n.body_rate = s.body_rate + du.segment<3>(3);
  n.dq = s.dq + du.segment<kNumJoints>(6);
  n.com_position = s.com_position + n.com_velocity * dt;
  const Vec3 rates = sim::body_to_euler_rate(s.orientation) * n.body_rate;
  n.orientation = EulerXYZ::from_vec(s.orientation.as_vec() + rates * dt);
  n.q = s.q + n.dq * dt;
  for (int j = 0; j < kNumJoints; ++j) {
    if (n.q[j] < p.q_min[j]) {
      n.q[j] = p.q_min[j];
      n.dq[j] = std::max(n.dq[j], 0.0);
    } else if (n.q[j] > p.q_max[j]) {
      n.q[j] = p.q_max[j];
      n.dq[j] = std::min(n.dq[j], 0.0);
    }
  }
  n.tau = tau;
  n.ddq = du.segment<kNumJoints>(6) / dt;
  if (!n.finite()) return std::nullopt;
  return out;
}

Vec3 accelerometer(const RiderState& s, const RiderParams& p, double dt_ctrl) {
  const Vec3 a = (s.base_velocity(p) - s.prev_base_velocity) / dt_ctrl;
  return s.rotation().transpose() * (a - Vec3(0.0, 0.0, -sim::kGravity));
}

RiderState standing_state(const RiderParams& p, const Vec3& xy_center, double surface_z,
                          double yaw) {
  RiderState s;
  s.q = p.q0;
  s.orientation.yaw = yaw;
  const Vec3 base(xy_center.x(), xy_center.y(), surface_z + p.standing_height());
  s.com_position = base + s.rotation() * p.com_offset();
  return s;
}

double kinetic_energy(const RiderState& s, const RiderParams& p) {
  const Vec3 inertia = p.inertia_about_com();
  return 0.5 * p.total_mass() * s.com_velocity.squaredNorm() +
         0.5 * s.body_rate.dot(inertia.cwiseProduct(s.body_rate)) +
         0.5 * p.joint_inertia * s.dq.squaredNorm();
}

}  // namespace atr::rider
