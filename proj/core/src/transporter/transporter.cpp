#include "atr/transporter/transporter.hpp"

#include <cmath>
#include <stdexcept>

namespace atr::transporter {

using sim::clip_unit;
using sim::sgn;

std::string to_string(Kind k) { return k == Kind::kType1 ? "type1" : "type2"; }

Kind kind_from_string(const std::string& s) {
  if (s == "type1" || s == "1") return Kind::kType1;
  if (s == "type2" || s == "2") return Kind::kType2;
  throw std::invalid_argument("unknown transporter kind '" + s + "' (expected type1|type2)");
}

Vec3 TransporterParams::inertia() const {
  const double l2 = length * length, w2 = width * width, h2 = height * height;
  return {mass * (w2 + h2) / 12.0, mass * (l2 + h2) / 12.0, mass * (l2 + w2) / 12.0};
}

Vec3 TransporterParams::half_inertia() const {
  const double m = 0.5 * mass;
  const double l2 = length * length, w2 = 0.25 * width * width, h2 = height * height;
  return {m * (w2 + h2) / 12.0, m * (l2 + h2) / 12.0, m * (l2 + w2) / 12.0};
}

double TransporterParams::yaw_inertia() const {
  if (kind == Kind::kType1) return inertia().z();
  // parallel-axis theorem, boards centered +-W/4 from the pivot
  const double offset = 0.25 * width;
  const double board = half_inertia().z();
  return (board + mass_left() * offset * offset) + (board + mass_right() * offset * offset);
}

bool TransporterParams::valid() const {
  return mass > 0 && length > 0 && width > 0 && height > 0 && max_forward_accel > 0 &&
         max_yaw_accel > 0 && tilt_norm > 0 && (sb_kp.array() > 0).all() &&
         (sb_kd.array() > 0).all() && friction > 0 && alt_kp > 0 && alt_kd > 0;
}

Vec3 TransporterState::linear_velocity() const {
  return {forward_speed * std::cos(orientation.yaw), forward_speed * std::sin(orientation.yaw),
          vertical_speed};
}

Vec3 TransporterState::angular_velocity() const {
  return sim::euler_rate_to_world(orientation) * euler_rate;
}

bool TransporterState::finite() const {
  return position.allFinite() && orientation.as_vec().allFinite() && euler_rate.allFinite() &&
         std::isfinite(forward_speed) && std::isfinite(vertical_speed) &&
         std::isfinite(pitch_left) && std::isfinite(pitch_right) &&
         std::isfinite(pitch_rate_left) && std::isfinite(pitch_rate_right);
}

std::vector<DeckFrame> deck_frames(const TransporterState& s, const TransporterParams& p) {
  std::vector<DeckFrame> out;
  const Vec3 v = s.linear_velocity();
  if (p.kind == Kind::kType1) {
    DeckFrame d;
    d.origin = s.position;
    d.rotation = sim::euler_to_rot(s.orientation);
    d.linear_velocity = v;
    d.angular_velocity = s.angular_velocity();
    d.half_length = 0.5 * p.length;
    d.half_width = 0.5 * p.width;
    d.surface_offset = 0.5 * p.height;
    out.push_back(d);
    return out;
  }
  const Mat3 yaw = sim::rot_z(s.orientation.yaw);
  const double yaw_rate = s.euler_rate.z();
  const double offset = 0.25 * p.width;
  const auto board = [&](double side, double pitch, double pitch_rate) {
    DeckFrame d;
    const Vec3 arm = yaw * Vec3(0.0, side * offset, 0.0);
    d.origin = s.position + arm;
    d.rotation = yaw * sim::rot_y(pitch);
    d.linear_velocity = v + Vec3(0.0, 0.0, yaw_rate).cross(arm);
    d.angular_velocity = Vec3(0.0, 0.0, yaw_rate) + yaw * Vec3(0.0, pitch_rate, 0.0);
    d.half_length = 0.5 * p.length;
    d.half_width = 0.25 * p.width;
    d.surface_offset = 0.5 * p.height;
    return d;
  };
  out.push_back(board(-1.0, s.pitch_right, s.pitch_rate_right));
  out.push_back(board(+1.0, s.pitch_left, s.pitch_rate_left));
  return out;
}

int deck_for_foot(Kind kind, int foot) {
  if (kind == Kind::kType1) return 0;
  return foot < 2 ? 0 : 1;
}

double resistance(double speed, const Resistance& r, double drive) {
  if (speed == 0.0) {
    return sgn(drive) * std::min(r.r0, std::abs(drive));
  }
  const double a = std::abs(speed);
  return sgn(speed) * (r.r0 + r.r1 * a + r.r2 * a * a);
}

Vec3 platform_torque(std::span<const ContactWrench> wrenches) {
  Vec3 tau = Vec3::Zero();
  for (const auto& w : wrenches) {
    if (w.in_contact) tau += w.point.cross(w.force);
  }
  return tau;
}

PitchSplit split_pitch(double pitch_right, double pitch_left) {
  return {0.5 * (pitch_right + pitch_left), 0.5 * (pitch_right - pitch_left)};
}

namespace {

// Velocity update for one resisted, drive-controlled coordinate. A platform
// whose drive does not exceed static resistance comes to rest instead of
// reversing.
double advance_driven(double v, double drive, double inertia, const Resistance& r, double dt) {
  const double a = (drive - resistance(v, r, drive)) / inertia;
  double v_new = v + a * dt;
  if (v != 0.0 && std::abs(drive) <= r.r0 && (v_new == 0.0 || (v > 0.0) != (v_new > 0.0))) {
    v_new = 0.0;
  }
  return v_new;
}

struct Common {
  double forward_speed;
  double yaw_rate;
  double vertical_speed;
};

Common advance_planar(const TransporterState& s, const TransporterParams& p, double tilt_fwd,
                      double tilt_turn, const ExternalLoad& load, double mass, double dt) {
  Common c;
  const double drive = p.max_forward_accel * clip_unit(tilt_fwd / p.tilt_norm) + load.forward_force;
  c.forward_speed = advance_driven(s.forward_speed, drive, mass, p.resist, dt);
  const double steer =
      p.max_yaw_accel * sgn(tilt_fwd) * clip_unit(-tilt_turn / p.tilt_norm);
  c.yaw_rate = advance_driven(s.euler_rate.z(), steer, p.yaw_inertia(), p.resist, dt);
  const double az = p.alt_kp * (p.z_nominal - s.position.z()) - p.alt_kd * s.vertical_speed;
  c.vertical_speed = s.vertical_speed + az * dt;
  return c;
}

void finish(const TransporterState& before, TransporterState& after, double dt) {
  after.position.x() += after.forward_speed * std::cos(before.orientation.yaw) * dt;
  after.position.y() += after.forward_speed * std::sin(before.orientation.yaw) * dt;
  after.position.z() += after.vertical_speed * dt;
  after.linear_accel = (after.linear_velocity() - before.linear_velocity()) / dt;
  after.angular_accel = (after.angular_velocity() - before.angular_velocity()) / dt;
}

}  // namespace

std::optional<TransporterState> step_type1(const TransporterState& s,
                                           const TransporterParams& p, const WrenchSet& w,
                                           double dt, const ExternalLoad& load) {
  const Vec3 tau = platform_torque(w) + load.torque[0];
  const Vec3 inertia = p.inertia();
  const double roll = s.orientation.roll, pitch = s.orientation.pitch;

  const double roll_acc = (-p.sb_kp.x() * roll - p.sb_kd.x() * s.euler_rate.x() + tau.x()) / inertia.x();
  const double pitch_acc = (-p.sb_kp.y() * pitch - p.sb_kd.y() * s.euler_rate.y() + tau.y()) / inertia.y();
  if (!std::isfinite(roll_acc) || !std::isfinite(pitch_acc) || !tau.allFinite()) return std::nullopt;

  const Common c = advance_planar(s, p, pitch, roll, load, p.mass, dt);

  TransporterState out = s;
  out.forward_speed = c.forward_speed;
  out.vertical_speed = c.vertical_speed;
  out.euler_rate = {s.euler_rate.x() + roll_acc * dt, s.euler_rate.y() + pitch_acc * dt, c.yaw_rate};
  out.orientation = EulerXYZ::from_vec(s.orientation.as_vec() + out.euler_rate * dt);
  finish(s, out, dt);
  if (!out.finite()) return std::nullopt;
  return out;
}

std::optional<TransporterState> step_type2(const TransporterState& s,
                                           const TransporterParams& p, const WrenchSet& w,
                                           double dt, const ExternalLoad& load) {
  const Vec3 tau_right = platform_torque(std::span(w).subspan(0, 2)) + load.torque[0];
  const Vec3 tau_left = platform_torque(std::span(w).subspan(2, 2)) + load.torque[1];
  const double iyy = p.half_inertia().y();

  const double acc_right =
      (-p.sb_kp.x() * s.pitch_right - p.sb_kd.x() * s.pitch_rate_right + tau_right.y()) / iyy;
  const double acc_left =
      (-p.sb_kp.y() * s.pitch_left - p.sb_kd.y() * s.pitch_rate_left + tau_left.y()) / iyy;
  if (!std::isfinite(acc_right) || !std::isfinite(acc_left)) return std::nullopt;

  const PitchSplit split = split_pitch(s.pitch_right, s.pitch_left);
  const Common c = advance_planar(s, p, split.average, split.differential, load,
                                  p.mass_left() + p.mass_right(), dt);

  TransporterState out = s;
  out.forward_speed = c.forward_speed;
  out.vertical_speed = c.vertical_speed;
  out.pitch_rate_right = s.pitch_rate_right + acc_right * dt;
  out.pitch_rate_left = s.pitch_rate_left + acc_left * dt;
  out.pitch_right = s.pitch_right + out.pitch_rate_right * dt;
  out.pitch_left = s.pitch_left + out.pitch_rate_left * dt;
  const PitchSplit next = split_pitch(out.pitch_right, out.pitch_left);
  out.euler_rate = {0.0, 0.5 * (out.pitch_rate_right + out.pitch_rate_left), c.yaw_rate};
  out.orientation.roll = 0.0;
  out.orientation.pitch = next.average;
  out.orientation.yaw = s.orientation.yaw + c.yaw_rate * dt;
  finish(s, out, dt);
  if (!out.finite()) return std::nullopt;
  return out;
}

std::optional<TransporterState> step(const TransporterState& s, const TransporterParams& p,
                                     const WrenchSet& w, double dt, const ExternalLoad& load) {
  return p.kind == Kind::kType1 ? step_type1(s, p, w, dt, load) : step_type2(s, p, w, dt, load);
}

double steady_state_speed(double tilt, const TransporterParams& p) {
  const double drive = p.max_forward_accel * clip_unit(tilt / p.tilt_norm);
  const auto& r = p.resist;
  if (std::abs(drive) <= r.r0) return 0.0;
  // r2 v^2 + r1 v + (r0 - |drive|) = 0, positive root
  const double c = r.r0 - std::abs(drive);
  const double v = (-r.r1 + std::sqrt(r.r1 * r.r1 - 4.0 * r.r2 * c)) / (2.0 * r.r2);
  return sgn(drive) * v;
}

TransporterState rest_state(const TransporterParams& p) {
  TransporterState s;
  s.position = {0.0, 0.0, p.z_nominal};
  return s;
}

SbGainUnit sb_gain_unit(const std::string& group) {
  if (group == "g1") return {40.0, 100.0};
  if (group == "g2") return {200.0, 500.0};
  throw std::invalid_argument("unknown transporter group '" + group + "' (expected g1|g2)");
}

TransporterParams preset(const std::string& group, Kind kind) {
  TransporterParams p;
  p.kind = kind;
  if (group == "g1") {
    p.mass = 11.5;
    p.length = 0.9;
    p.width = 0.7;
  } else if (group == "g2") {
    p.mass = 30.0;
    p.length = 1.5;
    p.width = 1.1;
  } else {
    throw std::invalid_argument("unknown transporter group '" + group + "' (expected g1|g2)");
  }
  p.height = 0.05;
  const SbGainUnit unit = sb_gain_unit(group);
  // midpoints of the training ranges
  p.sb_kp = Vec2::Constant(1.15 * unit.kp);
  p.sb_kd = Vec2::Constant(0.025 * unit.kd);
  return p;
}

}  // namespace atr::transporter
