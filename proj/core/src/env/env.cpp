#include "atr/env/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace atr::env {

namespace {

constexpr std::uint64_t kEnvStreamBase = 0x1000;

Vec3 random_direction(sim::Rng& rng) {
  for (;;) {
    Vec3 d(rng.normal(), rng.normal(), rng.normal());
    const double n = d.norm();
    if (n > 1e-9) return d / n;
  }
}

/// Pivot frame rotation (deck frame for Type-1).
sim::Mat3 pivot_rotation(const transporter::TransporterState& ts) {
  return sim::euler_to_rot(ts.orientation);
}

}  // namespace

std::string to_string(DrMode m) {
  switch (m) {
    case DrMode::kTrain: return "train";
    case DrMode::kTest: return "test";
    case DrMode::kOff: return "off";
  }
  return "train";
}

DrMode dr_mode_from_string(const std::string& s) {
  if (s == "train") return DrMode::kTrain;
  if (s == "test") return DrMode::kTest;
  if (s == "off") return DrMode::kOff;
  throw std::invalid_argument("unknown dr mode '" + s + "' (expected train, test or off)");
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::kNone: return "none";
    case Termination::kFlip: return "flip";
    case Termination::kOffDeck: return "off_deck";
    case Termination::kLowHeight: return "low_height";
    case Termination::kFault: return "fault";
    case Termination::kTimeout: return "timeout";
  }
  return "none";
}

namespace {

DrRanges make_ranges(double payload_hi, double com, double kp_lo, double kp_hi, double kd_lo,
                     double kd_hi, double mass, double fr_lo, double fr_hi, double sbp_lo,
                     double sbp_hi, double sbd_lo, double sbd_hi) {
  using namespace int_index;
  DrRanges r;
  r.lo.setZero();
  r.hi.setZero();
  r.lo[kPayload] = 0.0;
  r.hi[kPayload] = payload_hi;
  r.lo.segment<3>(kComShift).setConstant(-com);
  r.hi.segment<3>(kComShift).setConstant(com);
  r.lo.segment<12>(kPdKp).setConstant(kp_lo);
  r.hi.segment<12>(kPdKp).setConstant(kp_hi);
  r.lo.segment<12>(kPdKd).setConstant(kd_lo);
  r.hi.segment<12>(kPdKd).setConstant(kd_hi);
  r.lo[kMassDelta] = -mass;
  r.hi[kMassDelta] = mass;
  r.lo[kFriction] = fr_lo;
  r.hi[kFriction] = fr_hi;
  r.lo.segment<2>(kSbKp).setConstant(sbp_lo);
  r.hi.segment<2>(kSbKp).setConstant(sbp_hi);
  r.lo.segment<2>(kSbKd).setConstant(sbd_lo);
  r.hi.segment<2>(kSbKd).setConstant(sbd_hi);
  return r;
}

}  // namespace

DrRanges DrRanges::training() {
  return make_ranges(1.0, 0.2, 36, 44, 0.8, 1.2, 0.5, 0.8, 1.2, 0.8, 1.5, 0.02, 0.03);
}

DrRanges DrRanges::testing() {
  return make_ranges(3.0, 0.25, 32, 48, 0.6, 1.4, 1.0, 0.7, 1.5, 0.5, 2.0, 0.01, 0.05);
}

IntVec nominal_intrinsic() {
  using namespace int_index;
  IntVec x = IntVec::Zero();
  x.segment<12>(kPdKp).setConstant(40.0);
  x.segment<12>(kPdKd).setConstant(1.0);
  x[kFriction] = 1.0;
  x.segment<2>(kSbKp).setConstant(1.15);
  x.segment<2>(kSbKd).setConstant(0.025);
  return x;
}

IntVec sample_intrinsic(DrMode mode, sim::Rng& rng) {
  if (mode == DrMode::kOff) return nominal_intrinsic();
  const DrRanges r = mode == DrMode::kTrain ? DrRanges::training() : DrRanges::testing();
  IntVec x;
  for (int i = 0; i < kIntDim; ++i) x[i] = rng.uniform(r.lo[i], r.hi[i]);
  return x;
}

int EnvConfig::ticks(double seconds) const {
  return static_cast<int>(std::lround(seconds / dt_ctrl()));
}

void EnvConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("env config: " + m); };
  if (!(dt_physics > 0.0) || decimation < 1) fail("dt_physics and decimation must be positive");
  auto multiple = [&](double s) {
    const double n = s / dt_ctrl();
    return n >= 1.0 - 1e-9 && std::abs(n - std::round(n)) < 1e-6;
  };
  if (!multiple(episode_length_s)) fail("episode length must be a multiple of the control step");
  if (!multiple(command_period_s)) fail("command period must be a multiple of the control step");
  if (perturbations && (!multiple(push_period_s) || !multiple(push_duration_s)))
    fail("push period and duration must be multiples of the control step");
  if (push_body_max < 0.0 || push_deck_max < 0.0) fail("push magnitudes must be non-negative");
  if (!(action_scale > 0.0)) fail("action scale must be positive");
  if (history < 1) fail("history must be at least 1");
  if (!weights.valid()) fail("reward weights must be non-negative");
  if (robot != "a1" && robot != "go1" && robot != "anymalc" && robot != "spot")
    fail("unknown robot preset '" + robot + "'");
}

Env::Env(const EnvConfig& cfg, int index)
    : cfg_(cfg), index_(index), rng_(cfg.seed, kEnvStreamBase + static_cast<std::uint64_t>(index)) {
  cfg_.validate();
  rp_nominal_ = rider::preset(cfg_.robot);
  const std::string group = rider::group_of(cfg_.robot);
  tp_nominal_ = transporter::preset(group, cfg_.kind);
  sb_unit_ = transporter::sb_gain_unit(group);
  weights_ = cfg_.weights;
  weights_.h_des = cfg_.h_des > 0.0
                       ? cfg_.h_des
                       : 0.9 * (rp_nominal_.standing_height() + 0.5 * tp_nominal_.height);
  rp_ = rp_nominal_;
  tp_ = tp_nominal_;
  history_ = History::Zero(cfg_.history, kObsDim);
  static_assert(kObsDim == 46 && kIntDim == 34 && kExtDim == 16);
}

void Env::apply_intrinsic(const IntVec& x) {
  using namespace int_index;
  x_int_ = x;
  rp_ = rp_nominal_;
  rp_.payload_mass = x[kPayload];
  rp_.com_shift = x.segment<3>(kComShift);
  rp_.pd_kp = x.segment<12>(kPdKp) * rp_.pd_gain_unit;
  rp_.pd_kd = x.segment<12>(kPdKd) * rp_.pd_gain_unit;
  tp_ = tp_nominal_;
  tp_.mass = tp_nominal_.mass + x[kMassDelta];
  tp_.friction = x[kFriction];
  tp_.sb_kp = x.segment<2>(kSbKp) * sb_unit_.kp;
  tp_.sb_kd = x.segment<2>(kSbKd) * sb_unit_.kd;
}

void Env::resample_command() {
  if (source_) cmd_ = source_(rng_);
  segment_steps_ = 0;
  segment_r0_ = 0.0;
  segment_r1_ = 0.0;
}

void Env::set_command(const Command& c) {
  cmd_ = c;
  segment_steps_ = 0;
  segment_r0_ = 0.0;
  segment_r1_ = 0.0;
  obs_[obs_index::kCommand] = c.v;
  obs_[obs_index::kCommand + 1] = c.w;
  history_.row(0) = obs_.transpose();
}

Frame Env::reset() {
  apply_intrinsic(sample_intrinsic(cfg_.dr, rng_));
  ts_ = transporter::rest_state(tp_);
  const double surface = ts_.position.z() + 0.5 * tp_.height;
  rs_ = rider::standing_state(rp_, Vec3::Zero(), surface);

  if (cfg_.dr != DrMode::kOff) {
    rs_.com_position.z() += rng_.uniform(-cfg_.init_height_noise, cfg_.init_height_noise);
    for (int j = 0; j < rider::kNumJoints; ++j) {
      rs_.q[j] = std::clamp(rs_.q[j] + rng_.uniform(-cfg_.init_joint_noise, cfg_.init_joint_noise),
                            rp_.q_min[j], rp_.q_max[j]);
    }
    // keep every foot at or above the deck
    double lowest = 0.0;
    for (int leg = 0; leg < rider::kNumLegs; ++leg)
      lowest = std::min(lowest, rider::foot_world(rs_, rp_, leg).z() - surface);
    rs_.com_position.z() -= lowest;
  }
  rs_.prev_base_velocity = rs_.base_velocity(rp_);

  const auto decks = transporter::deck_frames(ts_, tp_);
  contacts_ = rider::compute_contacts(rs_, rp_, decks, tp_.kind, tp_.friction);

  action_.setZero();
  prev_action_.setZero();
  prev_dq_ = rs_.dq;
  ddq_.setZero();
  prev_platform_vel_ = ts_.linear_velocity();
  prev_platform_rate_ = ts_.angular_velocity();
  platform_acc_.setZero();
  platform_alpha_.setZero();
  step_ = 0;
  episode_return_ = 0.0;
  push_left_ = 0;
  push_body_.setZero();
  push_deck_ = {};

  resample_command();
  history_.setZero();
  obs_ = observe();
  history_.row(0) = obs_.transpose();
  return frame();
}

void Env::set_state(const rider::RiderState& rs, const transporter::TransporterState& ts) {
  rs_ = rs;
  ts_ = ts;
  rs_.prev_base_velocity = rs_.base_velocity(rp_);
  const auto decks = transporter::deck_frames(ts_, tp_);
  contacts_ = rider::compute_contacts(rs_, rp_, decks, tp_.kind, tp_.friction);
  prev_dq_ = rs_.dq;
  ddq_.setZero();
  prev_platform_vel_ = ts_.linear_velocity();
  prev_platform_rate_ = ts_.angular_velocity();
  platform_acc_.setZero();
  platform_alpha_.setZero();
  history_.setZero();
  obs_ = observe();
  history_.row(0) = obs_.transpose();
}

ObsVec Env::observe() {
  using namespace obs_index;
  ObsVec o;
  Vec3 acc = rider::accelerometer(rs_, rp_, cfg_.dt_ctrl());
  Vec3 gyro = rs_.body_rate;
  rider::JointVec q = rs_.q;
  rider::JointVec dq = rs_.dq;
  if (cfg_.obs_noise) {
    for (int i = 0; i < 3; ++i) acc[i] += 0.1 * rng_.normal();
    for (int i = 0; i < 3; ++i) gyro[i] += 0.02 * rng_.normal();
    for (int j = 0; j < 12; ++j) q[j] += 0.005 * rng_.normal();
    for (int j = 0; j < 12; ++j) dq[j] += 0.005 * rng_.normal();
  }
  o.segment<3>(kAccel) = acc;
  o.segment<3>(kGyro) = gyro;
  o[kRollPitch] = rs_.orientation.roll;
  o[kRollPitch + 1] = rs_.orientation.pitch;
  o.segment<12>(kQ) = q;
  o.segment<12>(kDq) = dq;
  o.segment<12>(kPrevAction) = action_;
  o[kCommand] = cmd_.v;
  o[kCommand + 1] = cmd_.w;
  rs_.prev_base_velocity = rs_.base_velocity(rp_);
  return o;
}

ExtVec Env::extract_extrinsic() const {
  using namespace ext_index;
  ExtVec x;
  for (int i = 0; i < 4; ++i) x[kContacts + i] = contacts_[i].in_contact ? 1.0 : 0.0;
  const sim::Mat3 rb_t = rs_.rotation().transpose();
  x.segment<3>(kBodyVel) = rb_t * rs_.base_velocity(rp_);
  x.segment<3>(kPlatformVel) = rb_t * ts_.linear_velocity();
  x.segment<3>(kPlatformRate) = rb_t * ts_.angular_velocity();
  const Vec3 rel = pivot_rotation(ts_).transpose() * (rs_.base_position(rp_) - ts_.position);
  x.segment<2>(kRelPos) = rel.head<2>();
  x[kRelYaw] = sim::wrap_angle(rs_.orientation.yaw - ts_.orientation.yaw);
  return x;
}

Frame Env::frame() const {
  Frame f;
  f.obs = obs_;
  f.history = history_;
  f.priv.x_int = x_int_;
  f.priv.x_ext = extract_extrinsic();
  return f;
}

Snapshot Env::snapshot() const {
  Snapshot s;
  s.rider = rs_;
  s.platform = ts_;
  s.contacts = contacts_;
  s.command = cmd_;
  s.action = action_;
  s.time = step_ * cfg_.dt_ctrl();
  return s;
}

ObsVec Env::obs_offset() const {
  ObsVec off = ObsVec::Zero();
  off[obs_index::kAccel + 2] = sim::kGravity;
  off.segment<12>(obs_index::kQ) = rp_nominal_.q0;
  return off;
}

ObsVec Env::obs_scale() {
  using namespace obs_index;
  ObsVec s = ObsVec::Ones();
  s.segment<3>(kAccel).setConstant(0.1);
  s.segment<3>(kGyro).setConstant(0.25);
  s.segment<12>(kDq).setConstant(0.05);
  s[kCommand] = 0.5;
  s[kCommand + 1] = 1.0;
  return s;
}

Termination Env::check_termination() const {
  if (std::abs(rs_.orientation.roll) > 1.0 || std::abs(rs_.orientation.pitch) > 1.0)
    return Termination::kFlip;
  const Vec3 base = rs_.base_position(rp_);
  const Vec3 rel = pivot_rotation(ts_).transpose() * (base - ts_.position);
  if (std::abs(rel.x()) > 0.5 * tp_.length + 0.1 || std::abs(rel.y()) > 0.5 * tp_.width + 0.1)
    return Termination::kOffDeck;
  if (base.z() - ts_.position.z() < 0.5 * weights_.h_des) return Termination::kLowHeight;
  return Termination::kNone;
}

rewards::RewardInputs Env::reward_inputs(bool collision, bool terminated) const {
  rewards::RewardInputs in;
  in.platform_forward_speed = ts_.forward_speed;
  in.platform_yaw_rate = ts_.angular_velocity().z();
  in.cmd_v = cmd_.v;
  in.cmd_w = cmd_.w;

  const Vec3 base = rs_.base_position(rp_);
  in.body_xy = base.head<2>();
  in.platform_xy = ts_.position.head<2>();
  in.body_yaw = rs_.orientation.yaw;
  in.platform_yaw = ts_.orientation.yaw;

  const sim::Mat3 rp_t = pivot_rotation(ts_).transpose();
  in.com_xy = (rp_t * (rs_.com_position - ts_.position)).head<2>();
  for (int i = 0; i < 4; ++i) {
    in.foot_xy[i] = (rp_t * (contacts_[i].world_position - ts_.position)).head<2>();
    in.normal_force[i] = contacts_[i].in_contact ? contacts_[i].normal_force : 0.0;
    in.contact[i] = contacts_[i].in_contact;
    in.contact_force_norm[i] = contacts_[i].force.norm();
  }
  in.body_z = base.z();
  in.platform_z = ts_.position.z();
  in.platform_linear_accel = platform_acc_;
  in.platform_angular_accel = platform_alpha_;

  in.body_roll = rs_.orientation.roll;
  in.body_pitch = rs_.orientation.pitch;
  in.body_rate = rs_.body_rate;
  in.body_vz = rs_.base_velocity(rp_).z();
  for (int j = 0; j < 12; ++j) {
    in.action[j] = action_[j];
    in.prev_action[j] = prev_action_[j];
    in.tau[j] = rs_.tau[j];
    in.dq[j] = rs_.dq[j];
    in.ddq[j] = ddq_[j];
    in.q[j] = rs_.q[j];
    in.q0[j] = rp_.q0[j];
  }
  in.collision = collision;
  in.terminated = terminated;
  return in;
}

void Env::start_push() {
  push_left_ = cfg_.ticks(cfg_.push_duration_s);
  push_body_ = random_direction(rng_) * rng_.uniform(0.0, cfg_.push_body_max);

  const Vec3 f = random_direction(rng_) * rng_.uniform(0.0, cfg_.push_deck_max);
  const Vec3 at(rng_.uniform(-0.5, 0.5) * tp_.length, rng_.uniform(-0.5, 0.5) * tp_.width,
                0.5 * tp_.height);
  push_deck_ = {};
  push_deck_.forward_force = f.x();
  if (tp_.kind == transporter::Kind::kType1) {
    push_deck_.torque[0] = at.cross(f);
  } else {
    // right board centered at y = -W/4, left at +W/4
    const int board = at.y() < 0.0 ? 0 : 1;
    const Vec3 center(0.0, board == 0 ? -0.25 * tp_.width : 0.25 * tp_.width, 0.0);
    push_deck_.torque[board] = (at - center).cross(f);
  }
}

StepResult Env::step(const ActVec& raw_action, bool auto_reset) {
  StepResult res;
  prev_action_ = action_;
  for (int j = 0; j < kActDim; ++j) {
    const double a = raw_action[j];
    action_[j] = std::isfinite(a) ? std::clamp(a, -1.0, 1.0) : 0.0;
  }
  const rider::JointVec q_target = rp_.q0 + cfg_.action_scale * action_;

  if (cfg_.perturbations && step_ > 0 && step_ % cfg_.ticks(cfg_.push_period_s) == 0) start_push();
  const bool pushing = push_left_ > 0;
  const Vec3 body_force = pushing ? push_body_ : Vec3::Zero();
  const transporter::ExternalLoad deck_load = pushing ? push_deck_ : transporter::ExternalLoad{};

  bool fault = false;
  for (int k = 0; k < cfg_.decimation; ++k) {
    const auto decks = transporter::deck_frames(ts_, tp_);
    const auto contacts = rider::compute_contacts(rs_, rp_, decks, tp_.kind, tp_.friction);
    auto r = rider::step_rider(rs_, rp_, q_target, contacts, cfg_.dt_physics, body_force);
    if (!r) {
      fault = true;
      break;
    }
    const auto w = rider::to_wrenches(r->contacts, decks);
    auto t = transporter::step(ts_, tp_, w, cfg_.dt_physics, deck_load);
    if (!t) {
      fault = true;
      break;
    }
    const Vec3 keep_prev = rs_.prev_base_velocity;
    rs_ = r->state;
    rs_.prev_base_velocity = keep_prev;
    ts_ = *t;
    contacts_ = r->contacts;
  }
  if (pushing) --push_left_;
  ++step_;

  const double dt = cfg_.dt_ctrl();
  const Vec3 v = ts_.linear_velocity();
  const Vec3 w = ts_.angular_velocity();
  platform_acc_ = (v - prev_platform_vel_) / dt;
  platform_alpha_ = (w - prev_platform_rate_) / dt;
  prev_platform_vel_ = v;
  prev_platform_rate_ = w;
  ddq_ = (rs_.dq - prev_dq_) / dt;
  prev_dq_ = rs_.dq;

  obs_ = observe();
  for (int i = cfg_.history - 1; i > 0; --i) history_.row(i) = history_.row(i - 1);
  history_.row(0) = obs_.transpose();

  Termination reason = fault ? Termination::kFault : check_termination();
  const bool terminated = reason != Termination::kNone;
  const auto decks = transporter::deck_frames(ts_, tp_);
  const bool collision = !fault && rider::trunk_collision(rs_, rp_, decks);
  res.terms = rewards::compute(reward_inputs(collision, terminated), weights_);
  for (double& t : res.terms) {
    if (!std::isfinite(t)) t = 0.0;
  }
  res.reward = rewards::total(res.terms);
  episode_return_ += res.reward;

  segment_r0_ += res.terms[0];
  segment_r1_ += res.terms[1];
  ++segment_steps_;
  const bool segment_done = segment_steps_ == cfg_.ticks(cfg_.command_period_s);
  if (segment_done && !terminated) {
    res.segment = SegmentRecord{cmd_, segment_r0_ / segment_steps_, segment_r1_ / segment_steps_,
                                segment_steps_};
  }

  if (!terminated && step_ >= cfg_.episode_steps()) reason = Termination::kTimeout;
  res.reason = reason;
  res.done = reason != Termination::kNone;
  res.episode_return = episode_return_;
  res.episode_length = step_;

  if (res.done) {
    res.terminal = frame();
    if (auto_reset) {
      res.frame = reset();
    } else {
      res.frame = *res.terminal;
    }
  } else {
    if (segment_done) {
      resample_command();
      obs_[obs_index::kCommand] = cmd_.v;
      obs_[obs_index::kCommand + 1] = cmd_.w;
      history_.row(0) = obs_.transpose();
    }
    res.frame = frame();
  }
  return res;
}

namespace {

class StateWriter {
 public:
  explicit StateWriter(std::vector<double>& out) : out_(out) {}
  void put(double x) { out_.push_back(x); }
  template <typename Derived>
  void put(const Eigen::MatrixBase<Derived>& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) out_.push_back(m.derived().data()[i]);
  }
  void put(const sim::EulerXYZ& e) { put(e.as_vec()); }

 private:
  std::vector<double>& out_;
};

class StateReader {
 public:
  explicit StateReader(const std::vector<double>& in) : in_(in) {}
  double get() {
    if (at_ >= in_.size()) throw std::runtime_error("env state: too short");
    return in_[at_++];
  }
  template <typename Derived>
  void get(Eigen::MatrixBase<Derived>& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.derived().data()[i] = get();
  }
  void get(sim::EulerXYZ& e) {
    Vec3 v;
    get(v);
    e = sim::EulerXYZ::from_vec(v);
  }
  bool done() const { return at_ == in_.size(); }

 private:
  const std::vector<double>& in_;
  std::size_t at_ = 0;
};

}  // namespace

std::vector<double> Env::save_state() const {
  std::vector<double> out;
  StateWriter w(out);
  w.put(x_int_);
  w.put(rs_.com_position);
  w.put(rs_.com_velocity);
  w.put(rs_.orientation);
  w.put(rs_.body_rate);
  w.put(rs_.q);
  w.put(rs_.dq);
  w.put(rs_.tau);
  w.put(rs_.ddq);
  w.put(rs_.prev_base_velocity);
  w.put(ts_.position);
  w.put(ts_.orientation);
  w.put(ts_.euler_rate);
  for (double x : {ts_.forward_speed, ts_.vertical_speed, ts_.pitch_left, ts_.pitch_right,
                   ts_.pitch_rate_left, ts_.pitch_rate_right})
    w.put(x);
  w.put(ts_.linear_accel);
  w.put(ts_.angular_accel);
  for (const auto& c : contacts_) {
    w.put(c.world_position);
    w.put(c.local_position);
    w.put(c.force);
    w.put(c.normal_force);
    w.put(c.in_contact ? 1.0 : 0.0);
    w.put(static_cast<double>(c.deck));
    w.put(c.damping);
  }
  w.put(cmd_.v);
  w.put(cmd_.w);
  w.put(action_);
  w.put(prev_action_);
  w.put(prev_dq_);
  w.put(ddq_);
  w.put(prev_platform_vel_);
  w.put(prev_platform_rate_);
  w.put(platform_acc_);
  w.put(platform_alpha_);
  w.put(obs_);
  w.put(history_);
  w.put(static_cast<double>(step_));
  w.put(static_cast<double>(segment_steps_));
  w.put(segment_r0_);
  w.put(segment_r1_);
  w.put(episode_return_);
  w.put(static_cast<double>(push_left_));
  w.put(push_body_);
  w.put(push_deck_.torque[0]);
  w.put(push_deck_.torque[1]);
  w.put(push_deck_.forward_force);
  return out;
}

void Env::load_state(const std::vector<double>& state, std::uint64_t rng_counter) {
  StateReader r(state);
  IntVec x;
  r.get(x);
  apply_intrinsic(x);
  r.get(rs_.com_position);
  r.get(rs_.com_velocity);
  r.get(rs_.orientation);
  r.get(rs_.body_rate);
  r.get(rs_.q);
  r.get(rs_.dq);
  r.get(rs_.tau);
  r.get(rs_.ddq);
  r.get(rs_.prev_base_velocity);
  r.get(ts_.position);
  r.get(ts_.orientation);
  r.get(ts_.euler_rate);
  for (double* x2 : {&ts_.forward_speed, &ts_.vertical_speed, &ts_.pitch_left, &ts_.pitch_right,
                     &ts_.pitch_rate_left, &ts_.pitch_rate_right})
    *x2 = r.get();
  r.get(ts_.linear_accel);
  r.get(ts_.angular_accel);
  for (auto& c : contacts_) {
    r.get(c.world_position);
    r.get(c.local_position);
    r.get(c.force);
    c.normal_force = r.get();
    c.in_contact = r.get() != 0.0;
    c.deck = static_cast<int>(r.get());
    r.get(c.damping);
  }
  cmd_.v = r.get();
  cmd_.w = r.get();
  r.get(action_);
  r.get(prev_action_);
  r.get(prev_dq_);
  r.get(ddq_);
  r.get(prev_platform_vel_);
  r.get(prev_platform_rate_);
  r.get(platform_acc_);
  r.get(platform_alpha_);
  r.get(obs_);
  r.get(history_);
  step_ = static_cast<int>(r.get());
  segment_steps_ = static_cast<int>(r.get());
  segment_r0_ = r.get();
  segment_r1_ = r.get();
  episode_return_ = r.get();
  push_left_ = static_cast<int>(r.get());
  r.get(push_body_);
  r.get(push_deck_.torque[0]);
  r.get(push_deck_.torque[1]);
  push_deck_.forward_force = r.get();
  if (!r.done()) throw std::runtime_error("env state: trailing data");
  rng_.set_counter(rng_counter);
}

VecEnv::VecEnv(const EnvConfig& cfg, int count, int threads) : threads_(std::max(1, threads)) {
  envs_.reserve(count);
  for (int i = 0; i < count; ++i) envs_.push_back(std::make_unique<Env>(cfg, i));
}

VecEnv::~VecEnv() = default;

void VecEnv::set_command_source(const CommandSource& src) {
  for (auto& e : envs_) e->set_command_source(src);
}

std::vector<Frame> VecEnv::reset() {
  std::vector<Frame> out(envs_.size());
  for (std::size_t i = 0; i < envs_.size(); ++i) out[i] = envs_[i]->reset();
  return out;
}

std::vector<StepResult> VecEnv::step(const Eigen::MatrixXd& actions) {
  if (actions.rows() != size() || actions.cols() != kActDim)
    throw std::invalid_argument("VecEnv::step: expected one 12-wide action row per env");
  std::vector<StepResult> out(envs_.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      out[i] = envs_[i]->step(actions.row(static_cast<Eigen::Index>(i)).transpose());
    }
  };
  const std::size_t n = envs_.size();
  const std::size_t workers = std::min<std::size_t>(threads_, n);
  if (workers <= 1) {
    work(0, n);
    return out;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t b = 0; b < n; b += chunk) pool.emplace_back(work, b, std::min(n, b + chunk));
  pool.clear();
  return out;
}

}  // namespace atr::env
