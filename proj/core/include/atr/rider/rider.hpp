#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "atr/sim/math.hpp"
#include "atr/transporter/transporter.hpp"

namespace atr::rider {

using sim::EulerXYZ;
using sim::Mat3;
using sim::Vec3;
using JointVec = Eigen::Matrix<double, 12, 1>;
using LegVec = Eigen::Vector3d;
using LegJacobian = Eigen::Matrix3d;

inline constexpr int kNumLegs = 4;
inline constexpr int kNumJoints = 12;

/// Leg order: 0 front-right, 1 rear-right, 2 front-left, 3 rear-left. Each
/// leg has hip abduction (about body x), hip flexion and knee (about the
/// abducted y axis). Positive flexion swings the foot backward.
enum Leg { kFrontRight = 0, kRearRight = 1, kFrontLeft = 2, kRearLeft = 3 };

inline double leg_side(int leg) { return leg < 2 ? -1.0 : 1.0; }

/// Reduced quadruped: one rigid trunk carrying all mass, massless legs whose
/// joints follow a scalar-inertia proxy driven by PD torques and the contact
/// load.
struct RiderParams {
  std::string name = "a1";
  double body_mass = 11.74;
  Vec3 body_inertia = Vec3(0.049, 0.137, 0.166);
  /// Trunk box used for body-deck collision checks.
  Vec3 trunk_dims = Vec3(0.36, 0.20, 0.10);

  std::array<Vec3, kNumLegs> hip_offsets{};
  double l_ab = 0.08;
  double l_thigh = 0.2;
  double l_shank = 0.2;

  JointVec q0 = JointVec::Zero();
  JointVec q_min = JointVec::Zero();
  JointVec q_max = JointVec::Zero();

  /// Physical PD gains (N m/rad, N m s/rad).
  JointVec pd_kp = JointVec::Constant(40.0);
  JointVec pd_kd = JointVec::Constant(1.0);
  /// Physical gain per unit of the normalized PD gains that get randomized.
  double pd_gain_unit = 1.0;

  double joint_inertia = 0.02;
  double tau_max = 33.5;

  /// Point payload carried at `com_shift` in the body frame.
  double payload_mass = 0.0;
  Vec3 com_shift = Vec3::Zero();

  double contact_k = 5e4;
  double contact_d = 500.0;
  double v_slip = 0.01;
  double contact_threshold = 1.0;

  double total_mass() const { return body_mass + payload_mass; }
  /// Center of mass in the body frame, relative to the trunk origin.
  Vec3 com_offset() const;
  /// Rotational inertia about the center of mass, body frame (diagonal).
  Vec3 inertia_about_com() const;
  /// Trunk-origin height above the stance surface at q0.
  double standing_height() const;
  bool valid() const;
};

/// Presets: "a1", "go1" (group 1) and "anymalc", "spot" (group 2).
RiderParams preset(const std::string& name);
/// Transporter group the preset is paired with ("g1" or "g2").
std::string group_of(const std::string& name);

struct RiderState {
  /// Center of mass position and velocity, world frame.
  Vec3 com_position = Vec3::Zero();
  Vec3 com_velocity = Vec3::Zero();
  EulerXYZ orientation;
  Vec3 body_rate = Vec3::Zero();  // body frame
  JointVec q = JointVec::Zero();
  JointVec dq = JointVec::Zero();
  JointVec tau = JointVec::Zero();
  JointVec ddq = JointVec::Zero();
  /// Trunk-origin velocity at the previous control tick (accelerometer).
  Vec3 prev_base_velocity = Vec3::Zero();

  Mat3 rotation() const { return sim::euler_to_rot(orientation); }
  Vec3 base_position(const RiderParams& p) const;
  Vec3 base_velocity(const RiderParams& p) const;
  bool finite() const;
};

LegVec leg_fk(const LegVec& q_leg, int leg, const RiderParams& p);
LegJacobian leg_jacobian(const LegVec& q_leg, int leg, const RiderParams& p);

inline LegVec leg_slice(const JointVec& q, int leg) { return q.segment<3>(3 * leg); }

/// Foot position relative to the center of mass, body frame.
Vec3 foot_from_com(const RiderState& s, const RiderParams& p, int leg);
Vec3 foot_world(const RiderState& s, const RiderParams& p, int leg);
Vec3 foot_velocity_world(const RiderState& s, const RiderParams& p, int leg);

struct FootContact {
  Vec3 world_position = Vec3::Zero();
  /// Position in the frame of the board under the foot.
  Vec3 local_position = Vec3::Zero();
  /// Force from the board on the foot, world frame.
  Vec3 force = Vec3::Zero();
  double normal_force = 0.0;
  bool in_contact = false;
  int deck = 0;
  /// -d(force)/d(foot velocity) of the regularized contact law, world frame.
  Mat3 damping = Mat3::Zero();
};

using FootContacts = std::array<FootContact, kNumLegs>;

/// Penalty contact with regularized Coulomb friction against the boards.
FootContacts compute_contacts(const RiderState& s, const RiderParams& p,
                              const std::vector<transporter::DeckFrame>& decks,
                              transporter::Kind kind, double friction);

/// Converts foot contacts into the wrenches acting on the boards, in board
/// frames.
transporter::WrenchSet to_wrenches(const FootContacts& c,
                                   const std::vector<transporter::DeckFrame>& decks);

/// True when any trunk box corner lies at or below the board surface.
bool trunk_collision(const RiderState& s, const RiderParams& p,
                     const std::vector<transporter::DeckFrame>& decks);

JointVec pd_torque(const RiderState& s, const RiderParams& p, const JointVec& q_target);

struct RiderStep {
  RiderState state;
  /// Contacts carrying the forces actually applied over the step.
  FootContacts contacts;
};

/// One physics step. Velocities are advanced with contact damping, friction
/// and PD damping treated linearly-implicitly; positions follow with the new
/// velocities. `push` is an extra world force at the center of mass.
std::optional<RiderStep> step_rider(const RiderState& s, const RiderParams& p,
                                    const JointVec& q_target, const FootContacts& contacts,
                                    double dt, const Vec3& push = Vec3::Zero());

/// Proper acceleration in the body frame from two consecutive control-tick
/// trunk velocities (reads +g on z at rest).
Vec3 accelerometer(const RiderState& s, const RiderParams& p, double dt_ctrl);

/// Standing state on a level surface whose top is at height `surface_z`,
/// trunk above (x, y), all feet just touching.
RiderState standing_state(const RiderParams& p, const Vec3& xy_center, double surface_z,
                          double yaw = 0.0);

double kinetic_energy(const RiderState& s, const RiderParams& p);

}  // namespace atr::rider
