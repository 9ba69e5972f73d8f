#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "atr/sim/math.hpp"

namespace atr::transporter {

using sim::EulerXYZ;
using sim::Mat3;
using sim::Vec2;
using sim::Vec3;

enum class Kind { kType1, kType2 };

std::string to_string(Kind k);
Kind kind_from_string(const std::string& s);

/// Generalized resistance R(x) = r0 + r1|x| + r2 x^2, applied against motion.
struct Resistance {
  double r0 = 0.2;
  double r1 = 0.05;
  double r2 = 0.005;
};

struct TransporterParams {
  Kind kind = Kind::kType1;
  /// Total platform mass. Type-2 splits it evenly between the two boards.
  double mass = 11.5;
  double length = 0.9;
  double width = 0.7;
  double height = 0.05;

  double max_forward_accel = 12.0;  // m/s^2
  double max_yaw_accel = 3.0;       // rad/s^2
  double tilt_norm = 0.78;          // rad

  /// Self-balancing gains as physical values (N m/rad, N m s/rad).
  Vec2 sb_kp = {46.0, 46.0};
  Vec2 sb_kd = {2.5, 2.5};

  double friction = 1.0;
  Resistance resist;

  /// Altitude hold, mass-normalized (1/s^2, 1/s).
  double alt_kp = 400.0;
  double alt_kd = 40.0;
  double z_nominal = 0.5;

  double mass_left() const { return 0.5 * mass; }
  double mass_right() const { return 0.5 * mass; }

  /// Uniform plate about its own center, Type-1 deck.
  Vec3 inertia() const;
  /// One Type-2 board (L x W/2 x H, half the mass) about its own center.
  Vec3 half_inertia() const;
  /// Yaw inertia used by the steering equation: the plate value for Type-1,
  /// the parallel-axis combination of both boards about the pivot for Type-2.
  double yaw_inertia() const;

  bool valid() const;
};

/// Deck pose and rates. Orientation is integrated as three scalar Euler
/// coordinates (roll, pitch, yaw) whose rates are kept in euler_rate.
/// For Type-2 the pivot roll is identically 0 and its pitch is the board
/// average; the boards carry their own pitch and pitch rate.
struct TransporterState {
  Vec3 position = Vec3::Zero();
  EulerXYZ orientation;
  Vec3 euler_rate = Vec3::Zero();
  double forward_speed = 0.0;
  double vertical_speed = 0.0;

  double pitch_left = 0.0;
  double pitch_right = 0.0;
  double pitch_rate_left = 0.0;
  double pitch_rate_right = 0.0;

  /// World-frame linear and angular acceleration of the last step.
  Vec3 linear_accel = Vec3::Zero();
  Vec3 angular_accel = Vec3::Zero();

  Vec3 linear_velocity() const;
  /// World-frame angular velocity of the pivot frame.
  Vec3 angular_velocity() const;
  bool finite() const;
};

/// Robot-induced load at one foot, expressed in the frame of the board the
/// foot stands on. The force is the one acting on the board.
struct ContactWrench {
  Vec3 force = Vec3::Zero();
  Vec3 point = Vec3::Zero();
  bool in_contact = false;
};

using WrenchSet = std::array<ContactWrench, 4>;

/// Disturbance applied to the platform besides foot contacts.
struct ExternalLoad {
  /// Per board, in that board's frame (index as in deck_frames()).
  std::array<Vec3, 2> torque = {Vec3::Zero(), Vec3::Zero()};
  double forward_force = 0.0;  // N along the heading
};

/// A rigid board in the world: frame origin at the board center, top
/// surface at +height/2 along the board z axis.
struct DeckFrame {
  Vec3 origin = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();  // world frame
  double half_length = 0.45;
  double half_width = 0.35;
  double surface_offset = 0.025;

  Vec3 to_local(const Vec3& world_point) const {
    return rotation.transpose() * (world_point - origin);
  }
  Vec3 point_velocity(const Vec3& world_point) const {
    return linear_velocity + angular_velocity.cross(world_point - origin);
  }
  bool contains_xy(const Vec3& local) const {
    return std::abs(local.x()) <= half_length && std::abs(local.y()) <= half_width;
  }
};

/// Type-1: one deck. Type-2: {right board, left board}.
std::vector<DeckFrame> deck_frames(const TransporterState& s, const TransporterParams& p);

/// Index into deck_frames() of the board under foot `foot`. Feet 0-1 stand
/// on the right board and 2-3 on the left for Type-2.
int deck_for_foot(Kind kind, int foot);

/// Signed resistance opposing `speed`. At exactly zero speed it acts as
/// static resistance against the drive with magnitude min(r0, |drive|).
double resistance(double speed, const Resistance& r, double drive = 0.0);

/// Sum of r x f over the contacting feet.
Vec3 platform_torque(std::span<const ContactWrench> wrenches);

std::optional<TransporterState> step_type1(const TransporterState& s,
                                           const TransporterParams& p,
                                           const WrenchSet& w, double dt,
                                           const ExternalLoad& load = {});

std::optional<TransporterState> step_type2(const TransporterState& s,
                                           const TransporterParams& p,
                                           const WrenchSet& w, double dt,
                                           const ExternalLoad& load = {});

/// Dispatches on p.kind.
std::optional<TransporterState> step(const TransporterState& s,
                                     const TransporterParams& p,
                                     const WrenchSet& w, double dt,
                                     const ExternalLoad& load = {});

/// Terminal forward speed under a held tilt: the root of
/// r2 v^2 + r1 v + r0 = max_forward_accel * clip(tilt / tilt_norm), signed
/// like the tilt; 0 when the drive does not exceed static resistance.
double steady_state_speed(double tilt, const TransporterParams& p);

/// Average and differential board pitch of a Type-2 transporter.
struct PitchSplit {
  double average = 0.0;
  double differential = 0.0;
};
PitchSplit split_pitch(double pitch_right, double pitch_left);

/// Canonical level, resting state at the hover height.
TransporterState rest_state(const TransporterParams& p);

/// Group presets: "g1" (0.9 x 0.7 x 0.05 m, 11.5 kg) and "g2"
/// (1.5 x 1.1 x 0.05 m, 30 kg).
TransporterParams preset(const std::string& group, Kind kind);

/// Physical self-balancing gain per unit of the normalized gains used for
/// domain randomization, by group.
struct SbGainUnit {
  double kp = 40.0;
  double kd = 100.0;
};
SbGainUnit sb_gain_unit(const std::string& group);

}  // namespace atr::transporter
