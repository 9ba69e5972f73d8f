#include <chrono>
#include <cmath>

#include <gtest/gtest.h>

#include "atr/env/env.hpp"
#include "atr/sim/rng.hpp"
#include "atr/transporter/transporter.hpp"

using namespace atr;
using namespace atr::transporter;

namespace {

ContactWrench down_at(const Vec3& r, double f) { return {Vec3(0, 0, -f), r, true}; }

// quadratic root of r2 v^2 + r1 v + r0 = drive
double root_oracle(double drive, double r0, double r1, double r2) {
  return (-r1 + std::sqrt(r1 * r1 + 4 * r2 * (drive - r0))) / (2 * r2);
}

}  // namespace

TEST(Resistance, QuadraticLawOpposesMotion) {
  const Resistance r;
  EXPECT_NEAR(resistance(2.0, r), 0.2 + 0.1 + 0.02, 1e-12);
  EXPECT_NEAR(resistance(-2.0, r), -(0.2 + 0.1 + 0.02), 1e-12);
  EXPECT_NEAR(resistance(15.0, r), 2.075, 1e-12);
}

TEST(Resistance, StaticAtRest) {
  const Resistance r;
  EXPECT_NEAR(resistance(0.0, r, 0.1), 0.1, 1e-15);
  EXPECT_NEAR(resistance(0.0, r, -5.0), -0.2, 1e-15);
  EXPECT_EQ(resistance(0.0, r, 0.0), 0.0);
}

TEST(SteadyState, MatchesQuadraticRoot) {
  const TransporterParams p = preset("g1", Kind::kType1);
  for (double drive : {0.5, 1.0, 2.075, 5.0, 11.0}) {
    const double tilt = drive / p.max_forward_accel * p.tilt_norm;
    EXPECT_NEAR(steady_state_speed(tilt, p), root_oracle(drive, 0.2, 0.05, 0.005), 1e-9);
    EXPECT_NEAR(steady_state_speed(-tilt, p), -root_oracle(drive, 0.2, 0.05, 0.005), 1e-9);
  }
  EXPECT_EQ(steady_state_speed(0.001, p), 0.0);
}

TEST(SteadyState, HeldTiltConvergesToFifteen) {
  const auto t0 = std::chrono::steady_clock::now();
  TransporterParams p = preset("g1", Kind::kType1);
  const double tilt = 2.075 / p.max_forward_accel * p.tilt_norm;
  TransporterState s = rest_state(p);
  const double dt = 0.002;
  for (int i = 0; i < 600000; ++i) {
    s.orientation.pitch = tilt;
    s.euler_rate.y() = 0.0;
    s = *step_type1(s, p, WrenchSet{}, dt);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_NEAR(s.forward_speed, 15.0, 0.15);
  EXPECT_LT(secs, 5.0);
}

TEST(PlatformTorque, DownwardPushAheadPitchesPositive) {
  const std::array<ContactWrench, 1> w = {down_at({0.1, 0, 0}, 50.0)};
  const Vec3 tau = platform_torque(w);
  EXPECT_NEAR(tau.y(), 5.0, 1e-12);
  EXPECT_NEAR(tau.x(), 0.0, 1e-12);
  EXPECT_NEAR(tau.z(), 0.0, 1e-12);
}

TEST(PlatformTorque, Linearity) {
  sim::Rng rng(11, 2);
  for (int trial = 0; trial < 50; ++trial) {
    WrenchSet a, b;
    for (int i = 0; i < 4; ++i) {
      const Vec3 r(rng.uniform(-0.4, 0.4), rng.uniform(-0.3, 0.3), 0.025);
      a[i] = {Vec3(rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-80, 0)), r, true};
      b[i] = {Vec3(rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-80, 0)), r, true};
    }
    WrenchSet sum = a, twice = a;
    for (int i = 0; i < 4; ++i) {
      sum[i].force = a[i].force + b[i].force;
      twice[i].force = 2.0 * a[i].force;
    }
    EXPECT_TRUE(platform_torque(twice).isApprox(2.0 * platform_torque(a), 1e-12));
    EXPECT_LT((platform_torque(sum) - platform_torque(a) - platform_torque(b)).norm(), 1e-9);
  }
}

TEST(PlatformTorque, SymmetricStanceIsZero) {
  const double f = 28.8;
  WrenchSet w = {down_at({0.18, -0.12, 0.025}, f), down_at({0.18, 0.12, 0.025}, f),
                 down_at({-0.18, -0.12, 0.025}, f), down_at({-0.18, 0.12, 0.025}, f)};
  EXPECT_LT(platform_torque(w).norm(), 1e-9);
}

TEST(PlatformTorque, IgnoresFeetOutOfContact) {
  WrenchSet w = {down_at({0.1, 0, 0}, 50.0)};
  w[1] = {Vec3(0, 0, -100), Vec3(0.3, 0.2, 0), false};
  EXPECT_NEAR(platform_torque(w).y(), 5.0, 1e-12);
}

TEST(SelfBalancing, ZeroTiltIsExactFixedPoint) {
  for (Kind kind : {Kind::kType1, Kind::kType2}) {
    const TransporterParams p = preset("g1", kind);
    TransporterState s = rest_state(p);
    for (int i = 0; i < 5000; ++i) s = *step(s, p, WrenchSet{}, 0.002);
    EXPECT_EQ(s.orientation.roll, 0.0);
    EXPECT_EQ(s.orientation.pitch, 0.0);
    EXPECT_EQ(s.euler_rate.x(), 0.0);
    EXPECT_EQ(s.euler_rate.y(), 0.0);
    EXPECT_EQ(s.forward_speed, 0.0);
    EXPECT_EQ(s.position.x(), 0.0);
  }
}

TEST(SelfBalancing, TestingRangeGainsSettle) {
  const env::DrRanges r = env::DrRanges::testing();
  const SbGainUnit unit = sb_gain_unit("g1");
  sim::Rng rng(2024, 9);
  for (int draw = 0; draw < 20; ++draw) {
    TransporterParams p = preset("g1", Kind::kType1);
    for (int a = 0; a < 2; ++a) {
      p.sb_kp[a] = rng.uniform(r.lo[env::int_index::kSbKp + a], r.hi[env::int_index::kSbKp + a]) * unit.kp;
      p.sb_kd[a] = rng.uniform(r.lo[env::int_index::kSbKd + a], r.hi[env::int_index::kSbKd + a]) * unit.kd;
    }
    TransporterState s = rest_state(p);
    s.orientation.pitch = 0.3;
    s.orientation.roll = 0.3;
    for (int i = 0; i < 10000; ++i) s = *step_type1(s, p, WrenchSet{}, 0.002);
    EXPECT_LT(std::abs(s.orientation.pitch), 0.01) << "draw " << draw;
    EXPECT_LT(std::abs(s.orientation.roll), 0.01) << "draw " << draw;
  }
}

TEST(TypeTwo, PitchSplit) {
  const PitchSplit s = split_pitch(0.2, 0.1);
  EXPECT_NEAR(s.average, 0.15, 1e-15);
  EXPECT_NEAR(std::abs(s.differential), 0.05, 1e-15);
  const PitchSplit z = split_pitch(0.1, 0.1);
  EXPECT_EQ(z.differential, 0.0);
}

TEST(TypeTwo, EqualBoardPitchDrivesStraight) {
  const TransporterParams p = preset("g1", Kind::kType2);
  TransporterState s = rest_state(p);
  for (int i = 0; i < 500; ++i) {
    s.pitch_left = s.pitch_right = 0.2;
    s.pitch_rate_left = s.pitch_rate_right = 0.0;
    s = *step_type2(s, p, WrenchSet{}, 0.002);
  }
  EXPECT_GT(s.forward_speed, 0.0);
  EXPECT_EQ(s.euler_rate.z(), 0.0);
  EXPECT_EQ(s.orientation.yaw, 0.0);
}

TEST(TypeTwo, DifferentialPitchTurns) {
  const TransporterParams p = preset("g1", Kind::kType2);
  TransporterState s = rest_state(p);
  for (int i = 0; i < 500; ++i) {
    s.pitch_right = 0.3;
    s.pitch_left = 0.1;
    s.pitch_rate_left = s.pitch_rate_right = 0.0;
    s = *step_type2(s, p, WrenchSet{}, 0.002);
  }
  EXPECT_NE(s.euler_rate.z(), 0.0);
}

TEST(TypeTwo, BoardsCarryTheirOwnFeet) {
  EXPECT_EQ(deck_for_foot(Kind::kType2, 0), deck_for_foot(Kind::kType2, 1));
  EXPECT_EQ(deck_for_foot(Kind::kType2, 2), deck_for_foot(Kind::kType2, 3));
  EXPECT_NE(deck_for_foot(Kind::kType2, 0), deck_for_foot(Kind::kType2, 2));
  for (int f = 0; f < 4; ++f) EXPECT_EQ(deck_for_foot(Kind::kType1, f), 0);
  const TransporterParams p = preset("g1", Kind::kType2);
  EXPECT_EQ(deck_frames(rest_state(p), p).size(), 2u);
}

TEST(Presets, GroupDimensions) {
  const TransporterParams g1 = preset("g1", Kind::kType1);
  EXPECT_DOUBLE_EQ(g1.mass, 11.5);
  EXPECT_DOUBLE_EQ(g1.length, 0.9);
  EXPECT_DOUBLE_EQ(g1.width, 0.7);
  const TransporterParams g2 = preset("g2", Kind::kType1);
  EXPECT_DOUBLE_EQ(g2.mass, 30.0);
  EXPECT_DOUBLE_EQ(g2.length, 1.5);
  EXPECT_DOUBLE_EQ(g2.width, 1.1);
  EXPECT_THROW(preset("g3", Kind::kType1), std::invalid_argument);
}

TEST(Inertia, UniformPlate) {
  const TransporterParams p = preset("g1", Kind::kType1);
  const Vec3 i = p.inertia();
  EXPECT_NEAR(i.x(), 11.5 * (0.7 * 0.7 + 0.05 * 0.05) / 12.0, 1e-12);
  EXPECT_NEAR(i.y(), 11.5 * (0.9 * 0.9 + 0.05 * 0.05) / 12.0, 1e-12);
  EXPECT_NEAR(i.z(), 11.5 * (0.9 * 0.9 + 0.7 * 0.7) / 12.0, 1e-12);
}

TEST(Yaw, SteeringFollowsRollSign) {
  const TransporterParams p = preset("g1", Kind::kType1);
  TransporterState s = rest_state(p);
  for (int i = 0; i < 200; ++i) {
    s.orientation.pitch = 0.2;
    s.orientation.roll = -0.2;
    s.euler_rate.x() = s.euler_rate.y() = 0.0;
    s = *step_type1(s, p, WrenchSet{}, 0.002);
  }
  // forward tilt, clip(-roll) > 0 => positive yaw acceleration
  EXPECT_GT(s.euler_rate.z(), 0.0);
}

TEST(Step, RejectsNonFiniteLoad) {
  const TransporterParams p = preset("g1", Kind::kType1);
  WrenchSet w = {down_at({0.1, 0, 0}, std::nan(""))};
  EXPECT_FALSE(step_type1(rest_state(p), p, w, 0.002));
}
