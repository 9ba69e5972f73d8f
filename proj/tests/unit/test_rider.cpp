#include <cmath>

#include <gtest/gtest.h>

#include "atr/rider/rider.hpp"
#include "atr/sim/rng.hpp"

using namespace atr;
using namespace atr::rider;

namespace {

std::vector<transporter::DeckFrame> flat_deck() {
  transporter::DeckFrame d;
  d.half_length = 5.0;
  d.half_width = 5.0;
  return {d};
}

}  // namespace

TEST(Presets, AllValidWithGroups) {
  for (const char* name : {"a1", "go1", "anymalc", "spot"}) {
    const RiderParams p = preset(name);
    EXPECT_TRUE(p.valid()) << name;
    EXPECT_GT(p.standing_height(), 0.1) << name;
  }
  EXPECT_EQ(group_of("a1"), "g1");
  EXPECT_EQ(group_of("spot"), "g2");
  EXPECT_DOUBLE_EQ(preset("a1").body_mass, 11.74);
  EXPECT_THROW(preset("cheetah"), std::invalid_argument);
}

TEST(Kinematics, JacobianMatchesFiniteDifference) {
  const RiderParams p = preset("a1");
  sim::Rng rng(4, 4);
  for (int leg = 0; leg < kNumLegs; ++leg) {
    for (int trial = 0; trial < 10; ++trial) {
      const LegVec q(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 1.5), rng.uniform(-2.5, -0.9));
      const LegJacobian j = leg_jacobian(q, leg, p);
      const double h = 1e-6;
      for (int c = 0; c < 3; ++c) {
        LegVec qp = q, qm = q;
        qp[c] += h;
        qm[c] -= h;
        const Vec3 fd = (leg_fk(qp, leg, p) - leg_fk(qm, leg, p)) / (2 * h);
        EXPECT_LT((fd - j.col(c)).norm(), 1e-7) << "leg " << leg << " col " << c;
      }
    }
  }
}

TEST(Kinematics, LegsMirrorAcrossSagittalPlane) {
  const RiderParams p = preset("a1");
  const LegVec q(0.1, 0.8, -1.6);
  const Vec3 r = leg_fk(q, kFrontRight, p);
  const Vec3 l = leg_fk(LegVec(-0.1, 0.8, -1.6), kFrontLeft, p);
  EXPECT_NEAR(r.x(), l.x(), 1e-12);
  EXPECT_NEAR(r.y(), -l.y(), 1e-12);
  EXPECT_NEAR(r.z(), l.z(), 1e-12);
}

TEST(Standing, FeetTouchSurface) {
  const RiderParams p = preset("a1");
  const RiderState s = standing_state(p, Vec3(0.3, -0.2, 0), 0.5, 0.4);
  for (int leg = 0; leg < kNumLegs; ++leg) {
    EXPECT_GE(foot_world(s, p, leg).z(), 0.5 - 1e-12);
  }
  double lowest = 1e9;
  for (int leg = 0; leg < kNumLegs; ++leg) lowest = std::min(lowest, foot_world(s, p, leg).z());
  EXPECT_NEAR(lowest, 0.5, 1e-12);
  EXPECT_NEAR(s.base_position(p).x(), 0.3, 1e-12);
  EXPECT_NEAR(s.base_position(p).y(), -0.2, 1e-12);
}

TEST(Payload, ShiftsCenterOfMass) {
  RiderParams p = preset("a1");
  p.payload_mass = 2.0;
  p.com_shift = Vec3(0.1, 0.0, 0.0);
  EXPECT_NEAR(p.com_offset().x(), 2.0 * 0.1 / (11.74 + 2.0), 1e-12);
  EXPECT_DOUBLE_EQ(p.total_mass(), 13.74);
}

TEST(Pd, TorqueIsClamped) {
  const RiderParams p = preset("a1");
  RiderState s = standing_state(p, Vec3::Zero(), 0.0);
  JointVec target = p.q0;
  target[0] += 10.0;
  target[1] -= 0.1;
  const JointVec tau = pd_torque(s, p, target);
  EXPECT_DOUBLE_EQ(tau[0], p.tau_max);
  EXPECT_NEAR(tau[1], -0.1 * p.pd_kp[1], 1e-12);
  EXPECT_EQ(tau[2], 0.0);
}

TEST(Contact, NoForceAboveSurface) {
  const RiderParams p = preset("a1");
  RiderState s = standing_state(p, Vec3::Zero(), 0.1);
  const auto c = compute_contacts(s, p, flat_deck(), transporter::Kind::kType1, 1.0);
  for (const auto& f : c) {
    EXPECT_FALSE(f.in_contact);
    EXPECT_EQ(f.force.norm(), 0.0);
  }
}

TEST(Contact, PenetrationPushesUp) {
  const RiderParams p = preset("a1");
  const RiderState s = standing_state(p, Vec3::Zero(), 0.025 - 0.003);
  const auto c = compute_contacts(s, p, flat_deck(), transporter::Kind::kType1, 1.0);
  for (const auto& f : c) {
    EXPECT_TRUE(f.in_contact);
    EXPECT_GT(f.force.z(), 0.0);
    EXPECT_NEAR(f.normal_force, p.contact_k * 0.003, 1e-6);
  }
  // reaction on the board points down
  const auto w = to_wrenches(c, flat_deck());
  for (const auto& x : w) EXPECT_LT(x.force.z(), 0.0);
}

TEST(Accelerometer, ReadsGravityAtRest) {
  const RiderParams p = preset("a1");
  const RiderState s = standing_state(p, Vec3::Zero(), 0.0);
  const Vec3 a = accelerometer(s, p, 0.02);
  EXPECT_NEAR(a.z(), sim::kGravity, 1e-12);
  EXPECT_NEAR(a.head<2>().norm(), 0.0, 1e-12);
}

TEST(Step, StandsOnStaticSurface) {
  const RiderParams p = preset("a1");
  const auto decks = flat_deck();
  RiderState s = standing_state(p, Vec3::Zero(), decks[0].surface_offset);
  for (int i = 0; i < 2500; ++i) {
    const auto c = compute_contacts(s, p, decks, transporter::Kind::kType1, 1.0);
    const auto n = step_rider(s, p, p.q0, c, 0.002);
    ASSERT_TRUE(n);
    s = n->state;
  }
  EXPECT_LT(s.com_velocity.norm(), 1e-2);
  EXPECT_LT(std::abs(s.orientation.roll) + std::abs(s.orientation.pitch), 0.05);
  EXPECT_GT(s.base_position(p).z(), 0.5 * p.standing_height());
}

// Standing with fixed targets, the only energy sources are conservative
// springs (contact, PD) and gravity; everything else dissipates. The one
// exception is contact onset: a foot that crosses the surface during a step
// arrives with spring energy 0.5 k depth^2 that no force paid for.
TEST(Step, MechanicalEnergyNonIncreasing) {
  const RiderParams p = preset("a1");
  const auto decks = flat_deck();
  const double surface = decks[0].surface_offset;
  RiderState s = standing_state(p, Vec3::Zero(), surface + 0.01);
  auto depth = [&](const RiderState& st, int leg) { return surface - foot_world(st, p, leg).z(); };
  auto energy = [&](const RiderState& st) {
    double e = kinetic_energy(st, p) + p.total_mass() * sim::kGravity * st.com_position.z();
    for (int leg = 0; leg < kNumLegs; ++leg) {
      const double d = depth(st, leg);
      if (d > 0) e += 0.5 * p.contact_k * d * d;
    }
    for (int j = 0; j < kNumJoints; ++j) e += 0.5 * p.pd_kp[j] * std::pow(st.q[j] - p.q0[j], 2);
    return e;
  };

  const double start = energy(s);
  double prev = start;
  double worst = 0.0, onset_total = 0.0;
  for (int i = 0; i < 2500; ++i) {
    const auto c = compute_contacts(s, p, decks, transporter::Kind::kType1, 1.0);
    const auto n = step_rider(s, p, p.q0, c, 0.002);
    ASSERT_TRUE(n);
    double onset = 0.0;
    for (int leg = 0; leg < kNumLegs; ++leg) {
      const double d = depth(n->state, leg);
      if (d > 0 && depth(s, leg) <= 0) onset += 0.5 * p.contact_k * d * d;
    }
    s = n->state;
    const double e = energy(s);
    worst = std::max(worst, e - prev - onset);
    onset_total += onset;
    prev = e;
  }
  EXPECT_GT(onset_total, 0.0);
  EXPECT_LT(worst, 1e-4);
  EXPECT_LT(prev, start);
}

TEST(Step, RejectsNonFinite) {
  const RiderParams p = preset("a1");
  RiderState s = standing_state(p, Vec3::Zero(), 0.0);
  s.com_velocity.x() = std::nan("");
  EXPECT_FALSE(step_rider(s, p, p.q0, FootContacts{}, 0.002));
}

TEST(Step, JointLimitsHold) {
  const RiderParams p = preset("a1");
  RiderState s = standing_state(p, Vec3::Zero(), 1.0);
  JointVec target = p.q_max + JointVec::Constant(1.0);
  for (int i = 0; i < 500; ++i) s = step_rider(s, p, target, FootContacts{}, 0.002)->state;
  for (int j = 0; j < kNumJoints; ++j) EXPECT_LE(s.q[j], p.q_max[j]);
}
