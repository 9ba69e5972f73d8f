#include <cmath>

#include <gtest/gtest.h>

#include "atr/curriculum/curriculum.hpp"

using namespace atr;
using namespace atr::curriculum;

namespace {

env::SegmentRecord record(double v, double w, double r0, double r1) {
  env::SegmentRecord r;
  r.command = {v, w};
  r.mean_r0 = r0;
  r.mean_r1 = r1;
  r.steps = 250;
  return r;
}

}  // namespace

TEST(Grid, Dimensions) {
  const CommandGrid g;
  EXPECT_EQ(g.nv(), 301);
  EXPECT_EQ(g.nw(), 41);
  EXPECT_NEAR(g.cell_v(0), -15.0, 1e-12);
  EXPECT_NEAR(g.cell_v(300), 15.0, 1e-12);
  EXPECT_NEAR(g.cell_w(40), 2.0, 1e-12);
  EXPECT_EQ(g.index_v(0.04), 150);
  EXPECT_EQ(g.index_w(-99.0), 0);
}

TEST(Init, BoxOnly) {
  const CommandGrid g = CommandGrid::init();
  EXPECT_EQ(g.weight(g.index_v(0), g.index_w(0)), 1.0);
  EXPECT_EQ(g.weight(g.index_v(5.0), g.index_w(0)), 0.0);
  EXPECT_EQ(g.weight(g.index_v(0.5), g.index_w(0.3)), 1.0);
  EXPECT_EQ(g.weight(g.index_v(0.6), g.index_w(0.0)), 0.0);
  EXPECT_EQ(g.weight(g.index_v(0.0), g.index_w(0.4)), 0.0);
  EXPECT_EQ(g.support_size(), 11 * 7);
  EXPECT_THROW(CommandGrid::init(20.0, 0.3), std::invalid_argument);
}

TEST(Init, SamplesUniformOverBox) {
  const CommandGrid g = CommandGrid::init();
  sim::Rng rng(1, 1);
  // chi-square over the 11 c_v columns, 10 dof; 23.21 is the p = 0.01 cut
  std::array<int, 11> hits{};
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const env::Command c = g.sample(rng);
    ASSERT_LE(std::abs(c.v), 0.55 + 1e-12);
    ASSERT_LE(std::abs(c.w), 0.35 + 1e-12);
    ++hits[g.index_v(c.v) - g.index_v(-0.5)];
  }
  double chi2 = 0.0;
  const double expect = n / 11.0;
  for (int h : hits) chi2 += (h - expect) * (h - expect) / expect;
  EXPECT_LT(chi2, 23.21);
}

TEST(Sample, SingleCell) {
  CommandGrid g;
  g.set_weight(200, 30, 0.4);
  sim::Rng rng(2, 2);
  for (int i = 0; i < 1000; ++i) {
    const env::Command c = g.sample(rng);
    EXPECT_EQ(g.index_v(c.v), 200);
    EXPECT_EQ(g.index_w(c.w), 30);
    EXPECT_LE(std::abs(c.v - g.cell_v(200)), 0.05 + 1e-12);
    EXPECT_LE(std::abs(c.w - g.cell_w(30)), 0.05 + 1e-12);
  }
}

TEST(Sample, ProportionalToWeight) {
  CommandGrid g;
  g.set_weight(10, 10, 1.0);
  g.set_weight(20, 20, 0.5);
  sim::Rng rng(3, 3);
  const int n = 10000;
  int first = 0;
  for (int i = 0; i < n; ++i) first += g.index_v(g.sample(rng).v) == 10 ? 1 : 0;
  const double p = 2.0 / 3.0;
  EXPECT_NEAR(first, n * p, 3 * std::sqrt(n * p * (1 - p)));
}

TEST(Sample, EmptyGridThrows) {
  const CommandGrid g;
  sim::Rng rng(1, 1);
  EXPECT_THROW(g.sample(rng), std::logic_error);
}

TEST(Update, ThresholdsFromWeights) {
  const UpdateRule r = rule_from_weights(8.0, 8.0);
  EXPECT_DOUBLE_EQ(r.gamma_v, 6.4);
  EXPECT_DOUBLE_EQ(r.gamma_w, 6.4);
}

TEST(Update, PassingRecordRaisesTwentyFiveCells) {
  CommandGrid g = CommandGrid::init();
  CommandGrid far = g;
  const int ci = g.index_v(3.0), cj = g.index_w(1.0);
  EXPECT_TRUE(far.update(record(3.0, 1.0, 6.5, 6.5)));
  int changed = 0;
  for (int i = 0; i < g.nv(); ++i) {
    for (int j = 0; j < g.nw(); ++j) {
      const double d = far.weight(i, j) - g.weight(i, j);
      if (d != 0.0) {
        ++changed;
        EXPECT_NEAR(d, 0.1, 1e-12);
        EXPECT_LE(std::abs(i - ci), 2);
        EXPECT_LE(std::abs(j - cj), 2);
      }
    }
  }
  EXPECT_EQ(changed, 25);
  EXPECT_EQ(far.episodes(), 1u);
}

TEST(Update, CapsAtOne) {
  CommandGrid g = CommandGrid::init();
  g.update(record(0.0, 0.0, 6.5, 6.5));
  for (int i = g.index_v(-0.2); i <= g.index_v(0.2); ++i)
    for (int j = g.index_w(-0.2); j <= g.index_w(0.2); ++j) EXPECT_EQ(g.weight(i, j), 1.0);
}

TEST(Update, BelowThresholdUnchanged) {
  CommandGrid g = CommandGrid::init();
  const CommandGrid before = g;
  EXPECT_FALSE(g.update(record(0.0, 0.0, 6.3, 7.0)));
  EXPECT_FALSE(g.update(record(0.0, 0.0, 7.0, 6.3)));
  EXPECT_EQ(g.weights(), before.weights());
  EXPECT_EQ(g.episodes(), 2u);
}

TEST(Update, EdgeNeighborhoodClipped) {
  CommandGrid g = CommandGrid::init();
  const double before = g.total_weight();
  g.update(record(15.0, 2.0, 8.0, 8.0));
  EXPECT_NEAR(g.total_weight() - before, 9 * 0.1, 1e-12);
}

TEST(Update, SupportMonotoneOverRandomUpdates) {
  CommandGrid g = CommandGrid::init();
  const CommandGrid init = g;
  sim::Rng rng(7, 7);
  for (int k = 0; k < 1000; ++k) {
    const env::Command c = g.sample(rng);
    const CommandGrid before = g;
    g.update(record(c.v, c.w, rng.uniform(5.0, 8.0), rng.uniform(5.0, 8.0)));
    for (std::size_t i = 0; i < g.weights().size(); ++i) {
      ASSERT_GE(g.weights()[i], before.weights()[i]);
      ASSERT_LE(g.weights()[i], 1.0);
      ASSERT_GE(g.weights()[i], init.weights()[i]);
    }
  }
  EXPECT_EQ(g.episodes(), 1000u);
  EXPECT_GT(g.support_size(), init.support_size());
}
