#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "atr/config/config.hpp"
#include "atr/learner/trainer.hpp"

using namespace atr;
using namespace atr::learner;

namespace {

config::RunConfig tiny_config() {
  config::RunConfig c;
  c.train.num_envs = 4;
  c.train.horizon = 8;
  c.train.iterations = 2;
  c.train.minibatches = 2;
  c.train.epochs = 2;
  c.env.seed = 3;
  return c;
}

}  // namespace

TEST(Adam, MatchesHandStep) {
  Param p("p", Mat::Constant(1, 2, 0.5));
  p.grad = Mat(1, 2);
  p.grad << 0.2, -4.0;
  AdamState s;
  adam_step({&p}, s, 0.01);
  // first step: m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps)
  EXPECT_NEAR(p.value(0, 0), 0.5 - 0.01, 1e-7);
  EXPECT_NEAR(p.value(0, 1), 0.5 + 0.01, 1e-7);
  EXPECT_EQ(s.step, 1u);
  EXPECT_EQ(static_cast<double>(static_cast<float>(p.value(0, 0))), p.value(0, 0));
}

TEST(Adam, ClipGradNorm) {
  Param a("a", Mat::Zero(1, 2)), b("b", Mat::Zero(1, 1));
  a.grad = Mat(1, 2);
  a.grad << 3.0, 0.0;
  b.grad = Mat::Constant(1, 1, 4.0);
  EXPECT_NEAR(clip_grad_norm({&a, &b}, 1.0), 5.0, 1e-12);
  EXPECT_NEAR(std::sqrt(a.grad.squaredNorm() + b.grad.squaredNorm()), 1.0, 1e-9);
  EXPECT_NEAR(clip_grad_norm({&a, &b}, 10.0), 1.0, 1e-9);
}

TEST(Normalize, ZeroMeanUnitStd) {
  Eigen::VectorXd x(5);
  x << 1, 2, 3, 4, 10;
  const Eigen::VectorXd n = normalize(x);
  EXPECT_NEAR(n.mean(), 0.0, 1e-12);
  EXPECT_NEAR(std::sqrt(n.array().square().mean()), 1.0, 1e-12);
  EXPECT_EQ(normalize(Eigen::VectorXd::Constant(3, 2.0)).norm(), 0.0);
}

TEST(NormalizerTest, HistoryReversedPaddingZero) {
  const Normalizer n = Normalizer::make(env::ObsVec::Zero());
  const int steps = 3, d = env::kObsDim;
  Mat raw = Mat::Zero(1, steps * d);
  raw(0, 0) = 1.0;      // newest
  raw(0, d) = 2.0;      // previous
  const Mat out = n.history(raw, steps);
  EXPECT_NEAR(out(0, 2 * d), 1.0 * n.obs_scale[0], 1e-15);
  EXPECT_NEAR(out(0, d), 2.0 * n.obs_scale[0], 1e-15);
  EXPECT_EQ(out.block(0, 0, 1, d).norm(), 0.0);
  EXPECT_THROW(n.history(raw, 4), std::invalid_argument);
}

TEST(Networks, SmallProfileWidthsAndInputs) {
  NetConfig c;
  EXPECT_EQ(kPolicyInputDim, 78);
  PolicyBundle b(c, env::ObsVec::Zero(), 1);
  EXPECT_EQ(b.actor().in_dim(), 78);
  EXPECT_EQ(b.actor().out_dim(), 12);
  EXPECT_EQ(b.encoder().in_dim(), 34);
  EXPECT_EQ(b.encoder().out_dim(), 16);
  NetConfig full;
  full.profile = "full";
  PolicyBundle f(full, env::ObsVec::Zero(), 1);
  EXPECT_GT(f.parameter_count(), b.parameter_count());
  NetConfig bad;
  bad.profile = "huge";
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Networks, NamesUnique) {
  PolicyBundle b(NetConfig{}, env::ObsVec::Zero(), 1);
  std::set<std::string> names;
  for (auto* p : b.params()) EXPECT_TRUE(names.insert(p->name).second) << p->name;
  EXPECT_EQ(b.params().size(), b.policy_params().size() + b.estimator_params().size());
}

TEST(Networks, EncoderIsCausalInTime) {
  NetConfig c;
  PolicyBundle b(c, env::ObsVec::Zero(), 2);
  auto& enc = b.intrinsic_estimator();
  const int steps = c.history, d = env::kObsDim;
  Mat seq = Mat::Random(1, steps * d);
  Tape t;
  const auto before = enc.forward_all(t, t.constant(seq), false);
  seq.block(0, 6 * d, 1, d).setRandom();
  const auto after = enc.forward_all(t, t.constant(seq), false);
  for (int s = 0; s < 6; ++s) EXPECT_EQ(before[s].value(), after[s].value()) << s;
  EXPECT_NE(before[6].value(), after[6].value());
}

TEST(Networks, DeploymentUsesEstimates) {
  PolicyBundle b(NetConfig{}, env::ObsVec::Zero(), 4);
  env::Env e(env::EnvConfig{}, 0);
  const auto f = e.reset();
  PolicyInputs in = pack({f, f});
  const auto train = b.evaluate(in, Mode::kTraining);
  const auto deploy = b.evaluate(in, Mode::kDeployment);
  // deployment ignores privileged inputs
  PolicyInputs scrambled = in;
  scrambled.x_int.setRandom();
  scrambled.x_ext.setRandom();
  EXPECT_EQ(b.evaluate(scrambled, Mode::kDeployment).mean, deploy.mean);
  EXPECT_NE(b.evaluate(scrambled, Mode::kTraining).mean, train.mean);
  EXPECT_EQ(train.mean.rows(), 2);
}

TEST(Pack, FramesToRows) {
  env::Env e(env::EnvConfig{}, 0);
  const auto f = e.reset();
  const PolicyInputs in = pack({f});
  EXPECT_EQ(in.obs.row(0).transpose(), f.obs);
  EXPECT_EQ(in.history.cols(), 10 * 46);
  for (int c = 0; c < 46; ++c) EXPECT_EQ(in.history(0, c), f.history(0, c));
  EXPECT_EQ(in.x_int.row(0).transpose(), f.priv.x_int);
}

TEST(TrainingReward, FloorExcludesTermination) {
  env::StepResult r;
  r.terms.fill(0.0);
  r.terms[0] = 2.0;
  r.terms[8] = -5.0;
  r.reward = -3.0;
  EXPECT_DOUBLE_EQ(training_reward(r, true), 0.0);
  EXPECT_DOUBLE_EQ(training_reward(r, false), -3.0);
  r.terms[17] = -10.0;
  r.reward = -13.0;
  EXPECT_DOUBLE_EQ(training_reward(r, true), -10.0);
  r.terms[8] = 0.0;
  r.reward = -8.0;
  EXPECT_DOUBLE_EQ(training_reward(r, true), 2.0 - 10.0);
}

TEST(Trainer, IterationsAreBitIdentical) {
  const auto cfg = tiny_config();
  Trainer a(cfg), b(cfg);
  for (int i = 0; i < 2; ++i) {
    const auto sa = a.iterate();
    const auto sb = b.iterate();
    EXPECT_EQ(sa.update.policy_loss, sb.update.policy_loss);
    EXPECT_EQ(sa.mean_terms, sb.mean_terms);
  }
  auto pa = a.bundle().params(), pb = b.bundle().params();
  for (std::size_t i = 0; i < pa.size(); ++i) ASSERT_EQ(pa[i]->value, pb[i]->value) << pa[i]->name;
}

TEST(Trainer, ThreadCountDoesNotChangeResults) {
  auto c1 = tiny_config(), c2 = tiny_config();
  c2.train.threads = 2;
  Trainer a(c1), b(c2);
  a.iterate();
  b.iterate();
  auto pa = a.bundle().params(), pb = b.bundle().params();
  for (std::size_t i = 0; i < pa.size(); ++i) ASSERT_EQ(pa[i]->value, pb[i]->value) << pa[i]->name;
}

TEST(Trainer, UpdateChangesParametersAndLogsFinite) {
  Trainer t(tiny_config());
  const Mat before = t.bundle().actor().params()[0]->value;
  const auto s = t.iterate();
  EXPECT_NE(t.bundle().actor().params()[0]->value, before);
  EXPECT_TRUE(std::isfinite(s.update.policy_loss));
  EXPECT_TRUE(std::isfinite(s.update.value_loss));
  EXPECT_TRUE(std::isfinite(s.update.l_int));
  EXPECT_TRUE(std::isfinite(s.update.l_ext));
  EXPECT_EQ(s.env_steps, 4u * 8u);
}

TEST(Trainer, EstimatedActorsAreRecordedAndDeterministic) {
  auto c = tiny_config();
  c.train.p_use_estimate = 0.5;
  Trainer a(c), b(c);
  const auto sa = a.iterate();
  const auto sb = b.iterate();
  EXPECT_EQ(sa.update.policy_loss, sb.update.policy_loss);
  EXPECT_TRUE(std::isfinite(sa.update.policy_loss));
  EXPECT_EQ(a.on_estimates(), b.on_estimates());
}

TEST(Trainer, EstimateFlagsFollowProbability) {
  auto c = tiny_config();
  c.train.p_use_estimate = 1.0;
  Trainer all(c);
  for (double f : all.on_estimates()) EXPECT_EQ(f, 1.0);
  c.train.p_use_estimate = 0.0;
  Trainer none(c);
  for (double f : none.on_estimates()) EXPECT_EQ(f, 0.0);
  // p = 0 draws nothing from the learner stream
  EXPECT_EQ(none.rng().counter(), Trainer(tiny_config()).rng().counter());
}

TEST(TrainConfigTest, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.gamma = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.minibatches = 100000;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}
