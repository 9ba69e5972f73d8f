#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "atr/learner/networks.hpp"
#include "atr/learner/ppo.hpp"
#include "oracles.hpp"

using namespace atr;
using namespace atr::learner;

namespace {

constexpr double kTol = 1e-4;

Mat random_mat(int r, int c, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> n(0.0, scale);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(g);
  return m;
}

// weighted sum so every output entry gets a distinct cotangent
Var project(Tape& t, const Var& y, std::uint64_t seed) {
  return sum(mul(y, t.constant(random_mat(static_cast<int>(y.rows()), static_cast<int>(y.cols()), seed))));
}

void expect_fd(const std::function<Var(Tape&)>& f, const std::vector<Param*>& ps,
               const char* what) {
  const oracle::FdReport r = oracle::fd_check(f, ps, 8);
  EXPECT_LT(r.worst, kTol) << what << ": worst " << r.worst << " at " << r.worst_name;
  EXPECT_GT(r.checked, 0);
}

struct Fixture {
  NetConfig cfg;
  std::unique_ptr<PolicyBundle> bundle;
  Mat obs_n, seq_n, int_n, ext_n, ext_raw;
  int b = 5;

  explicit Fixture(const std::string& temporal = "cnn_gru") {
    cfg.temporal = temporal;
    bundle = std::make_unique<PolicyBundle>(cfg, env::ObsVec::Zero(), 17);
    obs_n = random_mat(b, env::kObsDim, 1);
    seq_n = random_mat(b, cfg.history * env::kObsDim, 2, 0.5);
    int_n = random_mat(b, env::kIntDim, 3, 0.5);
    ext_n = random_mat(b, env::kExtDim, 4, 0.5);
    ext_raw = random_mat(b, env::kExtDim, 5, 0.5);
  }
};

}  // namespace

TEST(Ops, ElementwiseAndLinear) {
  Param x("x", random_mat(4, 3, 10)), w("w", random_mat(3, 5, 11)), b("b", random_mat(1, 5, 12));
  expect_fd([&](Tape& t) { return project(t, linear(t.param(x), t.param(w), t.param(b)), 1); },
            {&x, &w, &b}, "linear");
  expect_fd([&](Tape& t) { return project(t, elu(t.param(x)), 2); }, {&x}, "elu");
  expect_fd([&](Tape& t) { return project(t, tanh(t.param(x)), 3); }, {&x}, "tanh");
  expect_fd([&](Tape& t) { return project(t, sigmoid(t.param(x)), 4); }, {&x}, "sigmoid");
  expect_fd([&](Tape& t) { return project(t, exp(t.param(x)), 5); }, {&x}, "exp");
  expect_fd([&](Tape& t) { return mean(square(t.param(x))); }, {&x}, "mean square");
  expect_fd([&](Tape& t) { return project(t, sum_cols(t.param(x)), 6); }, {&x}, "sum_cols");
  expect_fd(
      [&](Tape& t) {
        const Var a = t.param(x);
        return project(t, concat_cols({slice_cols(a, 1, 2), a, scale(add_scalar(a, 0.3), 2.0)}), 7);
      },
      {&x}, "concat/slice");
  Param y("y", random_mat(4, 3, 13));
  expect_fd([&](Tape& t) { return project(t, mul(sub(t.param(x), t.param(y)), t.param(y)), 8); },
            {&x, &y}, "mul/sub");
}

TEST(Ops, CausalConv) {
  const int steps = 6, in = 4, k = 3, c = 5;
  Param seq("seq", random_mat(3, steps * in, 20)), w("w", random_mat(k * in, c, 21)),
      b("b", random_mat(1, c, 22));
  expect_fd(
      [&](Tape& t) { return project(t, causal_conv(t.param(seq), t.param(w), t.param(b), steps, in, k), 9); },
      {&seq, &w, &b}, "causal_conv");
}

TEST(Ops, CausalConvMatchesDefinition) {
  const int steps = 5, in = 2, k = 3, c = 2;
  const Mat seq = random_mat(2, steps * in, 30), w = random_mat(k * in, c, 31), b = random_mat(1, c, 32);
  Tape t;
  const Mat out = causal_conv(t.constant(seq), t.constant(w), t.constant(b), steps, in, k).value();
  for (int r = 0; r < 2; ++r) {
    for (int s = 0; s < steps; ++s) {
      for (int o = 0; o < c; ++o) {
        double acc = b(0, o);
        for (int d = 0; d < k; ++d) {
          if (s - d < 0) continue;
          for (int i = 0; i < in; ++i) acc += seq(r, (s - d) * in + i) * w(d * in + i, o);
        }
        EXPECT_NEAR(out(r, s * c + o), acc, 1e-12);
      }
    }
  }
}

TEST(Ops, GruCell) {
  const int c = 4, g = 3;
  Param x("x", random_mat(2, c, 40)), h("h", random_mat(2, g, 41)),
      wx("wx", random_mat(c, 3 * g, 42, 0.5)), uh("uh", random_mat(g, 3 * g, 43, 0.5)),
      b("b", random_mat(1, 3 * g, 44, 0.5));
  expect_fd(
      [&](Tape& t) {
        return project(t, gru_cell(t.param(x), t.param(h), t.param(wx), t.param(uh), t.param(b)), 10);
      },
      {&x, &h, &wx, &uh, &b}, "gru_cell");
}

TEST(Ops, GruCellMatchesDefinition) {
  const int c = 2, g = 2;
  const Mat x = random_mat(1, c, 50), h = random_mat(1, g, 51), wx = random_mat(c, 3 * g, 52),
            uh = random_mat(g, 3 * g, 53), b = random_mat(1, 3 * g, 54);
  Tape t;
  const Mat out = gru_cell(t.constant(x), t.constant(h), t.constant(wx), t.constant(uh), t.constant(b)).value();
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const Mat ax = x * wx + b, ah = h * uh;
  Mat rh(1, g);
  for (int j = 0; j < g; ++j) rh(0, j) = sig(ax(0, g + j) + ah(0, g + j)) * h(0, j);
  const Mat an = rh * uh.rightCols(g);
  for (int j = 0; j < g; ++j) {
    const double z = sig(ax(0, j) + ah(0, j));
    const double n = std::tanh(ax(0, 2 * g + j) + an(0, j));
    EXPECT_NEAR(out(0, j), n + z * (h(0, j) - n), 1e-12);
  }
}

TEST(Ops, GaussianLogProbAndClipLoss) {
  Param mu("mu", random_mat(6, 3, 60)), ls("ls", random_mat(1, 3, 61, 0.3));
  const Mat actions = random_mat(6, 3, 62);
  expect_fd([&](Tape& t) { return sum(gaussian_log_prob(t.param(mu), t.param(ls), actions)); },
            {&mu, &ls}, "log_prob");

  Tape t0;
  const Mat lp = gaussian_log_prob(t0.constant(mu.value), t0.constant(ls.value), actions).value();
  const Eigen::VectorXd closed = gaussian_log_prob(mu.value, ls.value.row(0), actions);
  EXPECT_LT((lp.col(0) - closed).norm(), 1e-12);

  // keep ratios away from the clip kinks
  Mat old = lp;
  for (int i = 0; i < 6; ++i) old(i, 0) += (i % 3 == 0) ? 0.5 : (i % 3 == 1 ? -0.5 : 0.05);
  const Mat adv = random_mat(6, 1, 63);
  expect_fd(
      [&](Tape& t) {
        return ppo_clip_loss(gaussian_log_prob(t.param(mu), t.param(ls), actions), old, adv, 0.2);
      },
      {&mu, &ls}, "ppo_clip_loss");
}

TEST(Heads, ActorCriticEncoderLogStd) {
  Fixture f;
  PolicyBundle& pb = *f.bundle;
  auto pol = pb.policy_params();
  expect_fd(
      [&](Tape& t) {
        const Var z = pb.encode(t, t.constant(f.int_n), true);
        return project(t, pb.actor_mean(t, t.constant(f.obs_n), z, t.constant(f.ext_n), true), 70);
      },
      pol, "actor");
  expect_fd(
      [&](Tape& t) {
        const Var z = pb.encode(t, t.constant(f.int_n), true);
        return project(t, pb.critic(t, t.constant(f.obs_n), z, t.constant(f.ext_n), true), 71);
      },
      pol, "critic");
  expect_fd([&](Tape& t) { return project(t, pb.encode(t, t.constant(f.int_n), true), 72); },
            pol, "encoder");
  expect_fd([&](Tape& t) { return project(t, pb.log_std(t, true), 73); }, pol, "log_std");
}

TEST(Heads, Estimators) {
  for (const char* temporal : {"cnn_gru", "flat"}) {
    Fixture f(temporal);
    PolicyBundle& pb = *f.bundle;
    auto est = pb.estimator_params();
    expect_fd([&](Tape& t) { return project(t, pb.estimate_intrinsic(t, t.constant(f.seq_n), true), 80); },
              est, temporal);
    expect_fd([&](Tape& t) { return project(t, pb.estimate_extrinsic(t, t.constant(f.seq_n), true), 81); },
              est, temporal);
  }
}

TEST(Heads, EstimatorLosses) {
  Fixture f;
  PolicyBundle& pb = *f.bundle;
  auto all = pb.params();
  // the stop-gradient operands are constants for the reference
  const oracle::FdReport r = oracle::fd_check(
      [&](Tape& t) {
        const Var z = pb.encode(t, t.constant(f.int_n), true);
        return estimator_losses(pb, t, z, t.constant(f.seq_n), f.ext_raw, 0.2).l_int;
      },
      oracle::frozen_l_int(pb, f.int_n, f.seq_n, 0.2), all, 8);
  EXPECT_LT(r.worst, kTol) << "L_int: worst " << r.worst << " at " << r.worst_name;
  expect_fd(
      [&](Tape& t) {
        const Var z = pb.encode(t, t.constant(f.int_n), true);
        return estimator_losses(pb, t, z, t.constant(f.seq_n), f.ext_raw, 0.2).l_ext;
      },
      all, "L_ext");
}

TEST(Heads, FullLoss) {
  Fixture f;
  PolicyBundle& pb = *f.bundle;
  TrainConfig cfg;
  BatchInputs in{f.obs_n, f.seq_n, f.int_n, f.ext_n, f.ext_raw, {}, {}, {}};
  const Mat actions = random_mat(f.b, env::kActDim, 90, 0.3);
  Tape t0;
  const Var z0 = pb.encode(t0, t0.constant(f.int_n), false);
  const Mat mu0 = pb.actor_mean(t0, t0.constant(f.obs_n), z0, t0.constant(f.ext_n), false).value();
  Mat old = gaussian_log_prob(mu0, pb.log_std_value(), actions);
  old.array() += 0.6;  // ratios below 1 - clip
  old(0, 0) -= 0.6;
  old(1, 0) -= 0.5;
  const Mat adv = random_mat(f.b, 1, 91), ret = random_mat(f.b, 1, 92);
  // reference: same loss written out with z frozen in the critic and in L_int
  Mat z_frozen;
  {
    Tape t;
    z_frozen = pb.encode(t, t.constant(f.int_n), false).value();
  }
  const oracle::LossFn l_int = oracle::frozen_l_int(pb, f.int_n, f.seq_n, cfg.roa_lambda);
  const oracle::LossFn reference = [&](Tape& t) {
    const Var z = pb.encode(t, t.constant(f.int_n), true);
    const Var mu = pb.actor_mean(t, t.constant(f.obs_n), z, t.constant(f.ext_n), true);
    const Var v = pb.critic(t, t.constant(f.obs_n), t.constant(z_frozen), t.constant(f.ext_n), true);
    const Var ls = pb.log_std(t, true);
    const Var policy = ppo_clip_loss(gaussian_log_prob(mu, ls, actions), old, adv, cfg.clip);
    const Var value = scale(sum(square(sub(v, t.constant(ret)))), 1.0 / f.b);
    const Var entropy = sum(ls);  // constant offset dropped
    const Var x_hat = pb.estimate_extrinsic(t, t.constant(f.seq_n), true);
    const Var l_ext = scale(sum(square(sub(x_hat, t.constant(f.ext_raw)))), 1.0 / f.b);
    const double k = env::kActDim * 0.5 * (1.0 + std::log(2.0 * M_PI));
    return add(add(policy, scale(value, cfg.value_coef)),
               add(scale(add_scalar(entropy, k), -cfg.entropy_coef),
                   scale(add(l_int(t), l_ext), cfg.estimator_coef)));
  };
  const oracle::FdReport r = oracle::fd_check(
      [&](Tape& t) { return build_loss(pb, t, in, actions, old, adv, ret, cfg).total; }, reference,
      pb.params(), 8);
  EXPECT_LT(r.worst, kTol) << "total: worst " << r.worst << " at " << r.worst_name;
}

TEST(Heads, EstimatedRowsFeedStoredEstimates) {
  Fixture f;
  PolicyBundle& pb = *f.bundle;
  TrainConfig cfg;
  BatchInputs in{f.obs_n, f.seq_n, f.int_n, f.ext_n, f.ext_raw, {}, {}, {}};
  in.use_estimate = Mat::Zero(f.b, 1);
  in.use_estimate(1, 0) = in.use_estimate(3, 0) = 1.0;
  in.z_hat = random_mat(f.b, pb.encoder().out_dim(), 93, 0.5);
  in.x_ext_hat_n = random_mat(f.b, env::kExtDim, 94, 0.5);
  const Mat actions = random_mat(f.b, env::kActDim, 95, 0.3);
  const Mat old = Mat::Zero(f.b, 1), adv = random_mat(f.b, 1, 96), ret = random_mat(f.b, 1, 97);

  Tape t;
  const Mat lp = build_loss(pb, t, in, actions, old, adv, ret, cfg).log_prob.value();
  Tape r;
  const Mat z = pb.encode(r, r.constant(f.int_n), false).value();
  for (int k = 0; k < f.b; ++k) {
    const bool est = in.use_estimate(k, 0) != 0.0;
    const Mat zk = est ? Mat(in.z_hat.row(k)) : Mat(z.row(k));
    const Mat ek = est ? Mat(in.x_ext_hat_n.row(k)) : Mat(f.ext_n.row(k));
    const Mat mu = pb.actor_mean(r, r.constant(f.obs_n.row(k)), r.constant(zk), r.constant(ek), false).value();
    EXPECT_NEAR(lp(k, 0), gaussian_log_prob(mu, pb.log_std_value(), actions.row(k))(0, 0), 1e-10) << k;
  }
  expect_fd([&](Tape& tt) { return build_loss(pb, tt, in, actions, old, adv, ret, cfg).policy; },
            pb.policy_params(), "policy with estimated rows");
}

TEST(StopGradient, RegressionTermLeavesEncoderUntouched) {
  Fixture f;
  PolicyBundle& pb = *f.bundle;
  for (auto* p : pb.params()) p->zero_grad();
  Tape t;
  const Var z = pb.encode(t, t.constant(f.int_n), true);
  t.backward(estimator_losses(pb, t, z, t.constant(f.seq_n), f.ext_raw, 0.0).l_int);
  double enc = 0.0, est = 0.0;
  for (auto* p : pb.encoder().params()) enc += p->grad.squaredNorm();
  for (auto* p : pb.intrinsic_estimator().params()) est += p->grad.squaredNorm();
  EXPECT_EQ(enc, 0.0);
  EXPECT_GT(est, 0.0);

  // the pull term does reach the encoder
  for (auto* p : pb.params()) p->zero_grad();
  Tape t2;
  const Var z2 = pb.encode(t2, t2.constant(f.int_n), true);
  t2.backward(estimator_losses(pb, t2, z2, t2.constant(f.seq_n), f.ext_raw, 0.2).l_int);
  enc = 0.0;
  for (auto* p : pb.encoder().params()) enc += p->grad.squaredNorm();
  EXPECT_GT(enc, 0.0);
}

TEST(StopGradient, CriticDoesNotTrainEncoder) {
  Fixture f;
  PolicyBundle& pb = *f.bundle;
  for (auto* p : pb.params()) p->zero_grad();
  Tape t;
  const Var z = pb.encode(t, t.constant(f.int_n), true);
  t.backward(sum(pb.critic(t, t.constant(f.obs_n), stop_gradient(z), t.constant(f.ext_n), true)));
  for (auto* p : pb.encoder().params()) EXPECT_EQ(p->grad.squaredNorm(), 0.0) << p->name;
}

TEST(Gae, MatchesBruteForce) {
  std::mt19937_64 g(99);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u;
  for (int trial = 0; trial < 50; ++trial) {
    const int len = 1 + trial;
    Eigen::VectorXd r(len), v(len), d(len);
    for (int i = 0; i < len; ++i) {
      r[i] = n(g);
      v[i] = n(g);
      d[i] = u(g) < 0.1 ? 1.0 : 0.0;
    }
    const double last = n(g), gamma = 0.9 + 0.09 * u(g), lambda = 0.8 + 0.19 * u(g);
    const GaeResult res = gae(r, v, d, gamma, lambda, last);
    const Eigen::VectorXd want = oracle::gae_brute(r, v, d, gamma, lambda, last);
    EXPECT_LT((res.advantages - want).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((res.returns - (want + v)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Gae, BufferComputesPerEnv) {
  RolloutBuffer buf;
  const int h = 7, e = 3;
  buf.allocate(h, e, 10);
  std::mt19937_64 g(5);
  std::normal_distribution<double> n;
  for (int i = 0; i < buf.size(); ++i) {
    buf.rewards[i] = n(g);
    buf.values[i] = n(g);
    buf.dones[i] = i == 4 ? 1.0 : 0.0;
  }
  for (int k = 0; k < e; ++k) buf.last_values[k] = n(g);
  buf.compute_returns(0.99, 0.95);
  for (int k = 0; k < e; ++k) {
    Eigen::VectorXd r(h), v(h), d(h);
    for (int t = 0; t < h; ++t) {
      const int row = RolloutBuffer::row(t, k, e);
      r[t] = buf.rewards[row];
      v[t] = buf.values[row];
      d[t] = buf.dones[row];
    }
    const Eigen::VectorXd want = oracle::gae_brute(r, v, d, 0.99, 0.95, buf.last_values[k]);
    for (int t = 0; t < h; ++t)
      EXPECT_NEAR(buf.advantages[RolloutBuffer::row(t, k, e)], want[t], 1e-10);
  }
}
