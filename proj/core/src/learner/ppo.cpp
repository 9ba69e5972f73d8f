#include "atr/learner/ppo.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace atr::learner {

void TrainConfig::validate() const {
  auto fail = [](const char* m) { throw std::invalid_argument(std::string("train config: ") + m); };
  if (num_envs < 1 || horizon < 1) fail("num_envs and horizon must be positive");
  if (iterations < 0) fail("iterations must be non-negative");
  if (!(gamma >= 0.0 && gamma < 1.0)) fail("gamma must lie in [0, 1)");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) fail("gae_lambda must lie in [0, 1]");
  if (!(clip > 0.0)) fail("clip must be positive");
  if (epochs < 1 || minibatches < 1) fail("epochs and minibatches must be positive");
  if (minibatches > num_envs * horizon) fail("more minibatches than samples");
  if (!(learning_rate > 0.0)) fail("learning rate must be positive");
  if (roa_lambda < 0.0 || entropy_coef < 0.0 || value_coef < 0.0 || estimator_coef < 0.0)
    fail("loss weights must be non-negative");
  if (p_use_estimate < 0.0 || p_use_estimate > 1.0) fail("p_use_estimate must lie in [0, 1]");
  if (threads < 1) fail("threads must be positive");
}

void adam_step(const std::vector<Param*>& params, AdamState& s, double lr) {
  ++s.step;
  const double t = static_cast<double>(s.step);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  for (Param* p : params) {
    if (p->grad.size() == 0) continue;
    p->m = s.beta1 * p->m + (1.0 - s.beta1) * p->grad;
    p->v = s.beta2 * p->v + (1.0 - s.beta2) * p->grad.cwiseAbs2();
    p->value.array() -= lr * (p->m.array() / c1) / ((p->v.array() / c2).sqrt() + s.eps);
    quantize(*p);
  }
}

double clip_grad_norm(const std::vector<Param*>& params, double max_norm) {
  double sq = 0.0;
  for (Param* p : params) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double k = max_norm / (norm + 1e-12);
    for (Param* p : params) p->grad *= k;
  }
  return norm;
}

GaeResult gae(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
              const Eigen::VectorXd& dones, double gamma, double lambda, double last_value) {
  const Eigen::Index n = rewards.size();
  if (values.size() != n || dones.size() != n) throw std::invalid_argument("gae: size mismatch");
  GaeResult r;
  r.advantages = Eigen::VectorXd::Zero(n);
  double next_adv = 0.0;
  double next_value = last_value;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const double live = 1.0 - dones[t];
    const double delta = rewards[t] + gamma * next_value * live - values[t];
    next_adv = delta + gamma * lambda * live * next_adv;
    r.advantages[t] = next_adv;
    next_value = values[t];
  }
  r.returns = r.advantages + values;
  return r;
}

Eigen::VectorXd normalize(const Eigen::VectorXd& x) {
  if (x.size() == 0) return x;
  const double m = x.mean();
  const double var = (x.array() - m).square().mean();
  return (x.array() - m) / std::max(std::sqrt(var), 1e-8);
}

void RolloutBuffer::allocate(int h, int n, int hist, int latent) {
  horizon = h;
  num_envs = n;
  const int s = h * n;
  obs = Mat::Zero(s, env::kObsDim);
  history = Mat::Zero(s, hist * env::kObsDim);
  x_int = Mat::Zero(s, env::kIntDim);
  x_ext = Mat::Zero(s, env::kExtDim);
  actions = Mat::Zero(s, env::kActDim);
  log_probs = Eigen::VectorXd::Zero(s);
  values = Eigen::VectorXd::Zero(s);
  rewards = Eigen::VectorXd::Zero(s);
  dones = Eigen::VectorXd::Zero(s);
  last_values = Eigen::VectorXd::Zero(n);
  advantages = Eigen::VectorXd::Zero(s);
  returns = Eigen::VectorXd::Zero(s);
  use_estimate = Eigen::VectorXd::Zero(s);
  z_hat = Mat::Zero(s, latent);
  x_ext_hat_n = Mat::Zero(s, env::kExtDim);
}

void RolloutBuffer::compute_returns(double gamma, double lambda) {
  for (int e = 0; e < num_envs; ++e) {
    Eigen::VectorXd r(horizon), v(horizon), d(horizon);
    for (int t = 0; t < horizon; ++t) {
      const int i = row(t, e, num_envs);
      r[t] = rewards[i];
      v[t] = values[i];
      d[t] = dones[i];
    }
    const GaeResult g = gae(r, v, d, gamma, lambda, last_values[e]);
    for (int t = 0; t < horizon; ++t) {
      const int i = row(t, e, num_envs);
      advantages[i] = g.advantages[t];
      returns[i] = g.returns[t];
    }
  }
}

BatchInputs gather(const PolicyBundle& bundle, const RolloutBuffer& buf,
                   const std::vector<int>& rows) {
  const auto& norm = bundle.normalizer();
  const int b = static_cast<int>(rows.size());
  Mat obs(b, env::kObsDim), hist(b, buf.history.cols()), xi(b, env::kIntDim),
      xe(b, env::kExtDim);
  for (int k = 0; k < b; ++k) {
    obs.row(k) = buf.obs.row(rows[k]);
    hist.row(k) = buf.history.row(rows[k]);
    xi.row(k) = buf.x_int.row(rows[k]);
    xe.row(k) = buf.x_ext.row(rows[k]);
  }
  BatchInputs in;
  in.obs_n = norm.obs(obs);
  in.seq_n = norm.history(hist, bundle.config().history);
  in.x_int_n = norm.intrinsic(xi);
  in.x_ext_n = norm.extrinsic(xe);
  in.x_ext = xe;
  if (buf.use_estimate.size() == buf.size() && buf.z_hat.rows() == buf.size()) {
    bool any = false;
    for (int r : rows) any = any || buf.use_estimate[r] != 0.0;
    if (any) {
      in.use_estimate = Mat(b, 1);
      in.z_hat = Mat(b, buf.z_hat.cols());
      in.x_ext_hat_n = Mat(b, env::kExtDim);
      for (int k = 0; k < b; ++k) {
        in.use_estimate(k, 0) = buf.use_estimate[rows[k]];
        in.z_hat.row(k) = buf.z_hat.row(rows[k]);
        in.x_ext_hat_n.row(k) = buf.x_ext_hat_n.row(rows[k]);
      }
    }
  }
  return in;
}

EstimatorLosses estimator_losses(const PolicyBundle& bundle, Tape& t, const Var& z,
                                 const Var& seq, const Mat& x_ext, double lambda) {
  const double rows = static_cast<double>(seq.rows());
  const Var z_hat = bundle.estimate_intrinsic(t, seq, true);
  const Var regress = sum(square(sub(z_hat, stop_gradient(z))));
  const Var pull = sum(square(sub(stop_gradient(z_hat), z)));
  EstimatorLosses out;
  out.l_int = scale(add(regress, scale(pull, lambda)), 1.0 / rows);
  const Var x_hat = bundle.estimate_extrinsic(t, seq, true);
  out.l_ext = scale(sum(square(sub(x_hat, t.constant(x_ext)))), 1.0 / rows);
  return out;
}

LossParts build_loss(const PolicyBundle& bundle, Tape& t, const BatchInputs& in,
                     const Mat& actions, const Mat& old_log_probs, const Mat& advantages,
                     const Mat& returns, const TrainConfig& cfg) {
  LossParts p;
  const Var obs_n = t.constant(in.obs_n);
  const Var ext_n = t.constant(in.x_ext_n);
  const Var seq = t.constant(in.seq_n);
  const Var z = bundle.encode(t, t.constant(in.x_int_n), true);
  Var z_act = z, ext_act = ext_n;
  if (in.use_estimate.rows() == in.obs_n.rows() && in.use_estimate.rows() > 0) {
    const Mat mz = in.use_estimate.replicate(1, z.cols());
    const Mat me = in.use_estimate.replicate(1, env::kExtDim);
    const Mat keep = (1.0 - mz.array()).matrix();
    z_act = add(mul(z, t.constant(keep)), t.constant(mz.cwiseProduct(in.z_hat)));
    ext_act = t.constant(me.cwiseProduct(in.x_ext_hat_n) +
                         (1.0 - me.array()).matrix().cwiseProduct(in.x_ext_n));
  }
  const Var mu = bundle.actor_mean(t, obs_n, z_act, ext_act, true);
  const Var value = bundle.critic(t, obs_n, stop_gradient(z), ext_n, true);
  const Var ls = bundle.log_std(t, true);

  p.log_prob = gaussian_log_prob(mu, ls, actions);
  p.policy = ppo_clip_loss(p.log_prob, old_log_probs, advantages, cfg.clip);
  p.value = mean(square(sub(value, t.constant(returns))));
  const double k = static_cast<double>(ls.cols()) * 0.5 * (1.0 + std::log(2.0 * std::numbers::pi));
  p.entropy = add_scalar(sum(ls), k);
  const EstimatorLosses est = estimator_losses(bundle, t, z, seq, in.x_ext, cfg.roa_lambda);
  p.l_int = est.l_int;
  p.l_ext = est.l_ext;
  p.total = add(add(p.policy, scale(p.value, cfg.value_coef)),
                add(scale(p.entropy, -cfg.entropy_coef),
                    scale(add(p.l_int, p.l_ext), cfg.estimator_coef)));
  return p;
}

UpdateMetrics ppo_update(PolicyBundle& bundle, RolloutBuffer& buf, const TrainConfig& cfg,
                         AdamState& adam, sim::Rng& rng) {
  UpdateMetrics m;
  const int n = buf.size();
  const Eigen::VectorXd adv = normalize(buf.advantages);
  std::vector<Param*> all = bundle.params();
  std::vector<Param*> pol = bundle.policy_params();
  std::vector<Param*> est = bundle.estimator_params();

  std::vector<int> order(static_cast<std::size_t>(n));
  int updates = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i) + 1));
      std::swap(order[i], order[j]);
    }
    for (int mb = 0; mb < cfg.minibatches; ++mb) {
      const int begin = mb * n / cfg.minibatches;
      const int end = (mb + 1) * n / cfg.minibatches;
      std::vector<int> rows(order.begin() + begin, order.begin() + end);
      const int b = end - begin;
      const BatchInputs in = gather(bundle, buf, rows);
      Mat actions(b, env::kActDim), old_lp(b, 1), a(b, 1), ret(b, 1);
      for (int k = 0; k < b; ++k) {
        actions.row(k) = buf.actions.row(rows[k]);
        old_lp(k, 0) = buf.log_probs[rows[k]];
        a(k, 0) = adv[rows[k]];
        ret(k, 0) = buf.returns[rows[k]];
      }
      Tape t;
      const LossParts loss = build_loss(bundle, t, in, actions, old_lp, a, ret, cfg);
      if (!std::isfinite(loss.total.value()(0, 0))) {
        ++m.skipped;
        continue;
      }
      for (Param* p : all) p->zero_grad();
      t.backward(loss.total);
      bool finite = true;
      for (Param* p : all) finite = finite && p->grad.allFinite();
      if (!finite) {
        ++m.skipped;
        continue;
      }
      clip_grad_norm(pol, cfg.grad_clip);
      clip_grad_norm(est, cfg.grad_clip);
      adam_step(all, adam, cfg.learning_rate);

      const Mat& lp = loss.log_prob.value();
      double kl = 0.0, clipped = 0.0;
      for (int k = 0; k < b; ++k) {
        const double d = lp(k, 0) - old_lp(k, 0);
        kl += (std::exp(d) - 1.0) - d;
        if (std::abs(std::exp(d) - 1.0) > cfg.clip) clipped += 1.0;
      }
      m.approx_kl += kl / b;
      m.clip_fraction += clipped / b;
      m.policy_loss += loss.policy.value()(0, 0);
      m.value_loss += loss.value.value()(0, 0);
      m.entropy += loss.entropy.value()(0, 0);
      m.l_int += loss.l_int.value()(0, 0);
      m.l_ext += loss.l_ext.value()(0, 0);
      ++updates;
    }
  }
  if (updates > 0) {
    const double k = 1.0 / updates;
    m.policy_loss *= k;
    m.value_loss *= k;
    m.entropy *= k;
    m.approx_kl *= k;
    m.clip_fraction *= k;
    m.l_int *= k;
    m.l_ext *= k;
  }
  return m;
}

}  // namespace atr::learner
