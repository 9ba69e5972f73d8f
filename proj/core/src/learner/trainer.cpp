#include "atr/learner/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace atr::learner {

namespace {

constexpr std::uint64_t kLearnerStream = 0x55;

double reward_scale(const config::RunConfig& c) {
  return c.train.reward_scale > 0.0 ? c.train.reward_scale : c.env.dt_ctrl();
}

}  // namespace

double training_reward(const env::StepResult& r, bool positive) {
  if (!positive) return r.reward;
  const double term = r.terms[rewards::kNumTerms - 1];
  return std::max(r.reward - term, 0.0) + term;
}

PolicyInputs pack(const std::vector<env::Frame>& frames) {
  const auto n = static_cast<Eigen::Index>(frames.size());
  PolicyInputs in;
  const Eigen::Index hcols = frames.empty() ? 0 : frames[0].history.size();
  in.obs.resize(n, env::kObsDim);
  in.history.resize(n, hcols);
  in.x_int.resize(n, env::kIntDim);
  in.x_ext.resize(n, env::kExtDim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& f = frames[static_cast<std::size_t>(i)];
    in.obs.row(i) = f.obs.transpose();
    in.history.row(i) = Eigen::Map<const Eigen::RowVectorXd>(f.history.data(), hcols);
    in.x_int.row(i) = f.priv.x_int.transpose();
    in.x_ext.row(i) = f.priv.x_ext.transpose();
  }
  return in;
}

Trainer::Trainer(const config::RunConfig& cfg)
    : cfg_(cfg), rng_(cfg.env.seed, kLearnerStream) {
  cfg_.validate();
  envs_ = std::make_unique<env::VecEnv>(cfg_.env, cfg_.train.num_envs, cfg_.train.threads);
  bundle_ = std::make_unique<PolicyBundle>(cfg_.net, envs_->at(0).obs_offset(), cfg_.env.seed);
  grid_ = curriculum::CommandGrid::init(cfg_.train.cmd_v_init, cfg_.train.cmd_w_init);
  rule_ = curriculum::rule_from_weights(cfg_.env.weights.k[0], cfg_.env.weights.k[1]);
  attach_command_source();
  frames_ = envs_->reset();
  train_return_.assign(static_cast<std::size_t>(cfg_.train.num_envs), 0.0);
  on_estimates_.resize(static_cast<std::size_t>(cfg_.train.num_envs));
  for (double& f : on_estimates_) f = draw_on_estimates();
}

double Trainer::draw_on_estimates() {
  // no draw at p = 0 keeps the learner stream unchanged
  if (cfg_.train.p_use_estimate <= 0.0) return 0.0;
  return rng_.uniform() < cfg_.train.p_use_estimate ? 1.0 : 0.0;
}

void Trainer::attach_command_source() {
  const curriculum::CommandGrid* g = &grid_;
  envs_->set_command_source([g](sim::Rng& r) { return g->sample(r); });
}

IterationStats Trainer::iterate() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& tc = cfg_.train;
  const int n = tc.num_envs;
  const double scale = reward_scale(cfg_);
  buffer_.allocate(tc.horizon, n, cfg_.env.history, bundle_->encoder().out_dim());
  const std::size_t first_new_episode = episodes_.size();

  IterationStats s;
  const Eigen::RowVectorXd log_std = bundle_->log_std_value();
  const Eigen::RowVectorXd std_dev = log_std.array().exp();

  for (int t = 0; t < tc.horizon; ++t) {
    const PolicyInputs in = pack(frames_);
    PolicyOutputs out = bundle_->evaluate(in, Mode::kTraining, true, false);
    // some episodes act on the estimates, as they will when deployed
    if (std::find(on_estimates_.begin(), on_estimates_.end(), 1.0) != on_estimates_.end()) {
      const PolicyOutputs dep = bundle_->evaluate(in, Mode::kDeployment, false, false);
      const Mat ext_hat_n = bundle_->normalizer().extrinsic(dep.ext_hat);
      for (int e = 0; e < n; ++e) {
        if (on_estimates_[e] == 0.0) continue;
        const int row = RolloutBuffer::row(t, e, n);
        out.mean.row(e) = dep.mean.row(e);
        buffer_.use_estimate[row] = 1.0;
        buffer_.z_hat.row(row) = dep.z_hat.row(e);
        buffer_.x_ext_hat_n.row(row) = ext_hat_n.row(e);
      }
    }
    Mat actions(n, env::kActDim);
    for (int e = 0; e < n; ++e)
      for (int j = 0; j < env::kActDim; ++j)
        actions(e, j) = out.mean(e, j) + std_dev(j) * rng_.normal();
    const Eigen::VectorXd lp = gaussian_log_prob(out.mean, log_std, actions);

    for (int e = 0; e < n; ++e) {
      const int row = RolloutBuffer::row(t, e, n);
      buffer_.obs.row(row) = in.obs.row(e);
      buffer_.history.row(row) = in.history.row(e);
      buffer_.x_int.row(row) = in.x_int.row(e);
      buffer_.x_ext.row(row) = in.x_ext.row(e);
      buffer_.actions.row(row) = actions.row(e);
      buffer_.log_probs[row] = lp[e];
      buffer_.values[row] = out.value(e, 0);
    }

    std::vector<env::StepResult> res = envs_->step(actions);
    env_steps_ += static_cast<std::uint64_t>(n);

    // bootstrap truncated episodes from their last frame
    std::vector<env::Frame> cut;
    std::vector<int> cut_env;
    for (int e = 0; e < n; ++e) {
      if (res[e].reason == env::Termination::kTimeout && res[e].terminal) {
        cut.push_back(*res[e].terminal);
        cut_env.push_back(e);
      }
    }
    Eigen::VectorXd cut_value = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cut.size()));
    if (!cut.empty()) {
      const PolicyOutputs v = bundle_->evaluate(pack(cut), Mode::kTraining, true, false);
      cut_value = v.value.col(0);
    }

    std::size_t c = 0;
    for (int e = 0; e < n; ++e) {
      const int row = RolloutBuffer::row(t, e, n);
      const double r_train = training_reward(res[e], tc.positive_reward);
      train_return_[e] += r_train;
      double r = r_train * scale;
      if (c < cut_env.size() && cut_env[c] == e) r += tc.gamma * cut_value[static_cast<Eigen::Index>(c++)];
      buffer_.rewards[row] = r;
      buffer_.dones[row] = res[e].done ? 1.0 : 0.0;
      for (int k = 0; k < rewards::kNumTerms; ++k) s.mean_terms[k] += res[e].terms[k];
      if (res[e].segment) grid_.update(*res[e].segment, rule_);
      if (res[e].done) {
        episodes_.push_back(EpisodeRecord{iteration_, e, res[e].episode_return, train_return_[e],
                                          res[e].episode_length, res[e].reason});
        train_return_[e] = 0.0;
        on_estimates_[e] = draw_on_estimates();
      }
      frames_[static_cast<std::size_t>(e)] = std::move(res[e].frame);
    }
  }
  const PolicyOutputs last = bundle_->evaluate(pack(frames_), Mode::kTraining, true, false);
  buffer_.last_values = last.value.col(0);
  buffer_.compute_returns(tc.gamma, tc.gae_lambda);

  s.update = ppo_update(*bundle_, buffer_, tc, adam_, rng_);
  ++iteration_;

  s.iteration = iteration_;
  s.env_steps = env_steps_;
  for (double& v : s.mean_terms) v /= static_cast<double>(tc.horizon * n);
  s.episodes = static_cast<int>(episodes_.size() - first_new_episode);
  for (std::size_t i = first_new_episode; i < episodes_.size(); ++i) {
    s.mean_return += episodes_[i].episode_return;
    s.mean_train_return += episodes_[i].train_return;
    s.mean_length += episodes_[i].length;
  }
  if (s.episodes > 0) {
    s.mean_return /= s.episodes;
    s.mean_train_return /= s.episodes;
    s.mean_length /= s.episodes;
  }
  s.command_support =
      static_cast<double>(grid_.support_size()) / static_cast<double>(grid_.weights().size());
  s.curriculum_k = grid_.episodes();
  s.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (train_log_.is_open()) write_logs(s, first_new_episode);
  return s;
}

void Trainer::set_output_dir(const std::filesystem::path& dir) {
  out_dir_ = dir;
  std::filesystem::create_directories(dir);
  const auto tl = dir / "train_log.csv";
  const auto el = dir / "episodes.csv";
  const bool new_tl = !std::filesystem::exists(tl);
  const bool new_el = !std::filesystem::exists(el);
  train_log_.open(tl, std::ios::app);
  episode_log_.open(el, std::ios::app);
  if (!train_log_ || !episode_log_) throw std::runtime_error("cannot open logs in " + dir.string());
  if (new_tl) {
    train_log_ << "iteration,env_steps,episodes,mean_return,mean_train_return,mean_length";
    for (int k = 0; k < rewards::kNumTerms; ++k) train_log_ << ",r" << k;
    train_log_ << ",policy_loss,value_loss,entropy,approx_kl,clip_fraction,l_int,l_ext,"
                  "command_support,curriculum_k,wall_s\n";
  }
  if (new_el) episode_log_ << "iteration,env,return,train_return,length,reason\n";
}

void Trainer::write_logs(const IterationStats& s, std::size_t first_new_episode) {
  train_log_.precision(10);
  train_log_ << s.iteration << ',' << s.env_steps << ',' << s.episodes << ',' << s.mean_return
             << ',' << s.mean_train_return << ',' << s.mean_length;
  for (double v : s.mean_terms) train_log_ << ',' << v;
  const auto& u = s.update;
  train_log_ << ',' << u.policy_loss << ',' << u.value_loss << ',' << u.entropy << ','
             << u.approx_kl << ',' << u.clip_fraction << ',' << u.l_int << ',' << u.l_ext << ','
             << s.command_support << ',' << s.curriculum_k << ',' << s.wall_s << '\n';
  train_log_.flush();
  episode_log_.precision(10);
  for (std::size_t i = first_new_episode; i < episodes_.size(); ++i) {
    const auto& e = episodes_[i];
    episode_log_ << e.iteration << ',' << e.env << ',' << e.episode_return << ','
                 << e.train_return << ',' << e.length
                 << ',' << env::to_string(e.reason) << '\n';
  }
  episode_log_.flush();
}

void Trainer::run() {
  const int every = cfg_.train.checkpoint_every;
  while (iteration_ < cfg_.train.iterations) {
    const IterationStats s = iterate();
    if (on_iteration) on_iteration(s);
    if (!out_dir_.empty() && every > 0 && iteration_ % every == 0) {
      save(out_dir_ / ("ckpt_" + std::to_string(iteration_) + ".bin"));
    }
  }
  if (!out_dir_.empty()) save(out_dir_ / "latest.bin");
}

TensorFile Trainer::to_tensors() {
  TensorFile f;
  f.add(Tensor::text("meta/config", config::to_yaml(cfg_)));
  f.add(Tensor::u64("meta/iteration", {static_cast<std::uint64_t>(iteration_)}));
  store_bundle(f, *bundle_, true);
  f.add(Tensor::u64("adam/step", {adam_.step}));
  f.add(Tensor::f64("curriculum/weights", grid_.weights(),
                    {static_cast<std::uint64_t>(grid_.nv()), static_cast<std::uint64_t>(grid_.nw())}));
  f.add(Tensor::u64("curriculum/episodes", {grid_.episodes()}));
  const auto& b = grid_.bounds();
  f.add(Tensor::f64("curriculum/bounds", {b.v_max, b.w_max, b.resolution}));
  f.add(Tensor::u64("rng/learner", {rng_.seed(), rng_.stream(), rng_.counter()}));
  f.add(Tensor::u64("train/env_steps", {env_steps_}));
  f.add(Tensor::f64("train/episode_train_return", train_return_));
  f.add(Tensor::f64("train/on_estimates", on_estimates_));
  for (int i = 0; i < envs_->size(); ++i) {
    const auto& e = envs_->at(i);
    f.add(Tensor::f64("env/" + std::to_string(i) + "/state", e.save_state()));
    f.add(Tensor::u64("env/" + std::to_string(i) + "/rng", {e.rng().counter()}));
  }
  return f;
}

void Trainer::save(const std::filesystem::path& path) { to_tensors().save(path); }

namespace {

curriculum::CommandGrid grid_from(const TensorFile& f) {
  const auto bounds = f.require("curriculum/bounds").as_f64();
  curriculum::GridBounds b{bounds.at(0), bounds.at(1), bounds.at(2)};
  curriculum::CommandGrid g(b);
  const auto w = f.require("curriculum/weights").as_f64();
  if (w.size() != g.weights().size()) throw std::runtime_error("checkpoint: grid size mismatch");
  g.weights() = w;
  g.set_episodes(f.require("curriculum/episodes").as_u64().at(0));
  return g;
}

}  // namespace

std::unique_ptr<Trainer> Trainer::resume(const std::filesystem::path& checkpoint) {
  const TensorFile f = TensorFile::load(checkpoint);
  const config::RunConfig cfg = config::parse(f.require("meta/config").as_text());
  auto t = std::make_unique<Trainer>(cfg);
  restore_bundle(f, *t->bundle_, true);
  t->adam_.step = f.require("adam/step").as_u64().at(0);
  t->grid_ = grid_from(f);
  const auto r = f.require("rng/learner").as_u64();
  t->rng_ = sim::Rng(r.at(0), r.at(1));
  t->rng_.set_counter(r.at(2));
  t->iteration_ = static_cast<int>(f.require("meta/iteration").as_u64().at(0));
  t->env_steps_ = f.require("train/env_steps").as_u64().at(0);
  t->train_return_ = f.require("train/episode_train_return").as_f64();
  t->on_estimates_ = f.require("train/on_estimates").as_f64();
  for (int i = 0; i < t->envs_->size(); ++i) {
    const std::string k = "env/" + std::to_string(i);
    t->envs_->at(i).load_state(f.require(k + "/state").as_f64(),
                               f.require(k + "/rng").as_u64().at(0));
    t->frames_[static_cast<std::size_t>(i)] = t->envs_->at(i).frame();
  }
  return t;
}

LoadedPolicy load_policy(const std::filesystem::path& checkpoint) {
  const TensorFile f = TensorFile::load(checkpoint);
  LoadedPolicy p;
  p.config = config::parse(f.require("meta/config").as_text());
  const env::Env probe(p.config.env, 0);
  p.bundle = std::make_unique<PolicyBundle>(p.config.net, probe.obs_offset(), p.config.env.seed);
  restore_bundle(f, *p.bundle, false);
  p.grid = grid_from(f);
  p.iteration = static_cast<int>(f.require("meta/iteration").as_u64().at(0));
  return p;
}

}  // namespace atr::learner
