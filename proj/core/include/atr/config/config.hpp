#pragma once

#include <filesystem>
#include <string>

#include "atr/env/env.hpp"
#include "atr/learner/networks.hpp"
#include "atr/learner/ppo.hpp"

namespace atr::config {

/// Everything a training run needs. Serialized as YAML:
///
///   robot:        {preset}
///   transporter:  {kind}
///   env:          {batch, seed, threads, dt_physics, decimation, episode_length_s,
///                  command_period_s, history, action_scale, obs_noise,
///                  init_height_noise, init_joint_noise, h_des}
///   perturbation: {enabled, period_s, duration_s, body_max, deck_max}
///   dr:           {mode}
///   rewards:      {k, f_tol, tracking_sigma}
///   net:          {profile, temporal, init_std}
///   ppo:          {horizon, iterations, gamma, gae_lambda, clip, epochs, minibatches,
///                  learning_rate, entropy_coef, value_coef, grad_clip, reward_scale,
///                  positive_reward, checkpoint_every}
///   estimators:   {roa_lambda, coef, p_use_estimate}
///   curriculum:   {v_init, w_init}
///
/// Every key is optional; unknown keys are rejected.
struct RunConfig {
  env::EnvConfig env;
  learner::NetConfig net;
  learner::TrainConfig train;

  void validate() const;
};

RunConfig parse(const std::string& yaml_text);
RunConfig load(const std::filesystem::path& path);
std::string to_yaml(const RunConfig& cfg);

}  // namespace atr::config
