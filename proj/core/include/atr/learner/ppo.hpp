#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "atr/learner/autodiff.hpp"
#include "atr/learner/networks.hpp"
#include "atr/sim/rng.hpp"

namespace atr::learner {

struct TrainConfig {
  int num_envs = 64;
  int horizon = 24;
  int iterations = 500;
  /// Worker threads for environment stepping; results do not depend on it.
  int threads = 1;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  int epochs = 5;
  int minibatches = 4;
  double learning_rate = 3e-4;
  double entropy_coef = 0.005;
  double value_coef = 0.5;
  double grad_clip = 1.0;
  double roa_lambda = 0.2;
  double estimator_coef = 1.0;
  /// Multiplies env rewards inside the optimizer; <= 0 selects the control
  /// step length.
  double reward_scale = 0.0;
  /// Floors the per-step training reward, termination penalty excluded, at
  /// zero so that surviving never scores below dying.
  bool positive_reward = true;
  /// Probability that a training episode runs with the actor on the
  /// estimates instead of the privileged inputs, drawn per env at reset.
  double p_use_estimate = 0.0;
  double cmd_v_init = 0.5;
  double cmd_w_init = 0.3;
  int checkpoint_every = 50;

  void validate() const;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
};

/// One Adam step over `params` using their accumulated gradients, followed by
/// float rounding of values and moments.
void adam_step(const std::vector<Param*>& params, AdamState& state, double lr);

/// Scales gradients so their joint L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
double clip_grad_norm(const std::vector<Param*>& params, double max_norm);

struct GaeResult {
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};

/// Generalized advantage estimation over one trajectory. dones[t] = 1 cuts
/// the bootstrap after step t; `last_value` bootstraps the final step.
GaeResult gae(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
              const Eigen::VectorXd& dones, double gamma, double lambda,
              double last_value = 0.0);

/// Zero mean, unit standard deviation (std floored at 1e-8).
Eigen::VectorXd normalize(const Eigen::VectorXd& x);

/// Samples in env-major order within each time step: row t * N + e.
struct RolloutBuffer {
  int horizon = 0;
  int num_envs = 0;
  Mat obs;
  Mat history;
  Mat x_int;
  Mat x_ext;
  Mat actions;
  Eigen::VectorXd log_probs;
  Eigen::VectorXd values;
  Eigen::VectorXd rewards;
  Eigen::VectorXd dones;
  Eigen::VectorXd last_values;  // per env
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
  /// Rows where the actor acted on the estimates (1) instead of the
  /// privileged inputs (0), with the estimates it saw.
  Eigen::VectorXd use_estimate;
  Mat z_hat;
  Mat x_ext_hat_n;

  void allocate(int horizon, int num_envs, int history, int latent = 0);
  int size() const { return horizon * num_envs; }
  static int row(int t, int e, int num_envs) { return t * num_envs + e; }
  /// Fills advantages and returns per env.
  void compute_returns(double gamma, double lambda);
};

/// Inputs of one optimization batch, normalized.
struct BatchInputs {
  Mat obs_n;
  Mat seq_n;
  Mat x_int_n;
  Mat x_ext_n;
  Mat x_ext;
  /// Optional, B x 1. Rows set to 1 feed the actor the stored estimates
  /// (constants) in place of the encoder latent and privileged extrinsics.
  Mat use_estimate;
  Mat z_hat;
  Mat x_ext_hat_n;
};

BatchInputs gather(const PolicyBundle& bundle, const RolloutBuffer& buf,
                   const std::vector<int>& rows);

struct EstimatorLosses {
  Var l_int;
  Var l_ext;
};

/// L_int = |z_hat - sg z|^2 + lambda |sg z_hat - z|^2 and L_ext =
/// |x_hat - x_ext|^2, both averaged over rows. `z` must be the differentiable
/// encoder output.
EstimatorLosses estimator_losses(const PolicyBundle& bundle, Tape& t, const Var& z,
                                 const Var& seq, const Mat& x_ext, double lambda);

struct UpdateMetrics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double l_int = 0.0;
  double l_ext = 0.0;
  int skipped = 0;
};

/// PPO epochs over the buffer together with the estimator losses.
UpdateMetrics ppo_update(PolicyBundle& bundle, RolloutBuffer& buf, const TrainConfig& cfg,
                         AdamState& adam, sim::Rng& rng);

struct LossParts {
  Var total;
  Var policy;
  Var value;
  Var entropy;
  Var l_int;
  Var l_ext;
  Var log_prob;
};

/// Builds the full training loss on a tape.
LossParts build_loss(const PolicyBundle& bundle, Tape& t, const BatchInputs& in,
                     const Mat& actions, const Mat& old_log_probs, const Mat& advantages,
                     const Mat& returns, const TrainConfig& cfg);

}  // namespace atr::learner
