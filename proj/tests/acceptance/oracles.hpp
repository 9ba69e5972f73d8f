#pragma once

// Reference computations written independently of the library, used by both
// the unit tests and the acceptance binary.

#include <array>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "atr/learner/autodiff.hpp"
#include "atr/learner/networks.hpp"
#include "atr/rewards/rewards.hpp"

namespace atr::oracle {

/// Terms r0..r17 straight from the reward table. The support test uses
/// triangle membership (a point is in the hull of <= 4 points iff it is in a
/// triangle of three of them), not a hull construction.
std::array<double, 18> reward_terms(const rewards::RewardInputs& in,
                                    const rewards::RewardWeights& w);

/// 20 fixed synthetic states. The first three are the hand-computed cases:
/// 0.5 m/s forward error, one foot lifted, 10 W on one joint.
std::vector<rewards::RewardInputs> synthetic_states();

/// A_t = sum_l (gamma lambda)^l delta_{t+l}, truncated at episode ends, by
/// explicit double summation.
Eigen::VectorXd gae_brute(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
                          const Eigen::VectorXd& dones, double gamma, double lambda,
                          double last_value);

/// Positive root of r2 v^2 + r1 v + r0 = drive.
double terminal_speed(double drive, double r0, double r1, double r2);

/// Worst relative mismatch between the tape gradient and central differences,
/// per parameter tensor: |g - g_fd| / max(|g|, |g_fd|, floor) over up to
/// `per_param` entries of each tensor (the norms are taken over those
/// entries). `loss` must rebuild the graph from the current parameter values.
struct FdReport {
  double worst = 0.0;
  std::string worst_name;
  int checked = 0;
};
using LossFn = std::function<learner::Var(learner::Tape&)>;
FdReport fd_check(const LossFn& loss, const std::vector<learner::Param*>& params,
                  int per_param = 6, double h = 1e-6, double floor = 1e-8);

/// Tape gradient of `loss` against central differences of `reference`, a
/// loss equal to `loss` at the current parameters with every stop-gradient
/// operand replaced by a constant. A value mismatch between the two at the
/// current parameters is reported as an infinite error.
FdReport fd_check(const LossFn& loss, const LossFn& reference,
                  const std::vector<learner::Param*>& params, int per_param = 6,
                  double h = 1e-6, double floor = 1e-8);

/// Reference for the intrinsic estimator loss with z and z_hat frozen at the
/// current parameters:
/// (|z_hat - z0|^2 + lambda |z_hat0 - z|^2) / rows.
LossFn frozen_l_int(learner::PolicyBundle& pb, const learner::Mat& x_int_n,
                    const learner::Mat& seq_n, double lambda);

}  // namespace atr::oracle
