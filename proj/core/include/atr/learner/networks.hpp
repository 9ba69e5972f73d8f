#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "atr/env/env.hpp"
#include "atr/learner/autodiff.hpp"
#include "atr/sim/rng.hpp"

namespace atr::learner {

inline constexpr int kLatentDim = 16;
inline constexpr int kPolicyInputDim = env::kObsDim + kLatentDim + env::kExtDim;  // 78

/// Layer widths. "full" follows the reference architecture, "small" divides
/// every width by four for CPU runs.
struct NetConfig {
  std::string profile = "small";
  /// "cnn_gru" or "flat".
  std::string temporal = "cnn_gru";
  int history = 10;
  double init_std = 0.3;

  std::vector<int> policy_hidden() const;
  std::vector<int> encoder_hidden() const;
  int conv_channels() const;
  int gru_hidden() const;
  int estimator_dense() const;
  void validate() const;
};

/// Dense stack with ELU on hidden layers and a linear output.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& name, int in, const std::vector<int>& hidden, int out, sim::Rng& rng,
      double out_gain = 1.0);

  /// `train` registers parameters for gradients; otherwise weights enter as
  /// constants.
  Var forward(Tape& tape, const Var& x, bool train) const;
  std::vector<Param*> params();
  int in_dim() const { return in_; }
  int out_dim() const { return out_; }

 private:
  int in_ = 0;
  int out_ = 0;
  mutable std::vector<Param> w_;
  mutable std::vector<Param> b_;
};

/// History encoder. `cnn_gru`: causal 1-D convolution over time, gated
/// recurrent cell, dense head. `flat`: dense stack over the flattened window.
class TemporalEncoder {
 public:
  TemporalEncoder() = default;
  TemporalEncoder(const std::string& name, const NetConfig& cfg, int in_dim, int out_dim,
                  sim::Rng& rng);

  /// seq: B x (H * in_dim), time-major, oldest step first.
  Var forward(Tape& tape, const Var& seq, bool train) const;
  /// Head output after every time step (cnn_gru only); element t depends on
  /// steps 0..t only.
  std::vector<Var> forward_all(Tape& tape, const Var& seq, bool train) const;
  std::vector<Param*> params();
  const std::string& kind() const { return kind_; }

 private:
  Var recur(Tape& tape, const Var& seq, bool train, std::vector<Var>* states) const;

  std::string kind_ = "cnn_gru";
  int steps_ = 10;
  int in_ = env::kObsDim;
  int kernel_ = 3;
  mutable Param conv_w_, conv_b_;
  mutable Param gru_wx_, gru_uh_, gru_b_;
  Mlp head_;
  Mlp flat_;
};

/// Fixed affine input normalization.
struct Normalizer {
  env::ObsVec obs_offset = env::ObsVec::Zero();
  env::ObsVec obs_scale = env::ObsVec::Ones();
  env::IntVec int_mid = env::IntVec::Zero();
  env::IntVec int_half = env::IntVec::Ones();
  env::ExtVec ext_scale = env::ExtVec::Ones();

  static Normalizer make(const env::ObsVec& obs_offset);
  /// Rows are samples.
  Mat obs(const Mat& raw) const;
  Mat intrinsic(const Mat& raw) const;
  Mat extrinsic(const Mat& raw) const;
  /// raw: B x (H * 46) with the most recent observation first and zero rows
  /// before the episode start. Output is time-major, oldest first; padding
  /// stays zero.
  Mat history(const Mat& raw, int steps) const;
};

enum class Mode { kTraining, kDeployment };

struct PolicyInputs {
  Mat obs;      // B x 46, raw
  Mat history;  // B x (H * 46), raw, most recent first
  Mat x_int;    // B x 34, raw
  Mat x_ext;    // B x 16, raw
};

struct PolicyOutputs {
  Mat mean;     // B x 12
  Mat value;    // B x 1
  Mat z;        // encoder latent (training mode)
  Mat z_hat;    // intrinsic estimate
  Mat ext_hat;  // extrinsic estimate, raw units
};

/// Actor, critic, privileged encoder, both estimators and the action log-std.
class PolicyBundle {
 public:
  PolicyBundle(const NetConfig& cfg, const env::ObsVec& obs_offset, std::uint64_t seed);
  PolicyBundle(const PolicyBundle&) = delete;
  PolicyBundle& operator=(const PolicyBundle&) = delete;

  const NetConfig& config() const { return cfg_; }
  const Normalizer& normalizer() const { return norm_; }

  /// All parameters in a fixed order with unique names.
  std::vector<Param*> params();
  std::vector<Param*> policy_params();
  std::vector<Param*> estimator_params();
  std::size_t parameter_count();

  /// Gradient-free evaluation. Training mode feeds the encoder latent and the
  /// true extrinsic state to actor and critic; deployment mode substitutes
  /// both estimates.
  PolicyOutputs evaluate(const PolicyInputs& in, Mode mode, bool with_value = true,
                         bool with_estimates = false) const;

  // differentiable pieces
  Var encode(Tape& t, const Var& x_int_n, bool train) const;
  Var actor_mean(Tape& t, const Var& obs_n, const Var& z, const Var& ext_n, bool train) const;
  Var critic(Tape& t, const Var& obs_n, const Var& z, const Var& ext_n, bool train) const;
  Var estimate_intrinsic(Tape& t, const Var& seq, bool train) const;
  /// Raw units; contact indicators squashed to [0, 1].
  Var estimate_extrinsic(Tape& t, const Var& seq, bool train) const;
  Var log_std(Tape& t, bool train) const;

  Eigen::RowVectorXd log_std_value() const { return log_std_.value.row(0); }

  Mlp& actor() { return actor_; }
  Mlp& critic_net() { return critic_; }
  Mlp& encoder() { return encoder_; }
  TemporalEncoder& intrinsic_estimator() { return est_int_; }
  TemporalEncoder& extrinsic_estimator() { return est_ext_; }
  Param& log_std_param() { return log_std_; }

 private:
  NetConfig cfg_;
  Normalizer norm_;
  Mlp actor_;
  Mlp critic_;
  Mlp encoder_;
  TemporalEncoder est_int_;
  TemporalEncoder est_ext_;
  mutable Param log_std_;
};

/// Rounds every entry to the nearest 32-bit float.
void quantize(Mat& m);
void quantize(Param& p);

}  // namespace atr::learner
