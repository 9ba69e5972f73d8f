#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "atr/rewards/rewards.hpp"
#include "atr/rider/rider.hpp"
#include "atr/sim/rng.hpp"
#include "atr/transporter/transporter.hpp"

namespace atr::env {

using sim::Vec3;

inline constexpr int kObsDim = 46;
inline constexpr int kIntDim = 34;
inline constexpr int kExtDim = 16;
inline constexpr int kActDim = 12;

using ObsVec = Eigen::Matrix<double, kObsDim, 1>;
using IntVec = Eigen::Matrix<double, kIntDim, 1>;
using ExtVec = Eigen::Matrix<double, kExtDim, 1>;
using ActVec = Eigen::Matrix<double, kActDim, 1>;

/// Observation slots.
namespace obs_index {
inline constexpr int kAccel = 0;
inline constexpr int kGyro = 3;
inline constexpr int kRollPitch = 6;
inline constexpr int kQ = 8;
inline constexpr int kDq = 20;
inline constexpr int kPrevAction = 32;
inline constexpr int kCommand = 44;
}  // namespace obs_index

/// Intrinsic slots.
namespace int_index {
inline constexpr int kPayload = 0;
inline constexpr int kComShift = 1;
inline constexpr int kPdKp = 4;
inline constexpr int kPdKd = 16;
inline constexpr int kMassDelta = 28;
inline constexpr int kFriction = 29;
inline constexpr int kSbKp = 30;
inline constexpr int kSbKd = 32;
}  // namespace int_index

/// Extrinsic slots.
namespace ext_index {
inline constexpr int kContacts = 0;
inline constexpr int kBodyVel = 4;
inline constexpr int kPlatformVel = 7;
inline constexpr int kPlatformRate = 10;
inline constexpr int kRelPos = 13;
inline constexpr int kRelYaw = 15;
}  // namespace ext_index

enum class DrMode { kTrain, kTest, kOff };
std::string to_string(DrMode m);
DrMode dr_mode_from_string(const std::string& s);

/// Per-component bounds of the intrinsic vector.
struct DrRanges {
  IntVec lo;
  IntVec hi;
  static DrRanges training();
  static DrRanges testing();
};

/// Canonical intrinsic vector used with randomization off.
IntVec nominal_intrinsic();
IntVec sample_intrinsic(DrMode mode, sim::Rng& rng);

struct Command {
  double v = 0.0;
  double w = 0.0;
};

using CommandSource = std::function<Command(sim::Rng&)>;

struct EnvConfig {
  std::string robot = "a1";
  transporter::Kind kind = transporter::Kind::kType1;
  double dt_physics = 0.002;
  int decimation = 10;
  double episode_length_s = 10.0;
  double command_period_s = 5.0;
  double push_period_s = 3.0;
  double push_duration_s = 0.2;
  double push_body_max = 30.0;
  double push_deck_max = 20.0;
  bool perturbations = true;
  DrMode dr = DrMode::kTrain;
  bool obs_noise = false;
  double action_scale = 0.25;
  double init_height_noise = 0.02;
  double init_joint_noise = 0.05;
  int history = 10;
  /// Desired body height above the pivot; <= 0 selects 0.9 x the nominal
  /// standing height of the preset.
  double h_des = 0.0;
  rewards::RewardWeights weights;
  std::uint64_t seed = 1;

  double dt_ctrl() const { return dt_physics * decimation; }
  int ticks(double seconds) const;
  int episode_steps() const { return ticks(episode_length_s); }
  /// Throws std::invalid_argument on an inconsistent configuration.
  void validate() const;
};

enum class Termination { kNone, kFlip, kOffDeck, kLowHeight, kFault, kTimeout };
std::string to_string(Termination t);

struct Privileged {
  IntVec x_int = IntVec::Zero();
  ExtVec x_ext = ExtVec::Zero();
};

/// Observation window, most recent first, zero before the episode start.
using History = Eigen::Matrix<double, Eigen::Dynamic, kObsDim, Eigen::RowMajor>;

/// Tracking means over one held-command segment.
struct SegmentRecord {
  Command command;
  double mean_r0 = 0.0;
  double mean_r1 = 0.0;
  int steps = 0;
};

/// What an agent sees after reset or step.
struct Frame {
  ObsVec obs = ObsVec::Zero();
  History history;
  Privileged priv;
};

struct StepResult {
  /// After an auto-reset this is the first frame of the next episode.
  Frame frame;
  double reward = 0.0;
  rewards::RewardTerms terms{};
  bool done = false;
  Termination reason = Termination::kNone;
  /// Last frame of the finished episode when done.
  std::optional<Frame> terminal;
  std::optional<SegmentRecord> segment;
  double episode_return = 0.0;
  int episode_length = 0;
};

/// Physical snapshot, for evaluation and logging.
struct Snapshot {
  rider::RiderState rider;
  transporter::TransporterState platform;
  rider::FootContacts contacts{};
  Command command;
  ActVec action = ActVec::Zero();
  double time = 0.0;
};

class Env {
 public:
  Env(const EnvConfig& cfg, int index);

  const EnvConfig& config() const { return cfg_; }
  int index() const { return index_; }

  void set_command_source(CommandSource src) { source_ = std::move(src); }
  /// Fixes the current command until the next resample.
  void set_command(const Command& c);
  const Command& command() const { return cmd_; }

  Frame reset();
  /// Advances one control step. Finished episodes restart immediately unless
  /// auto_reset is false.
  StepResult step(const ActVec& action, bool auto_reset = true);

  Frame frame() const;
  Snapshot snapshot() const;
  ExtVec extract_extrinsic() const;
  const IntVec& intrinsic() const { return x_int_; }

  const rider::RiderParams& rider_params() const { return rp_; }
  const transporter::TransporterParams& platform_params() const { return tp_; }
  const rider::RiderState& rider_state() const { return rs_; }
  const transporter::TransporterState& platform_state() const { return ts_; }
  double h_des() const { return weights_.h_des; }
  const sim::Rng& rng() const { return rng_; }

  /// Overrides the physical state, e.g. to set up test scenarios. Clears the
  /// history and the control-rate finite differences.
  void set_state(const rider::RiderState& rs, const transporter::TransporterState& ts);

  /// Complete dynamic state as reals (parameters are rebuilt from the
  /// intrinsic vector), plus the random stream position.
  std::vector<double> save_state() const;
  void load_state(const std::vector<double>& state, std::uint64_t rng_counter);

  /// Offsets subtracted from raw observations before scaling (q0 on the
  /// joint slots, gravity on the accelerometer z).
  ObsVec obs_offset() const;
  static ObsVec obs_scale();

 private:
  void apply_intrinsic(const IntVec& x);
  ObsVec observe();
  Termination check_termination() const;
  rewards::RewardInputs reward_inputs(bool collision, bool terminated) const;
  void resample_command();
  void start_push();

  EnvConfig cfg_;
  int index_ = 0;
  sim::Rng rng_;
  CommandSource source_;

  rider::RiderParams rp_nominal_;
  transporter::TransporterParams tp_nominal_;
  transporter::SbGainUnit sb_unit_;
  rider::RiderParams rp_;
  transporter::TransporterParams tp_;
  rewards::RewardWeights weights_;
  IntVec x_int_ = IntVec::Zero();

  rider::RiderState rs_;
  transporter::TransporterState ts_;
  rider::FootContacts contacts_{};
  Command cmd_;
  ActVec action_ = ActVec::Zero();
  ActVec prev_action_ = ActVec::Zero();
  rider::JointVec prev_dq_ = rider::JointVec::Zero();
  rider::JointVec ddq_ = rider::JointVec::Zero();
  Vec3 prev_platform_vel_ = Vec3::Zero();
  Vec3 prev_platform_rate_ = Vec3::Zero();
  Vec3 platform_acc_ = Vec3::Zero();
  Vec3 platform_alpha_ = Vec3::Zero();
  ObsVec obs_ = ObsVec::Zero();
  History history_;

  int step_ = 0;
  int segment_steps_ = 0;
  double segment_r0_ = 0.0;
  double segment_r1_ = 0.0;
  double episode_return_ = 0.0;

  int push_left_ = 0;
  Vec3 push_body_ = Vec3::Zero();
  transporter::ExternalLoad push_deck_;
};

/// Independent environments stepped together. Results are ordered by env
/// index and identical for any thread count.
class VecEnv {
 public:
  VecEnv(const EnvConfig& cfg, int count, int threads = 1);
  ~VecEnv();
  VecEnv(const VecEnv&) = delete;
  VecEnv& operator=(const VecEnv&) = delete;

  int size() const { return static_cast<int>(envs_.size()); }
  Env& at(int i) { return *envs_[i]; }
  const Env& at(int i) const { return *envs_[i]; }
  void set_command_source(const CommandSource& src);

  std::vector<Frame> reset();
  /// One row of `actions` per env.
  std::vector<StepResult> step(const Eigen::MatrixXd& actions);

 private:
  std::vector<std::unique_ptr<Env>> envs_;
  int threads_ = 1;
};

}  // namespace atr::env
