#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <vector>

#include "atr/config/config.hpp"
#include "atr/curriculum/curriculum.hpp"
#include "atr/env/env.hpp"
#include "atr/learner/checkpoint.hpp"
#include "atr/learner/networks.hpp"
#include "atr/learner/ppo.hpp"

namespace atr::learner {

struct EpisodeRecord {
  int iteration = 0;
  int env = 0;
  double episode_return = 0.0;
  /// Return of the reward the optimizer saw, before scaling.
  double train_return = 0.0;
  int length = 0;
  env::Termination reason = env::Termination::kNone;
};

struct IterationStats {
  int iteration = 0;
  std::uint64_t env_steps = 0;
  int episodes = 0;
  double mean_return = 0.0;
  double mean_train_return = 0.0;
  double mean_length = 0.0;
  rewards::RewardTerms mean_terms{};
  UpdateMetrics update;
  double command_support = 0.0;
  std::uint64_t curriculum_k = 0;
  double wall_s = 0.0;
};

/// Per-step reward fed to the optimizer, before scaling.
double training_reward(const env::StepResult& r, bool positive);

/// Packs frames into batched policy inputs.
PolicyInputs pack(const std::vector<env::Frame>& frames);

/// Rollout collection, PPO with estimator training, curriculum updates,
/// logging and checkpoints.
class Trainer {
 public:
  explicit Trainer(const config::RunConfig& cfg);
  /// Restores every piece of training state, including the environments.
  static std::unique_ptr<Trainer> resume(const std::filesystem::path& checkpoint);

  /// Enables CSV logs and periodic checkpoints in `dir`. Existing logs are
  /// appended to.
  void set_output_dir(const std::filesystem::path& dir);

  IterationStats iterate();
  /// Iterates until the configured iteration count, checkpointing every
  /// `checkpoint_every` iterations and at the end.
  void run();

  void save(const std::filesystem::path& path);
  TensorFile to_tensors();

  int iteration() const { return iteration_; }
  const config::RunConfig& config() const { return cfg_; }
  PolicyBundle& bundle() { return *bundle_; }
  const curriculum::CommandGrid& grid() const { return grid_; }
  env::VecEnv& envs() { return *envs_; }
  const std::vector<EpisodeRecord>& episodes() const { return episodes_; }
  const sim::Rng& rng() const { return rng_; }
  const AdamState& adam() const { return adam_; }
  /// Per env, 1 if its current episode acts on the estimates.
  const std::vector<double>& on_estimates() const { return on_estimates_; }

  std::function<void(const IterationStats&)> on_iteration;

 private:
  void attach_command_source();
  double draw_on_estimates();
  void write_logs(const IterationStats& s, std::size_t first_new_episode);

  config::RunConfig cfg_;
  std::unique_ptr<PolicyBundle> bundle_;
  std::unique_ptr<env::VecEnv> envs_;
  curriculum::CommandGrid grid_;
  curriculum::UpdateRule rule_;
  std::vector<env::Frame> frames_;
  RolloutBuffer buffer_;
  AdamState adam_;
  sim::Rng rng_;
  int iteration_ = 0;
  std::uint64_t env_steps_ = 0;
  std::vector<EpisodeRecord> episodes_;
  std::vector<double> train_return_;
  // 1 where the current episode's actor acts on the estimates
  std::vector<double> on_estimates_;

  std::filesystem::path out_dir_;
  std::ofstream train_log_;
  std::ofstream episode_log_;
};

/// Config and policy restored from any checkpoint written by Trainer.
struct LoadedPolicy {
  config::RunConfig config;
  std::unique_ptr<PolicyBundle> bundle;
  curriculum::CommandGrid grid;
  int iteration = 0;
};
LoadedPolicy load_policy(const std::filesystem::path& checkpoint);

}  // namespace atr::learner
