#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "atr/curriculum/curriculum.hpp"
#include "atr/env/env.hpp"
#include "atr/learner/networks.hpp"

namespace atr::eval {

/// Action and estimates for one frame.
struct PolicyStep {
  env::ActVec action = env::ActVec::Zero();
  env::ExtVec ext_hat = env::ExtVec::Zero();
  Eigen::VectorXd z_hat;
  Eigen::VectorXd z;
};

class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::vector<PolicyStep> act(const std::vector<env::Frame>& frames) = 0;
};

/// Trained bundle. Deployment mode feeds estimates to the actor.
class BundleController : public Controller {
 public:
  explicit BundleController(const learner::PolicyBundle& b,
                            learner::Mode mode = learner::Mode::kDeployment)
      : bundle_(b), mode_(mode) {}
  std::vector<PolicyStep> act(const std::vector<env::Frame>& frames) override;

 private:
  const learner::PolicyBundle& bundle_;
  learner::Mode mode_;
};

/// Zero action; estimates all zero.
class ZeroController : public Controller {
 public:
  std::vector<PolicyStep> act(const std::vector<env::Frame>& frames) override;
};

/// Zero action; estimates equal to the ground truth.
class OracleController : public Controller {
 public:
  std::vector<PolicyStep> act(const std::vector<env::Frame>& frames) override;
};

struct EvalConfig {
  double hold_s = 10.0;
  double transient_s = 2.0;
  /// Evaluate every k-th cell along both axes.
  int subsample = 1;
  bool perturbations = false;
  env::DrMode dr = env::DrMode::kTest;
  /// Environments stepped together through one batched policy call.
  int batch = 64;
  int threads = 1;
  curriculum::GridBounds bounds;
};

/// Planar platform velocities over one held command.
struct Trace {
  std::vector<double> t;
  std::vector<double> v;
  std::vector<double> w;
  bool completed = false;
};

struct CellResult {
  double rms_v = 0.0;
  double rms_w = 0.0;
  bool completed = false;
  bool evaluated = false;
};

/// RMS tracking errors after the transient. A trace that ends before the
/// transient is scored over all of its samples; an empty one gives NaN.
CellResult score_trace(const Trace& tr, const env::Command& cmd, double transient_s);

struct HeatmapGrid {
  curriculum::GridBounds bounds;
  int nv = 0;
  int nw = 0;
  std::vector<CellResult> cells;  // index iv * nw + iw

  static HeatmapGrid empty(const curriculum::GridBounds& b);
  double cell_v(int iv) const { return -bounds.v_max + iv * bounds.resolution; }
  double cell_w(int iw) const { return -bounds.w_max + iw * bounds.resolution; }
  CellResult& at(int iv, int iw) { return cells[static_cast<std::size_t>(iv * nw + iw)]; }
  const CellResult& at(int iv, int iw) const {
    return cells[static_cast<std::size_t>(iv * nw + iw)];
  }
};

/// Environment settings used for every evaluation rollout.
env::EnvConfig eval_env_config(env::EnvConfig base, const EvalConfig& ec);

/// Runs each command in its own environment and returns the traces. Env
/// indices are taken from `ids`, so results do not depend on batching.
std::vector<Trace> run_commands(Controller& ctl, const env::EnvConfig& cfg,
                                const std::vector<env::Command>& cmds,
                                const std::vector<int>& ids, const EvalConfig& ec);

/// Fills the grid from `score`, called once per evaluated cell in index order.
HeatmapGrid assemble_grid(const EvalConfig& ec,
                          const std::function<CellResult(const env::Command&, int)>& score);

HeatmapGrid eval_grid(Controller& ctl, const env::EnvConfig& cfg, const EvalConfig& ec);

/// Header: c_v,c_w,rms_v,rms_w,completed,evaluated
void write_grid_csv(const HeatmapGrid& g, std::ostream& os);
HeatmapGrid read_grid_csv(std::istream& is, const curriculum::GridBounds& b = {});

/// Fraction of evaluated cells that completed with both errors under the
/// thresholds.
double command_area(const HeatmapGrid& g, double thresh_v = 1.0, double thresh_w = 0.3);

struct AreaPoint {
  double thresh_v = 0.0;
  double thresh_w = 0.0;
  double area = 0.0;
};
/// Area with both thresholds scaled by each factor.
std::vector<AreaPoint> area_curve(const HeatmapGrid& g, const std::vector<double>& scales,
                                  double thresh_v = 1.0, double thresh_w = 0.3);
/// Header: thresh_v,thresh_w,area
void write_area_csv(const std::vector<AreaPoint>& pts, std::ostream& os);

// -- cost of transport --------------------------------------------------------

struct PowerTrace {
  /// One row per sample, one column per joint.
  std::vector<std::vector<double>> tau;
  std::vector<std::vector<double>> dq;
  double avg_speed = 0.0;
};

struct CoTSample {
  int id = 0;
  double mean_power = 0.0;
  double mass = 0.0;
  double avg_speed = 0.0;
  double cot = 0.0;
};

inline constexpr double kGravity = 9.81;
inline constexpr double kMinCotSpeed = 0.1;

/// Mean over samples of the summed positive joint power, divided by
/// m g v_avg. Throws std::invalid_argument when v_avg <= 0.1 m/s.
CoTSample cot(const PowerTrace& tr, double mass, int id = 0);

// -- pure pursuit -------------------------------------------------------------

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

class PurePursuit {
 public:
  PurePursuit(std::vector<Vec2> path, double speed, double lookahead = 1.0,
              double goal_tolerance = 0.3);

  /// Command for a vehicle at `pos` facing `yaw`. Zero once the goal is
  /// reached.
  env::Command command(const Vec2& pos, double yaw);
  bool reached() const { return reached_; }
  /// Point steered at by the last command.
  const Vec2& target() const { return target_; }
  const std::vector<Vec2>& path() const { return path_; }

 private:
  Vec2 lookahead_point(const Vec2& pos);

  std::vector<Vec2> path_;
  double speed_;
  double lookahead_;
  double tol_;
  std::size_t progress_ = 0;
  bool reached_ = false;
  Vec2 target_;
};

/// c_w = 2 v sin(alpha) / L.
double pursuit_rate(double speed, double alpha, double lookahead);

/// Waypoint file: header "x,y", one waypoint per row.
std::vector<Vec2> read_path_csv(std::istream& is);

struct CotRun {
  CoTSample sample;
  bool reached = false;
  bool fell = false;
  double duration_s = 0.0;
  double distance = 0.0;
};

/// Drives the rider along `path` with pure pursuit on the platform pose and
/// measures CoT over the run. Stops at the goal, on termination, or after
/// `max_s`.
CotRun run_cot(Controller& ctl, const env::EnvConfig& cfg, const std::vector<Vec2>& path,
               double speed, const EvalConfig& ec, double lookahead = 1.0, double max_s = 60.0);

// -- manual command sequences --------------------------------------------------

struct CommandEntry {
  double start = 0.0;
  double v = 0.0;
  double w = 0.0;
};

struct CommandSequence {
  std::vector<CommandEntry> entries;
  /// Command active at time t (zero before the first entry).
  env::Command at(double t) const;
  /// Throws std::invalid_argument unless start times increase strictly from 0.
  void validate() const;
};

/// Header: t,c_v,c_w. One command change per row.
CommandSequence read_commands_csv(std::istream& is);

inline constexpr const char* kRolloutHeader = "t,c_v,c_ω,v_actual,ω_actual,v_est,ω_est";

struct RolloutRow {
  double t = 0.0;
  double c_v = 0.0;
  double c_w = 0.0;
  double v_actual = 0.0;
  double w_actual = 0.0;
  double v_est = 0.0;
  double w_est = 0.0;
};

/// Forward speed and yaw rate of the platform implied by an extrinsic vector.
std::pair<double, double> platform_rates(const env::ExtVec& x);

/// One row per control step until `duration_s` or termination. An empty
/// sequence produces no rows.
std::vector<RolloutRow> rollout(Controller& ctl, const env::EnvConfig& cfg,
                                const CommandSequence& seq, double duration_s,
                                const EvalConfig& ec);
void write_rollout_csv(const std::vector<RolloutRow>& rows, std::ostream& os);

// -- estimator accuracy ------------------------------------------------------

struct ErrorStat {
  std::string name;
  double mean = 0.0;
  double std = 0.0;
};

struct EstimatorReport {
  ErrorStat latent;                       // |z_hat - z|_2
  std::vector<ErrorStat> extrinsic;       // |x_hat_i - x_i| per component
  std::size_t samples = 0;

  const ErrorStat& component(const std::string& name) const;
};

/// Names of the extrinsic components in vector order.
const std::vector<std::string>& extrinsic_names();

EstimatorReport eval_estimators(Controller& ctl, const env::EnvConfig& cfg,
                                const std::vector<env::Command>& cmds, const EvalConfig& ec);
/// Rows "quantity,mean,std".
void write_estimator_csv(const EstimatorReport& r, std::ostream& os);
/// Aligned two-column text table, one quantity per row.
std::string format_estimator_table(const EstimatorReport& r);

/// Cells of the grid protocol (subsampled) as commands.
std::vector<env::Command> grid_commands(const EvalConfig& ec);
/// Commands on the resolution lattice inside |c_v| <= v, |c_w| <= w.
std::vector<env::Command> box_commands(double v, double w, double resolution = 0.1);

/// Splits a CSV line on commas.
std::vector<std::string> split_csv(const std::string& line);

}  // namespace atr::eval
