#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "atr/config/config.hpp"
#include "atr/eval/eval.hpp"
#include "atr/eval/plot.hpp"
#include "atr/learner/trainer.hpp"

namespace fs = std::filesystem;
using namespace atr;

namespace {

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw std::runtime_error("cannot open " + p.string());
  return is;
}

struct EvalOptions {
  eval::EvalConfig ec;
  std::optional<std::uint64_t> seed;
  std::string dr = "test";
};

void add_eval_options(CLI::App* app, EvalOptions& o) {
  app->add_option("--hold", o.ec.hold_s, "Seconds each command is held")->capture_default_str();
  app->add_option("--transient", o.ec.transient_s, "Seconds excluded from the RMS")
      ->capture_default_str();
  app->add_option("--seed", o.seed, "Environment seed (default: the checkpoint's)");
  app->add_option("--dr", o.dr, "Domain randomization: train, test or off")->capture_default_str();
  app->add_flag("--pushes", o.ec.perturbations, "Enable random pushes");
  app->add_option("--batch", o.ec.batch, "Environments per policy batch")->capture_default_str();
  app->add_option("--threads", o.ec.threads, "Worker threads")->capture_default_str();
}

env::EnvConfig eval_env(const learner::LoadedPolicy& p, EvalOptions& o) {
  env::EnvConfig cfg = p.config.env;
  if (o.seed) cfg.seed = *o.seed;
  o.ec.dr = env::dr_mode_from_string(o.dr);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quadruped-on-transporter training and evaluation"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Train a policy");
  fs::path train_config, train_out, train_resume;
  std::optional<std::uint64_t> train_seed;
  std::optional<int> train_iters, train_threads;
  train->add_option("--config", train_config, "YAML run configuration");
  train->add_option("--out", train_out, "Output directory")->required();
  train->add_option("--seed", train_seed, "Seed (overrides env.seed)");
  train->add_option("--iterations", train_iters, "Iterations (overrides ppo.iterations)");
  train->add_option("--threads", train_threads, "Env worker threads (overrides env.threads)");
  train->add_option("--resume", train_resume, "Continue from a checkpoint");

  // eval-grid
  auto* grid = app.add_subcommand("eval-grid", "Tracking-error heatmap over the command grid");
  fs::path grid_ckpt, grid_out = "eval_grid.csv", grid_area_out;
  double thresh_v = 1.0, thresh_w = 0.3;
  EvalOptions grid_opt;
  grid->add_option("--ckpt", grid_ckpt, "Checkpoint")->required();
  grid->add_option("--subsample", grid_opt.ec.subsample, "Evaluate every k-th cell")
      ->capture_default_str();
  grid->add_option("--out", grid_out, "Grid CSV")->capture_default_str();
  grid->add_option("--area-out", grid_area_out, "Area-versus-threshold CSV");
  grid->add_option("--thresh-v", thresh_v, "Forward error threshold (m/s)")->capture_default_str();
  grid->add_option("--thresh-w", thresh_w, "Yaw-rate error threshold (rad/s)")
      ->capture_default_str();
  add_eval_options(grid, grid_opt);

  // eval-estimators
  auto* est = app.add_subcommand("eval-estimators", "Estimator accuracy table");
  fs::path est_ckpt, est_out;
  EvalOptions est_opt;
  est_opt.ec.subsample = 10;
  std::vector<double> est_box;
  est->add_option("--ckpt", est_ckpt, "Checkpoint")->required();
  est->add_option("--subsample", est_opt.ec.subsample, "Evaluate every k-th grid cell")
      ->capture_default_str();
  est->add_option("--box", est_box, "Use commands |c_v| <= V, |c_w| <= W instead of the grid")
      ->expected(2);
  est->add_option("--out", est_out, "CSV of mean and std per quantity");
  add_eval_options(est, est_opt);

  // rollout
  auto* roll = app.add_subcommand("rollout", "Run a manual command sequence");
  fs::path roll_ckpt, roll_cmds, roll_out = "rollout.csv";
  std::optional<double> roll_duration;
  EvalOptions roll_opt;
  roll->add_option("--ckpt", roll_ckpt, "Checkpoint")->required();
  roll->add_option("--commands", roll_cmds, "CSV with header t,c_v,c_w")->required();
  roll->add_option("--duration", roll_duration, "Seconds (default: last change + 5)");
  roll->add_option("--out", roll_out, "Output CSV")->capture_default_str();
  add_eval_options(roll, roll_opt);

  // cot
  auto* cot = app.add_subcommand("cot", "Cost of transport along a waypoint path");
  fs::path cot_ckpt, cot_path;
  double cot_speed = 0.5, cot_lookahead = 1.0, cot_max = 60.0;
  EvalOptions cot_opt;
  cot->add_option("--ckpt", cot_ckpt, "Checkpoint")->required();
  cot->add_option("--path", cot_path, "Waypoint CSV with header x,y")->required();
  cot->add_option("--speed", cot_speed, "Cruise speed (m/s)")->required();
  cot->add_option("--lookahead", cot_lookahead, "Pure-pursuit lookahead (m)")->capture_default_str();
  cot->add_option("--max-time", cot_max, "Time limit (s)")->capture_default_str();
  add_eval_options(cot, cot_opt);

  // plot
  auto* plot = app.add_subcommand("plot", "Render a CSV written by this tool");
  fs::path plot_in, plot_out;
  std::string plot_kind, plot_metric = "v";
  eval::HeatmapStyle style;
  plot->add_option("--in", plot_in, "Input CSV")->required();
  plot->add_option("--kind", plot_kind, "heatmap, series or area")
      ->required()
      ->check(CLI::IsMember({"heatmap", "series", "area"}));
  plot->add_option("--out", plot_out, "Output image (.ppm for heatmaps, .svg otherwise)")
      ->required();
  plot->add_option("--metric", plot_metric, "Heatmap error: v or w")
      ->check(CLI::IsMember({"v", "w"}))
      ->capture_default_str();
  plot->add_option("--cap", style.cap, "Error mapped to the lightest gray")->capture_default_str();
  plot->add_option("--block", style.block, "Pixels per cell edge")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      std::unique_ptr<learner::Trainer> t;
      if (!train_resume.empty()) {
        t = learner::Trainer::resume(train_resume);
      } else {
        config::RunConfig cfg = train_config.empty() ? config::RunConfig{} : config::load(train_config);
        if (train_seed) cfg.env.seed = *train_seed;
        if (train_iters) cfg.train.iterations = *train_iters;
        if (train_threads) cfg.train.threads = *train_threads;
        cfg.validate();
        t = std::make_unique<learner::Trainer>(cfg);
      }
      t->set_output_dir(train_out);
      {
        auto os = open_out(train_out / "config.yaml");
        os << config::to_yaml(t->config());
      }
      t->on_iteration = [](const learner::IterationStats& s) {
        std::printf("iter %5d  steps %9llu  episodes %3d  return %9.2f  length %6.1f  "
                    "support %.4f  %.2fs\n",
                    s.iteration, static_cast<unsigned long long>(s.env_steps), s.episodes,
                    s.mean_return, s.mean_length, s.command_support, s.wall_s);
        std::fflush(stdout);
      };
      t->run();
      std::printf("wrote %s\n", (train_out / "latest.bin").string().c_str());
      return 0;
    }

    if (*grid) {
      const auto p = learner::load_policy(grid_ckpt);
      const env::EnvConfig cfg = eval_env(p, grid_opt);
      eval::BundleController ctl(*p.bundle);
      const eval::HeatmapGrid g = eval::eval_grid(ctl, cfg, grid_opt.ec);
      {
        auto os = open_out(grid_out);
        eval::write_grid_csv(g, os);
      }
      std::vector<double> scales;
      for (int i = 1; i <= 30; ++i) scales.push_back(0.1 * i);
      const auto curve = eval::area_curve(g, scales, thresh_v, thresh_w);
      if (!grid_area_out.empty()) {
        auto os = open_out(grid_area_out);
        eval::write_area_csv(curve, os);
      }
      std::printf("command area (%.3g m/s, %.3g rad/s): %.4f\n", thresh_v, thresh_w,
                  eval::command_area(g, thresh_v, thresh_w));
      std::printf("wrote %s\n", grid_out.string().c_str());
      return 0;
    }

    if (*est) {
      const auto p = learner::load_policy(est_ckpt);
      const env::EnvConfig cfg = eval_env(p, est_opt);
      eval::BundleController ctl(*p.bundle);
      const auto cmds = est_box.size() == 2 ? eval::box_commands(est_box[0], est_box[1])
                                            : eval::grid_commands(est_opt.ec);
      const auto rep = eval::eval_estimators(ctl, cfg, cmds, est_opt.ec);
      std::cout << eval::format_estimator_table(rep);
      if (!est_out.empty()) {
        auto os = open_out(est_out);
        eval::write_estimator_csv(rep, os);
      }
      return 0;
    }

    if (*roll) {
      const auto p = learner::load_policy(roll_ckpt);
      const env::EnvConfig cfg = eval_env(p, roll_opt);
      auto is = open_in(roll_cmds);
      const eval::CommandSequence seq = eval::read_commands_csv(is);
      const double duration =
          roll_duration ? *roll_duration : (seq.entries.empty() ? 0.0 : seq.entries.back().start + 5.0);
      eval::BundleController ctl(*p.bundle);
      const auto rows = eval::rollout(ctl, cfg, seq, duration, roll_opt.ec);
      auto os = open_out(roll_out);
      eval::write_rollout_csv(rows, os);
      std::printf("wrote %zu rows to %s\n", rows.size(), roll_out.string().c_str());
      return 0;
    }

    if (*cot) {
      const auto p = learner::load_policy(cot_ckpt);
      const env::EnvConfig cfg = eval_env(p, cot_opt);
      auto is = open_in(cot_path);
      const auto path = eval::read_path_csv(is);
      eval::BundleController ctl(*p.bundle);
      const auto run = eval::run_cot(ctl, cfg, path, cot_speed, cot_opt.ec, cot_lookahead, cot_max);
      std::printf("trajectory,mean_power_w,mass_kg,avg_speed_mps,cot,reached,fell,duration_s\n");
      std::printf("%d,%.6g,%.6g,%.6g,%.6g,%d,%d,%.3f\n", run.sample.id, run.sample.mean_power,
                  run.sample.mass, run.sample.avg_speed, run.sample.cot, run.reached ? 1 : 0,
                  run.fell ? 1 : 0, run.duration_s);
      return 0;
    }

    if (*plot) {
      style.metric = plot_metric == "w" ? eval::HeatmapMetric::kYaw : eval::HeatmapMetric::kForward;
      eval::plot_file(plot_in, eval::plot_kind_from_string(plot_kind), plot_out, style);
      std::printf("wrote %s\n", plot_out.string().c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "atr: %s\n", e.what());
    return 1;
  }
  return 0;
}
