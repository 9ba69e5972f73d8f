#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "atr/eval/eval.hpp"

namespace atr::eval {

env::Command CommandSequence::at(double t) const {
  env::Command c;
  for (const auto& e : entries) {
    if (e.start > t + 1e-9) break;
    c = {e.v, e.w};
  }
  return c;
}

void CommandSequence::validate() const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i == 0 && entries[0].start != 0.0)
      throw std::invalid_argument("command sequence must start at t = 0");
    if (i > 0 && !(entries[i].start > entries[i - 1].start))
      throw std::invalid_argument("command sequence times must increase strictly");
  }
}

CommandSequence read_commands_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || split_csv(line) != std::vector<std::string>{"t", "c_v", "c_w"})
    throw std::invalid_argument("command csv: expected header 't,c_v,c_w'");
  CommandSequence seq;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != 3)
      throw std::invalid_argument("command csv line " + std::to_string(lineno) +
                                  ": expected t,c_v,c_w");
    seq.entries.push_back({std::stod(f[0]), std::stod(f[1]), std::stod(f[2])});
  }
  seq.validate();
  return seq;
}

std::pair<double, double> platform_rates(const env::ExtVec& x) {
  using namespace env::ext_index;
  const double th = x[kRelYaw];
  const double v = std::cos(th) * x[kPlatformVel] - std::sin(th) * x[kPlatformVel + 1];
  return {v, x[kPlatformRate + 2]};
}

std::vector<RolloutRow> rollout(Controller& ctl, const env::EnvConfig& cfg,
                                const CommandSequence& seq, double duration_s,
                                const EvalConfig& ec) {
  seq.validate();
  std::vector<RolloutRow> rows;
  if (seq.entries.empty()) return rows;
  EvalConfig run = ec;
  const double dt = cfg.dt_ctrl();
  run.hold_s = std::max(dt, std::ceil(duration_s / dt - 1e-9) * dt);
  const env::EnvConfig ecfg = eval_env_config(cfg, run);
  env::Env e(ecfg, 0);
  e.set_command_source([&seq](sim::Rng&) { return seq.at(0.0); });
  e.reset();
  const int steps = ecfg.episode_steps();
  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    const env::Command c = seq.at(t);
    e.set_command(c);
    const std::vector<PolicyStep> a = ctl.act({e.frame()});
    const env::StepResult r = e.step(a[0].action, false);
    const auto& ts = e.platform_state();
    const auto [v_est, w_est] = platform_rates(a[0].ext_hat);
    rows.push_back({t + dt, c.v, c.w, ts.forward_speed, ts.angular_velocity().z(), v_est, w_est});
    if (r.done) break;
  }
  return rows;
}

void write_rollout_csv(const std::vector<RolloutRow>& rows, std::ostream& os) {
  os << kRolloutHeader << '\n' << std::setprecision(8);
  for (const auto& r : rows) {
    os << r.t << ',' << r.c_v << ',' << r.c_w << ',' << r.v_actual << ',' << r.w_actual << ','
       << r.v_est << ',' << r.w_est << '\n';
  }
}

const std::vector<std::string>& extrinsic_names() {
  static const std::vector<std::string> names = {
      "contact_fl",     "contact_fr",     "contact_rl",     "contact_rr",
      "body_vel_x",     "body_vel_y",     "body_vel_z",     "platform_vel_x",
      "platform_vel_y", "platform_vel_z", "platform_rate_x", "platform_rate_y",
      "platform_rate_z", "rel_pos_x",     "rel_pos_y",      "rel_yaw"};
  return names;
}

const ErrorStat& EstimatorReport::component(const std::string& name) const {
  for (const auto& s : extrinsic)
    if (s.name == name) return s;
  throw std::out_of_range("no estimator component '" + name + "'");
}

namespace {

struct Moments {
  double sum = 0.0;
  double sq = 0.0;
  void add(double x) {
    sum += x;
    sq += x * x;
  }
  ErrorStat stat(const std::string& name, std::size_t n) const {
    if (n == 0) return {name, 0.0, 0.0};
    const double m = sum / static_cast<double>(n);
    return {name, m, std::sqrt(std::max(sq / static_cast<double>(n) - m * m, 0.0))};
  }
};

}  // namespace

EstimatorReport eval_estimators(Controller& ctl, const env::EnvConfig& cfg,
                                const std::vector<env::Command>& cmds, const EvalConfig& ec) {
  const env::EnvConfig ecfg = eval_env_config(cfg, ec);
  const int steps = ecfg.episode_steps();
  Moments latent;
  std::vector<Moments> ext(env::kExtDim);
  std::size_t n = 0;
  const std::size_t batch = static_cast<std::size_t>(std::max(1, ec.batch));
  for (std::size_t lo = 0; lo < cmds.size(); lo += batch) {
    const std::size_t hi = std::min(cmds.size(), lo + batch);
    std::vector<std::unique_ptr<env::Env>> envs;
    for (std::size_t i = lo; i < hi; ++i) {
      auto e = std::make_unique<env::Env>(ecfg, static_cast<int>(i));
      const env::Command c = cmds[i];
      e->set_command_source([c](sim::Rng&) { return c; });
      e->reset();
      e->set_command(c);
      envs.push_back(std::move(e));
    }
    std::vector<std::size_t> alive(envs.size());
    for (std::size_t i = 0; i < alive.size(); ++i) alive[i] = i;
    for (int k = 0; k < steps && !alive.empty(); ++k) {
      std::vector<env::Frame> frames;
      for (std::size_t a : alive) frames.push_back(envs[a]->frame());
      const std::vector<PolicyStep> act = ctl.act(frames);
      std::vector<std::size_t> next;
      for (std::size_t j = 0; j < alive.size(); ++j) {
        const PolicyStep& p = act[j];
        if (p.z.size() == p.z_hat.size()) latent.add((p.z_hat - p.z).norm());
        const env::ExtVec err = (p.ext_hat - frames[j].priv.x_ext).cwiseAbs();
        for (int c = 0; c < env::kExtDim; ++c) ext[static_cast<std::size_t>(c)].add(err[c]);
        ++n;
        const env::StepResult r = envs[alive[j]]->step(p.action, false);
        if (!r.done) next.push_back(alive[j]);
      }
      alive = std::move(next);
    }
  }
  EstimatorReport rep;
  rep.samples = n;
  rep.latent = latent.stat("latent_l2", n);
  for (int c = 0; c < env::kExtDim; ++c)
    rep.extrinsic.push_back(ext[static_cast<std::size_t>(c)].stat(extrinsic_names()[static_cast<std::size_t>(c)], n));
  return rep;
}

void write_estimator_csv(const EstimatorReport& r, std::ostream& os) {
  os << "quantity,mean,std\n" << std::setprecision(8);
  os << r.latent.name << ',' << r.latent.mean << ',' << r.latent.std << '\n';
  for (const auto& s : r.extrinsic) os << s.name << ',' << s.mean << ',' << s.std << '\n';
}

std::string format_estimator_table(const EstimatorReport& r) {
  std::ostringstream os;
  os << std::left << std::setw(18) << "quantity" << "error (mean +/- std)\n";
  auto line = [&](const ErrorStat& s) {
    os << std::left << std::setw(18) << s.name << std::fixed << std::setprecision(4) << s.mean
       << " +/- " << s.std << '\n';
  };
  line(r.latent);
  for (const auto& s : r.extrinsic) line(s);
  os << "samples: " << r.samples << '\n';
  return os.str();
}

}  // namespace atr::eval
