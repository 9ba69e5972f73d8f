#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "atr/eval/eval.hpp"
#include "atr/learner/trainer.hpp"

namespace atr::eval {

std::vector<PolicyStep> BundleController::act(const std::vector<env::Frame>& frames) {
  const learner::PolicyOutputs out =
      bundle_.evaluate(learner::pack(frames), mode_, false, true);
  std::vector<PolicyStep> steps(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    steps[i].action = out.mean.row(r).transpose();
    steps[i].ext_hat = out.ext_hat.row(r).transpose();
    steps[i].z_hat = out.z_hat.row(r).transpose();
    steps[i].z = out.z.row(r).transpose();
  }
  return steps;
}

std::vector<PolicyStep> ZeroController::act(const std::vector<env::Frame>& frames) {
  std::vector<PolicyStep> steps(frames.size());
  for (auto& s : steps) {
    s.z_hat = Eigen::VectorXd::Zero(learner::kLatentDim);
    s.z = Eigen::VectorXd::Zero(learner::kLatentDim);
  }
  return steps;
}

std::vector<PolicyStep> OracleController::act(const std::vector<env::Frame>& frames) {
  std::vector<PolicyStep> steps(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    steps[i].ext_hat = frames[i].priv.x_ext;
    steps[i].z = frames[i].priv.x_int;
    steps[i].z_hat = frames[i].priv.x_int;
  }
  return steps;
}

CellResult score_trace(const Trace& tr, const env::Command& cmd, double transient_s) {
  CellResult r;
  r.evaluated = true;
  r.completed = tr.completed;
  std::size_t first = 0;
  while (first < tr.t.size() && tr.t[first] <= transient_s + 1e-9) ++first;
  if (first == tr.t.size()) first = 0;
  const std::size_t n = tr.t.size() - first;
  if (n == 0) {
    r.rms_v = r.rms_w = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  double sv = 0.0, sw = 0.0;
  for (std::size_t i = first; i < tr.t.size(); ++i) {
    sv += (tr.v[i] - cmd.v) * (tr.v[i] - cmd.v);
    sw += (tr.w[i] - cmd.w) * (tr.w[i] - cmd.w);
  }
  r.rms_v = std::sqrt(sv / static_cast<double>(n));
  r.rms_w = std::sqrt(sw / static_cast<double>(n));
  return r;
}

HeatmapGrid HeatmapGrid::empty(const curriculum::GridBounds& b) {
  HeatmapGrid g;
  g.bounds = b;
  g.nv = static_cast<int>(std::lround(2.0 * b.v_max / b.resolution)) + 1;
  g.nw = static_cast<int>(std::lround(2.0 * b.w_max / b.resolution)) + 1;
  g.cells.assign(static_cast<std::size_t>(g.nv * g.nw), CellResult{});
  return g;
}

env::EnvConfig eval_env_config(env::EnvConfig base, const EvalConfig& ec) {
  base.dr = ec.dr;
  base.perturbations = ec.perturbations;
  base.episode_length_s = ec.hold_s;
  base.command_period_s = ec.hold_s;
  base.validate();
  return base;
}

namespace {

template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  const int workers = std::min(threads, n);
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += workers) fn(i);
    });
  }
}

std::unique_ptr<env::Env> make_env(const env::EnvConfig& cfg, int id, const env::Command& cmd) {
  auto e = std::make_unique<env::Env>(cfg, id);
  e->set_command_source([cmd](sim::Rng&) { return cmd; });
  e->reset();
  e->set_command(cmd);
  return e;
}

}  // namespace

std::vector<Trace> run_commands(Controller& ctl, const env::EnvConfig& cfg,
                                const std::vector<env::Command>& cmds,
                                const std::vector<int>& ids, const EvalConfig& ec) {
  if (cmds.size() != ids.size()) throw std::invalid_argument("run_commands: size mismatch");
  const env::EnvConfig ecfg = eval_env_config(cfg, ec);
  const int steps = ecfg.episode_steps();
  const double dt = ecfg.dt_ctrl();
  std::vector<Trace> traces(cmds.size());
  const std::size_t batch = static_cast<std::size_t>(std::max(1, ec.batch));

  for (std::size_t lo = 0; lo < cmds.size(); lo += batch) {
    const std::size_t hi = std::min(cmds.size(), lo + batch);
    std::vector<std::unique_ptr<env::Env>> envs;
    std::vector<std::size_t> alive;
    for (std::size_t i = lo; i < hi; ++i) {
      envs.push_back(make_env(ecfg, ids[i], cmds[i]));
      alive.push_back(i - lo);
    }
    for (int k = 0; k < steps && !alive.empty(); ++k) {
      std::vector<env::Frame> frames;
      frames.reserve(alive.size());
      for (std::size_t a : alive) frames.push_back(envs[a]->frame());
      const std::vector<PolicyStep> act = ctl.act(frames);
      std::vector<env::StepResult> res(alive.size());
      parallel_for(static_cast<int>(alive.size()), ec.threads, [&](int j) {
        res[static_cast<std::size_t>(j)] = envs[alive[static_cast<std::size_t>(j)]]->step(
            act[static_cast<std::size_t>(j)].action, false);
      });
      std::vector<std::size_t> next;
      for (std::size_t j = 0; j < alive.size(); ++j) {
        const std::size_t a = alive[j];
        Trace& tr = traces[lo + a];
        const auto& ts = envs[a]->platform_state();
        tr.t.push_back((k + 1) * dt);
        tr.v.push_back(ts.forward_speed);
        tr.w.push_back(ts.angular_velocity().z());
        if (res[j].done) {
          tr.completed = res[j].reason == env::Termination::kTimeout;
        } else {
          next.push_back(a);
        }
      }
      alive = std::move(next);
    }
  }
  return traces;
}

HeatmapGrid assemble_grid(const EvalConfig& ec,
                          const std::function<CellResult(const env::Command&, int)>& score) {
  HeatmapGrid g = HeatmapGrid::empty(ec.bounds);
  const int k = std::max(1, ec.subsample);
  for (int iv = 0; iv < g.nv; iv += k) {
    for (int iw = 0; iw < g.nw; iw += k) {
      CellResult r = score({g.cell_v(iv), g.cell_w(iw)}, iv * g.nw + iw);
      r.evaluated = true;
      g.at(iv, iw) = r;
    }
  }
  return g;
}

std::vector<env::Command> grid_commands(const EvalConfig& ec) {
  std::vector<env::Command> out;
  assemble_grid(ec, [&](const env::Command& c, int) {
    out.push_back(c);
    return CellResult{};
  });
  return out;
}

std::vector<env::Command> box_commands(double v, double w, double resolution) {
  std::vector<env::Command> out;
  const int nv = static_cast<int>(std::floor(v / resolution + 1e-9));
  const int nw = static_cast<int>(std::floor(w / resolution + 1e-9));
  for (int i = -nv; i <= nv; ++i)
    for (int j = -nw; j <= nw; ++j) out.push_back({i * resolution, j * resolution});
  return out;
}

HeatmapGrid eval_grid(Controller& ctl, const env::EnvConfig& cfg, const EvalConfig& ec) {
  std::vector<env::Command> cmds;
  std::vector<int> ids;
  assemble_grid(ec, [&](const env::Command& c, int id) {
    cmds.push_back(c);
    ids.push_back(id);
    return CellResult{};
  });
  const std::vector<Trace> traces = run_commands(ctl, cfg, cmds, ids, ec);
  std::size_t next = 0;
  return assemble_grid(ec, [&](const env::Command& c, int) {
    return score_trace(traces[next++], c, ec.transient_s);
  });
}

void write_grid_csv(const HeatmapGrid& g, std::ostream& os) {
  os << "c_v,c_w,rms_v,rms_w,completed,evaluated\n";
  os << std::setprecision(10);
  for (int iv = 0; iv < g.nv; ++iv) {
    for (int iw = 0; iw < g.nw; ++iw) {
      const CellResult& c = g.at(iv, iw);
      os << std::fixed << std::setprecision(1) << g.cell_v(iv) << ',' << g.cell_w(iw) << ','
         << std::defaultfloat << std::setprecision(10);
      if (c.evaluated) {
        os << c.rms_v << ',' << c.rms_w;
      } else {
        os << "nan,nan";
      }
      os << ',' << (c.completed ? 1 : 0) << ',' << (c.evaluated ? 1 : 0) << '\n';
    }
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

namespace {

double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

}  // namespace

HeatmapGrid read_grid_csv(std::istream& is, const curriculum::GridBounds& b) {
  std::string line;
  if (!std::getline(is, line) || split_csv(line) != split_csv("c_v,c_w,rms_v,rms_w,completed,evaluated"))
    throw std::invalid_argument(
        "grid csv: expected header 'c_v,c_w,rms_v,rms_w,completed,evaluated' (write it with "
        "'atr eval-grid')");
  HeatmapGrid g = HeatmapGrid::empty(b);
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != 6)
      throw std::invalid_argument("grid csv line " + std::to_string(lineno) + ": expected 6 fields");
    const int iv = static_cast<int>(std::lround((parse_double(f[0]) + b.v_max) / b.resolution));
    const int iw = static_cast<int>(std::lround((parse_double(f[1]) + b.w_max) / b.resolution));
    if (iv < 0 || iv >= g.nv || iw < 0 || iw >= g.nw)
      throw std::invalid_argument("grid csv line " + std::to_string(lineno) + ": command out of range");
    CellResult& c = g.at(iv, iw);
    c.rms_v = parse_double(f[2]);
    c.rms_w = parse_double(f[3]);
    c.completed = f[4] == "1";
    c.evaluated = f[5] == "1";
  }
  return g;
}

double command_area(const HeatmapGrid& g, double thresh_v, double thresh_w) {
  if (!(thresh_v > 0.0) || !(thresh_w > 0.0))
    throw std::invalid_argument("command_area: thresholds must be positive");
  std::size_t total = 0, ok = 0;
  for (const auto& c : g.cells) {
    if (!c.evaluated) continue;
    ++total;
    if (c.completed && c.rms_v < thresh_v && c.rms_w < thresh_w) ++ok;
  }
  return total == 0 ? 0.0 : static_cast<double>(ok) / static_cast<double>(total);
}

std::vector<AreaPoint> area_curve(const HeatmapGrid& g, const std::vector<double>& scales,
                                  double thresh_v, double thresh_w) {
  std::vector<AreaPoint> out;
  for (double s : scales) {
    out.push_back({s * thresh_v, s * thresh_w, command_area(g, s * thresh_v, s * thresh_w)});
  }
  return out;
}

void write_area_csv(const std::vector<AreaPoint>& pts, std::ostream& os) {
  os << "thresh_v,thresh_w,area\n" << std::setprecision(10);
  for (const auto& p : pts) os << p.thresh_v << ',' << p.thresh_w << ',' << p.area << '\n';
}

}  // namespace atr::eval
