#include <algorithm>
#include <cmath>
#include <istream>
#include <stdexcept>
#include <string>

#include "atr/eval/eval.hpp"
#include "atr/sim/math.hpp"

namespace atr::eval {

CoTSample cot(const PowerTrace& tr, double mass, int id) {
  if (!(tr.avg_speed > kMinCotSpeed))
    throw std::invalid_argument("cot: average speed must exceed 0.1 m/s");
  if (!(mass > 0.0)) throw std::invalid_argument("cot: mass must be positive");
  if (tr.tau.size() != tr.dq.size()) throw std::invalid_argument("cot: torque/rate length mismatch");
  double sum = 0.0;
  for (std::size_t t = 0; t < tr.tau.size(); ++t) {
    if (tr.tau[t].size() != tr.dq[t].size())
      throw std::invalid_argument("cot: joint count mismatch");
    for (std::size_t j = 0; j < tr.tau[t].size(); ++j) sum += std::max(tr.tau[t][j] * tr.dq[t][j], 0.0);
  }
  CoTSample s;
  s.id = id;
  s.mean_power = tr.tau.empty() ? 0.0 : sum / static_cast<double>(tr.tau.size());
  s.mass = mass;
  s.avg_speed = tr.avg_speed;
  s.cot = s.mean_power / (mass * kGravity * tr.avg_speed);
  return s;
}

double pursuit_rate(double speed, double alpha, double lookahead) {
  return 2.0 * speed * std::sin(alpha) / lookahead;
}

PurePursuit::PurePursuit(std::vector<Vec2> path, double speed, double lookahead,
                         double goal_tolerance)
    : path_(std::move(path)), speed_(speed), lookahead_(lookahead), tol_(goal_tolerance) {
  if (path_.size() < 2) throw std::invalid_argument("pure pursuit: need at least 2 waypoints");
  if (!(lookahead_ > 0.0)) throw std::invalid_argument("pure pursuit: lookahead must be positive");
  target_ = path_.front();
}

namespace {

double dist(const Vec2& a, const Vec2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

Vec2 PurePursuit::lookahead_point(const Vec2& pos) {
  const Vec2& goal = path_.back();
  if (dist(pos, goal) <= lookahead_) return goal;
  // advance progress to the segment nearest the vehicle, never backwards
  double best = 1e300;
  std::size_t best_seg = progress_;
  Vec2 nearest = path_[progress_];
  for (std::size_t i = progress_; i + 1 < path_.size(); ++i) {
    const Vec2& a = path_[i];
    const Vec2& b = path_[i + 1];
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double u = len2 > 0.0 ? ((pos.x - a.x) * dx + (pos.y - a.y) * dy) / len2 : 0.0;
    u = std::clamp(u, 0.0, 1.0);
    const Vec2 p{a.x + u * dx, a.y + u * dy};
    const double d = dist(pos, p);
    if (d < best) {
      best = d;
      best_seg = i;
      nearest = p;
    }
  }
  progress_ = best_seg;
  // farthest intersection of the lookahead circle with the remaining path
  for (std::size_t i = path_.size() - 1; i-- > progress_;) {
    const Vec2& a = path_[i];
    const Vec2& b = path_[i + 1];
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double fx = a.x - pos.x, fy = a.y - pos.y;
    const double qa = dx * dx + dy * dy;
    if (qa == 0.0) continue;
    const double qb = 2.0 * (fx * dx + fy * dy);
    const double qc = fx * fx + fy * fy - lookahead_ * lookahead_;
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc < 0.0) continue;
    const double u = (-qb + std::sqrt(disc)) / (2.0 * qa);
    if (u >= 0.0 && u <= 1.0) return {a.x + u * dx, a.y + u * dy};
  }
  return nearest;
}

env::Command PurePursuit::command(const Vec2& pos, double yaw) {
  if (reached_ || dist(pos, path_.back()) <= tol_) {
    reached_ = true;
    return {};
  }
  target_ = lookahead_point(pos);
  const double alpha = sim::wrap_angle(std::atan2(target_.y - pos.y, target_.x - pos.x) - yaw);
  return {speed_, pursuit_rate(speed_, alpha, lookahead_)};
}

std::vector<Vec2> read_path_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || split_csv(line) != std::vector<std::string>{"x", "y"})
    throw std::invalid_argument("path csv: expected header 'x,y'");
  std::vector<Vec2> out;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != 2)
      throw std::invalid_argument("path csv line " + std::to_string(lineno) + ": expected x,y");
    out.push_back({std::stod(f[0]), std::stod(f[1])});
  }
  return out;
}

CotRun run_cot(Controller& ctl, const env::EnvConfig& cfg, const std::vector<Vec2>& path,
               double speed, const EvalConfig& ec, double lookahead, double max_s) {
  EvalConfig run = ec;
  run.hold_s = max_s;
  const env::EnvConfig ecfg = eval_env_config(cfg, run);
  PurePursuit pp(path, speed, lookahead);
  env::Env e(ecfg, 0);
  e.set_command_source([](sim::Rng&) { return env::Command{}; });
  e.reset();

  // follow the path relative to where the platform starts
  const auto& ts0 = e.platform_state();
  const Vec2 origin{ts0.position.x(), ts0.position.y()};
  const double yaw0 = ts0.orientation.yaw;
  const double c0 = std::cos(yaw0), s0 = std::sin(yaw0);
  auto local = [&](const sim::Vec3& p) {
    const double dx = p.x() - origin.x, dy = p.y() - origin.y;
    return Vec2{c0 * dx + s0 * dy, -s0 * dx + c0 * dy};
  };

  PowerTrace tr;
  CotRun out;
  double travelled = 0.0;
  Vec2 prev = local(ts0.position);
  const int steps = ecfg.episode_steps();
  int k = 0;
  for (; k < steps; ++k) {
    const auto& ts = e.platform_state();
    const Vec2 pos = local(ts.position);
    const env::Command c = pp.command(pos, sim::wrap_angle(ts.orientation.yaw - yaw0));
    if (pp.reached()) break;
    e.set_command(c);
    const std::vector<PolicyStep> a = ctl.act({e.frame()});
    const env::StepResult r = e.step(a[0].action, false);
    const auto& rs = e.rider_state();
    tr.tau.emplace_back(rs.tau.data(), rs.tau.data() + rs.tau.size());
    tr.dq.emplace_back(rs.dq.data(), rs.dq.data() + rs.dq.size());
    const Vec2 now = local(e.platform_state().position);
    travelled += dist(prev, now);
    prev = now;
    if (r.done && r.reason != env::Termination::kTimeout) {
      out.fell = true;
      ++k;
      break;
    }
  }
  out.reached = pp.reached();
  out.duration_s = k * ecfg.dt_ctrl();
  out.distance = travelled;
  tr.avg_speed = out.duration_s > 0.0 ? travelled / out.duration_s : 0.0;
  out.sample = cot(tr, e.rider_params().total_mass());
  return out;
}

}  // namespace atr::eval
