#include "atr/curriculum/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace atr::curriculum {

CommandGrid::CommandGrid(const Bounds& b) : b_(b) {
  if (!(b.resolution > 0.0) || b.v_max < 0.0 || b.w_max < 0.0)
    throw std::invalid_argument("command grid: invalid bounds");
  nv_ = static_cast<int>(std::lround(2.0 * b.v_max / b.resolution)) + 1;
  nw_ = static_cast<int>(std::lround(2.0 * b.w_max / b.resolution)) + 1;
  w_.assign(static_cast<std::size_t>(nv_) * nw_, 0.0);
}

CommandGrid CommandGrid::init(double v_init, double w_init, const Bounds& b) {
  if (v_init < 0.0 || w_init < 0.0 || v_init > b.v_max || w_init > b.w_max)
    throw std::invalid_argument("command grid: initial box outside bounds");
  CommandGrid g(b);
  const double eps = 1e-9;
  for (int i = 0; i < g.nv_; ++i) {
    for (int j = 0; j < g.nw_; ++j) {
      if (std::abs(g.cell_v(i)) <= v_init + eps && std::abs(g.cell_w(j)) <= w_init + eps)
        g.set_weight(i, j, 1.0);
    }
  }
  return g;
}

int CommandGrid::index_v(double v) const {
  return std::clamp(static_cast<int>(std::lround((v + b_.v_max) / b_.resolution)), 0, nv_ - 1);
}

int CommandGrid::index_w(double w) const {
  return std::clamp(static_cast<int>(std::lround((w + b_.w_max) / b_.resolution)), 0, nw_ - 1);
}

double CommandGrid::total_weight() const {
  double s = 0.0;
  for (double x : w_) s += x;
  return s;
}

int CommandGrid::support_size() const {
  return static_cast<int>(std::count_if(w_.begin(), w_.end(), [](double x) { return x > 0.0; }));
}

env::Command CommandGrid::sample(sim::Rng& rng) const {
  const double total = total_weight();
  if (!(total > 0.0)) throw std::logic_error("command grid has no positive weight");
  const double u = rng.uniform() * total;
  double acc = 0.0;
  std::size_t pick = w_.size();
  for (std::size_t c = 0; c < w_.size(); ++c) {
    if (w_[c] <= 0.0) continue;
    acc += w_[c];
    pick = c;
    if (u < acc) break;
  }
  const int i = static_cast<int>(pick / nw_);
  const int j = static_cast<int>(pick % nw_);
  const double h = 0.5 * b_.resolution;
  env::Command c;
  c.v = std::clamp(cell_v(i) + rng.uniform(-h, h), -b_.v_max, b_.v_max);
  c.w = std::clamp(cell_w(j) + rng.uniform(-h, h), -b_.w_max, b_.w_max);
  return c;
}

bool CommandGrid::update(const env::SegmentRecord& rec, const UpdateRule& rule) {
  ++k_;
  if (rec.mean_r0 < rule.gamma_v || rec.mean_r1 < rule.gamma_w) return false;
  const int ci = index_v(rec.command.v);
  const int cj = index_w(rec.command.w);
  const int reach = static_cast<int>(std::lround(rule.reach / b_.resolution));
  for (int i = std::max(0, ci - reach); i <= std::min(nv_ - 1, ci + reach); ++i) {
    for (int j = std::max(0, cj - reach); j <= std::min(nw_ - 1, cj + reach); ++j) {
      set_weight(i, j, std::min(weight(i, j) + rule.delta, 1.0));
    }
  }
  return true;
}

UpdateRule rule_from_weights(double k0, double k1) {
  UpdateRule r;
  r.gamma_v = 0.8 * k0;
  r.gamma_w = 0.8 * k1;
  return r;
}

}  // namespace atr::curriculum
