#pragma once

#include <cstdint>
#include <vector>

#include "atr/env/env.hpp"
#include "atr/sim/rng.hpp"

namespace atr::curriculum {

struct GridBounds {
  double v_max = 15.0;
  double w_max = 2.0;
  double resolution = 0.1;
  bool operator==(const GridBounds&) const = default;
};

struct UpdateRule {
  double gamma_v = 6.4;
  double gamma_w = 6.4;
  double delta = 0.1;
  /// Neighborhood half-width in command units on each axis.
  double reach = 0.2;
};

/// Command space (c_v, c_w) discretized into cells centered on multiples of
/// the resolution. Weights are unnormalized sampling weights in [0, 1].
class CommandGrid {
 public:
  using Bounds = GridBounds;

  CommandGrid() : CommandGrid(Bounds{}) {}
  explicit CommandGrid(const Bounds& b);

  /// Weight 1 on |c_v| <= v_init and |c_w| <= w_init, 0 elsewhere.
  static CommandGrid init(double v_init = 0.5, double w_init = 0.3, const Bounds& b = {});

  int nv() const { return nv_; }
  int nw() const { return nw_; }
  const Bounds& bounds() const { return b_; }
  double cell_v(int i) const { return -b_.v_max + i * b_.resolution; }
  double cell_w(int j) const { return -b_.w_max + j * b_.resolution; }
  /// Nearest cell to a command, clamped to the grid.
  int index_v(double v) const;
  int index_w(double w) const;

  double weight(int i, int j) const { return w_[static_cast<std::size_t>(i) * nw_ + j]; }
  void set_weight(int i, int j, double x) { w_[static_cast<std::size_t>(i) * nw_ + j] = x; }
  const std::vector<double>& weights() const { return w_; }
  std::vector<double>& weights() { return w_; }
  double total_weight() const;
  int support_size() const;

  std::uint64_t episodes() const { return k_; }
  void set_episodes(std::uint64_t k) { k_ = k; }

  /// Draws a cell with probability proportional to its weight, then jitters
  /// uniformly within the cell.
  env::Command sample(sim::Rng& rng) const;

  /// Expands the neighborhood of the record's cell when both tracking means
  /// clear their thresholds. The episode counter advances on every call.
  /// Returns whether weights were touched.
  bool update(const env::SegmentRecord& rec, const UpdateRule& rule);
  bool update(const env::SegmentRecord& rec) { return update(rec, UpdateRule{}); }

  friend bool operator==(const CommandGrid&, const CommandGrid&) = default;

 private:
  Bounds b_;
  int nv_ = 0;
  int nw_ = 0;
  std::vector<double> w_;
  std::uint64_t k_ = 0;
};

/// Thresholds as 80% of the tracking-term maxima.
UpdateRule rule_from_weights(double k0, double k1);

}  // namespace atr::curriculum
