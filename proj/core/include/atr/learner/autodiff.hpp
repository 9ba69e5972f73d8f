#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace atr::learner {

using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Trainable tensor with its gradient accumulator and Adam moments.
struct Param {
  std::string name;
  Mat value;
  Mat grad;
  Mat m;
  Mat v;

  Param() = default;
  Param(std::string n, Mat init);
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

class Tape;

/// Handle to a node on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* t, int id) : tape_(t), id_(id) {}
  const Mat& value() const;
  const Mat& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode recording of matrix operations. Rows are batch samples.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Mat value);
  Var param(Param& p);

  /// Seeds d(root)/d(root) = 1 for a 1x1 root and accumulates gradients into
  /// every reachable Param.
  void backward(const Var& root);

  std::size_t size() const { return nodes_.size(); }

  // internals used by the op implementations
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    Param* param = nullptr;
    std::function<void(Tape&, Node&)> back;
  };
  Node& node(int id) { return *nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return *nodes_[static_cast<std::size_t>(id)]; }
  Var push(Mat value, bool requires_grad, std::function<void(Tape&, Node&)> back);
  /// Adds g into the gradient of node `id` if it needs one.
  void accumulate(int id, const Mat& g);

 private:
  std::vector<std::unique_ptr<Node>> nodes_;
};

// Ops. Shapes follow Eigen; broadcast only where named.
Var stop_gradient(const Var& a);
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
/// a (B x n) + row (1 x n) broadcast over rows.
Var add_row(const Var& a, const Var& row);
Var elu(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var exp(const Var& a);
Var square(const Var& a);
/// Sum of all entries, 1 x 1.
Var sum(const Var& a);
Var mean(const Var& a);
/// Row sums, B x 1.
Var sum_cols(const Var& a);
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
/// x W + b.
Var linear(const Var& x, const Var& w, const Var& b);

/// Causal 1-D convolution over a window stored as B x (steps * in), oldest
/// step first. Output step t is sum_k x_{t-k} W_k + b with W_k the k-th block
/// of `in` rows of w ((kernel * in) x C) and x_{t-k} = 0 before the window.
/// Result is B x (steps * C).
Var causal_conv(const Var& seq, const Var& w, const Var& b, int steps, int in, int kernel);

/// Gated recurrent unit step with gates packed as [update, reset, candidate]:
/// wx is C x 3G, uh is G x 3G, b is 1 x 3G. The reset gate scales h before
/// the recurrent product of the candidate, n = tanh(x Wn + bn + (r * h) Un).
/// Returns n + z (h - n).
Var gru_cell(const Var& x, const Var& h, const Var& wx, const Var& uh, const Var& b);

/// Log-density of `actions` under N(mu, diag(exp(log_std))^2), B x 1.
/// log_std is 1 x n and shared across rows.
Var gaussian_log_prob(const Var& mu, const Var& log_std, const Mat& actions);
/// Clipped surrogate loss -mean(min(r A, clip(r, 1-eps, 1+eps) A)) with
/// r = exp(log_prob - old_log_prob). 1 x 1.
Var ppo_clip_loss(const Var& log_prob, const Mat& old_log_prob, const Mat& advantages,
                  double eps);

/// Closed-form log-density, for checks and rollouts.
Eigen::VectorXd gaussian_log_prob(const Mat& mu, const Eigen::RowVectorXd& log_std,
                                  const Mat& actions);

}  // namespace atr::learner
