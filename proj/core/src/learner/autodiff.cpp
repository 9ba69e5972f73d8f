#include "atr/learner/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace atr::learner {

Param::Param(std::string n, Mat init) : name(std::move(n)), value(std::move(init)) {
  grad = Mat::Zero(value.rows(), value.cols());
  m = Mat::Zero(value.rows(), value.cols());
  v = Mat::Zero(value.rows(), value.cols());
}

const Mat& Var::value() const { return tape_->node(id_).value; }
const Mat& Var::grad() const { return tape_->node(id_).grad; }

Var Tape::push(Mat value, bool requires_grad, std::function<void(Tape&, Node&)> back) {
  auto n = std::make_unique<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  if (requires_grad) n->back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Mat value) { return push(std::move(value), false, nullptr); }

Var Tape::param(Param& p) {
  Var v = push(p.value, true, nullptr);
  node(v.id()).param = &p;
  return v;
}

void Tape::accumulate(int id, const Mat& g) {
  Node& n = node(id);
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(const Var& root) {
  Node& r = node(root.id());
  if (r.value.size() != 1) throw std::invalid_argument("backward: root must be 1x1");
  if (!r.requires_grad) return;
  r.grad = Mat::Ones(1, 1);
  for (int i = root.id(); i >= 0; --i) {
    Node& n = node(i);
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.back) n.back(*this, n);
    if (n.param != nullptr) {
      if (n.param->grad.size() == 0) n.param->zero_grad();
      n.param->grad += n.grad;
    }
  }
}

namespace {

bool needs(const Var& a) { return a.tape()->node(a.id()).requires_grad; }
bool needs(const Var& a, const Var& b) { return needs(a) || needs(b); }

void check_same_tape(const Var& a, const Var& b) {
  if (a.tape() != b.tape()) throw std::invalid_argument("ops across different tapes");
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  check_same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

Var stop_gradient(const Var& a) { return a.tape()->constant(a.value()); }

Var matmul(const Var& a, const Var& b) {
  check_same_tape(a, b);
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  const int ia = a.id(), ib = b.id();
  return a.tape()->push(a.value() * b.value(), needs(a, b), [ia, ib](Tape& t, Tape::Node& n) {
    if (t.node(ia).requires_grad) t.accumulate(ia, n.grad * t.node(ib).value.transpose());
    if (t.node(ib).requires_grad) t.accumulate(ib, t.node(ia).value.transpose() * n.grad);
  });
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  const int ia = a.id(), ib = b.id();
  return a.tape()->push(a.value() + b.value(), needs(a, b), [ia, ib](Tape& t, Tape::Node& n) {
    t.accumulate(ia, n.grad);
    t.accumulate(ib, n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  const int ia = a.id(), ib = b.id();
  return a.tape()->push(a.value() - b.value(), needs(a, b), [ia, ib](Tape& t, Tape::Node& n) {
    t.accumulate(ia, n.grad);
    if (t.node(ib).requires_grad) t.accumulate(ib, -n.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  const int ia = a.id(), ib = b.id();
  return a.tape()->push(a.value().cwiseProduct(b.value()), needs(a, b),
                        [ia, ib](Tape& t, Tape::Node& n) {
                          if (t.node(ia).requires_grad)
                            t.accumulate(ia, n.grad.cwiseProduct(t.node(ib).value));
                          if (t.node(ib).requires_grad)
                            t.accumulate(ib, n.grad.cwiseProduct(t.node(ia).value));
                        });
}

Var scale(const Var& a, double s) {
  const int ia = a.id();
  return a.tape()->push(a.value() * s, needs(a),
                        [ia, s](Tape& t, Tape::Node& n) { t.accumulate(ia, n.grad * s); });
}

Var add_scalar(const Var& a, double s) {
  const int ia = a.id();
  return a.tape()->push(a.value().array() + s, needs(a),
                        [ia](Tape& t, Tape::Node& n) { t.accumulate(ia, n.grad); });
}

Var add_row(const Var& a, const Var& row) {
  check_same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols())
    throw std::invalid_argument("add_row: expected a 1 x n row");
  const int ia = a.id(), ir = row.id();
  Mat out = a.value();
  out.rowwise() += row.value().row(0);
  return a.tape()->push(std::move(out), needs(a, row), [ia, ir](Tape& t, Tape::Node& n) {
    t.accumulate(ia, n.grad);
    if (t.node(ir).requires_grad) t.accumulate(ir, n.grad.colwise().sum());
  });
}

Var elu(const Var& a) {
  const int ia = a.id();
  Mat out = a.value().unaryExpr([](double x) { return x > 0.0 ? x : std::expm1(x); });
  return a.tape()->push(std::move(out), needs(a), [ia](Tape& t, Tape::Node& n) {
    const Mat& x = t.node(ia).value;
    Mat d = x.unaryExpr([](double v) { return v > 0.0 ? 1.0 : std::exp(v); });
    t.accumulate(ia, n.grad.cwiseProduct(d));
  });
}

Var tanh(const Var& a) {
  const int ia = a.id();
  Mat out = a.value().array().tanh();
  return a.tape()->push(std::move(out), needs(a), [ia](Tape& t, Tape::Node& n) {
    Mat d = (1.0 - n.value.array().square()).matrix();
    t.accumulate(ia, n.grad.cwiseProduct(d));
  });
}

Var sigmoid(const Var& a) {
  const int ia = a.id();
  Mat out = a.value().unaryExpr([](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return a.tape()->push(std::move(out), needs(a), [ia](Tape& t, Tape::Node& n) {
    Mat d = (n.value.array() * (1.0 - n.value.array())).matrix();
    t.accumulate(ia, n.grad.cwiseProduct(d));
  });
}

Var exp(const Var& a) {
  const int ia = a.id();
  Mat out = a.value().array().exp();
  return a.tape()->push(std::move(out), needs(a), [ia](Tape& t, Tape::Node& n) {
    t.accumulate(ia, n.grad.cwiseProduct(n.value));
  });
}

Var square(const Var& a) {
  const int ia = a.id();
  return a.tape()->push(a.value().array().square(), needs(a), [ia](Tape& t, Tape::Node& n) {
    t.accumulate(ia, 2.0 * n.grad.cwiseProduct(t.node(ia).value));
  });
}

Var sum(const Var& a) {
  const int ia = a.id();
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  const Eigen::Index r = a.rows(), c = a.cols();
  return a.tape()->push(std::move(out), needs(a), [ia, r, c](Tape& t, Tape::Node& n) {
    t.accumulate(ia, Mat::Constant(r, c, n.grad(0, 0)));
  });
}

Var mean(const Var& a) {
  const double count = static_cast<double>(a.value().size());
  return scale(sum(a), count > 0 ? 1.0 / count : 0.0);
}

Var sum_cols(const Var& a) {
  const int ia = a.id();
  const Eigen::Index c = a.cols();
  Mat out = a.value().rowwise().sum();
  return a.tape()->push(std::move(out), needs(a), [ia, c](Tape& t, Tape::Node& n) {
    t.accumulate(ia, n.grad.replicate(1, c));
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Tape* tape = parts[0].tape();
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  bool rg = false;
  std::vector<int> ids;
  std::vector<Eigen::Index> widths;
  for (const Var& p : parts) {
    if (p.tape() != tape || p.rows() != rows)
      throw std::invalid_argument("concat_cols: row mismatch");
    cols += p.cols();
    rg = rg || needs(p);
    ids.push_back(p.id());
    widths.push_back(p.cols());
  }
  Mat out(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return tape->push(std::move(out), rg, [ids, widths](Tape& t, Tape::Node& n) {
    Eigen::Index off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.node(ids[k]).requires_grad) t.accumulate(ids[k], n.grad.middleCols(off, widths[k]));
      off += widths[k];
    }
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols())
    throw std::invalid_argument("slice_cols: out of range");
  const int ia = a.id();
  const Eigen::Index r = a.rows(), c = a.cols();
  return a.tape()->push(a.value().middleCols(start, count), needs(a),
                        [ia, r, c, start, count](Tape& t, Tape::Node& n) {
                          Mat g = Mat::Zero(r, c);
                          g.middleCols(start, count) = n.grad;
                          t.accumulate(ia, g);
                        });
}

Var linear(const Var& x, const Var& w, const Var& b) { return add_row(matmul(x, w), b); }

Eigen::VectorXd gaussian_log_prob(const Mat& mu, const Eigen::RowVectorXd& log_std,
                                  const Mat& actions) {
  const double k = 0.5 * std::log(2.0 * std::numbers::pi);
  Eigen::VectorXd out(mu.rows());
  for (Eigen::Index i = 0; i < mu.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < mu.cols(); ++j) {
      const double z = (actions(i, j) - mu(i, j)) * std::exp(-log_std(j));
      s += -0.5 * z * z - log_std(j) - k;
    }
    out(i) = s;
  }
  return out;
}

Var gaussian_log_prob(const Var& mu, const Var& log_std, const Mat& actions) {
  check_same_tape(mu, log_std);
  if (log_std.rows() != 1 || log_std.cols() != mu.cols() || actions.rows() != mu.rows() ||
      actions.cols() != mu.cols())
    throw std::invalid_argument("gaussian_log_prob: shape mismatch");
  const int im = mu.id(), is = log_std.id();
  Mat lp = gaussian_log_prob(mu.value(), log_std.value().row(0), actions);
  return mu.tape()->push(std::move(lp), needs(mu, log_std),
                         [im, is, actions](Tape& t, Tape::Node& n) {
                           const Mat& m = t.node(im).value;
                           const Eigen::RowVectorXd ls = t.node(is).value.row(0);
                           const Eigen::RowVectorXd inv_var = (-2.0 * ls.array()).exp();
                           Mat diff = actions - m;
                           if (t.node(im).requires_grad) {
                             Mat g = diff.array().rowwise() * inv_var.array();
                             g.array().colwise() *= n.grad.col(0).array();
                             t.accumulate(im, g);
                           }
                           if (t.node(is).requires_grad) {
                             Mat z2 = diff.array().square().rowwise() * inv_var.array();
                             Mat g = (z2.array() - 1.0).matrix();
                             g.array().colwise() *= n.grad.col(0).array();
                             t.accumulate(is, g.colwise().sum());
                           }
                         });
}

Var ppo_clip_loss(const Var& log_prob, const Mat& old_log_prob, const Mat& advantages,
                  double eps) {
  const Eigen::Index b = log_prob.rows();
  if (log_prob.cols() != 1 || old_log_prob.rows() != b || advantages.rows() != b)
    throw std::invalid_argument("ppo_clip_loss: shape mismatch");
  const int il = log_prob.id();
  Mat out(1, 1);
  Eigen::VectorXd dl(b);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const double r = std::exp(log_prob.value()(i, 0) - old_log_prob(i, 0));
    const double a = advantages(i, 0);
    const double unclipped = r * a;
    const double clipped = std::clamp(r, 1.0 - eps, 1.0 + eps) * a;
    if (unclipped <= clipped) {
      acc += unclipped;
      dl(i) = -r * a / static_cast<double>(b);
    } else {
      acc += clipped;
      dl(i) = 0.0;
    }
  }
  out(0, 0) = -acc / static_cast<double>(b);
  return log_prob.tape()->push(std::move(out), needs(log_prob),
                               [il, dl](Tape& t, Tape::Node& n) {
                                 t.accumulate(il, dl * n.grad(0, 0));
                               });
}

Var causal_conv(const Var& seq, const Var& w, const Var& b, int steps, int in, int kernel) {
  check_same_tape(seq, w);
  check_same_tape(seq, b);
  const Eigen::Index c = w.cols();
  if (seq.cols() != static_cast<Eigen::Index>(steps) * in || w.rows() != static_cast<Eigen::Index>(kernel) * in ||
      b.rows() != 1 || b.cols() != c)
    throw std::invalid_argument("causal_conv: shape mismatch");
  const Mat& x = seq.value();
  const Mat& wv = w.value();
  Mat out(x.rows(), steps * c);
  for (int t = 0; t < steps; ++t) {
    auto o = out.middleCols(t * c, c);
    o.rowwise() = b.value().row(0);
    for (int k = 0; k < kernel && k <= t; ++k)
      o.noalias() += x.middleCols((t - k) * in, in) * wv.middleRows(k * in, in);
  }
  const int is = seq.id(), iw = w.id(), ib = b.id();
  const bool need_x = needs(seq);
  return seq.tape()->push(
      std::move(out), need_x || needs(w, b),
      [is, iw, ib, steps, in, kernel, c, need_x](Tape& tp, Tape::Node& n) {
        const Mat& xv = tp.node(is).value;
        const Mat& wv = tp.node(iw).value;
        Mat gx = need_x ? Mat::Zero(xv.rows(), xv.cols()) : Mat();
        Mat gw = Mat::Zero(wv.rows(), wv.cols());
        Mat gb = Mat::Zero(1, c);
        for (int t = 0; t < steps; ++t) {
          const auto g = n.grad.middleCols(t * c, c);
          gb += g.colwise().sum();
          for (int k = 0; k < kernel && k <= t; ++k) {
            gw.middleRows(k * in, in).noalias() += xv.middleCols((t - k) * in, in).transpose() * g;
            if (need_x)
              gx.middleCols((t - k) * in, in).noalias() += g * wv.middleRows(k * in, in).transpose();
          }
        }
        if (need_x) tp.accumulate(is, gx);
        tp.accumulate(iw, gw);
        tp.accumulate(ib, gb);
      });
}

Var gru_cell(const Var& x, const Var& h, const Var& wx, const Var& uh, const Var& b) {
  check_same_tape(x, h);
  check_same_tape(x, wx);
  check_same_tape(x, uh);
  check_same_tape(x, b);
  const Eigen::Index g = h.cols();
  if (wx.rows() != x.cols() || wx.cols() != 3 * g || uh.rows() != g || uh.cols() != 3 * g ||
      b.rows() != 1 || b.cols() != 3 * g || h.rows() != x.rows())
    throw std::invalid_argument("gru_cell: shape mismatch");
  const Mat& hv = h.value();
  const Mat& u = uh.value();
  Mat a = x.value() * wx.value();
  a.rowwise() += b.value().row(0);
  a.leftCols(2 * g).noalias() += hv * u.leftCols(2 * g);
  const Mat z = (1.0 + (-a.leftCols(g).array()).exp()).inverse().matrix();
  const Mat r = (1.0 + (-a.middleCols(g, g).array()).exp()).inverse().matrix();
  const Mat rh = r.cwiseProduct(hv);
  const Mat nn = (a.rightCols(g) + rh * u.rightCols(g)).array().tanh().matrix();
  Mat out = nn + z.cwiseProduct(hv - nn);
  const int ix = x.id(), ih = h.id(), iwx = wx.id(), iuh = uh.id(), ibb = b.id();
  const bool req = needs(x, h) || needs(wx, uh) || needs(b);
  return x.tape()->push(
      std::move(out), req, [ix, ih, iwx, iuh, ibb, g, z, r, rh, nn](Tape& tp, Tape::Node& n) {
        const Mat& xv = tp.node(ix).value;
        const Mat& hv = tp.node(ih).value;
        const Mat& wxv = tp.node(iwx).value;
        const Mat& u = tp.node(iuh).value;
        const Mat& d = n.grad;
        Mat da(d.rows(), 3 * g);
        // candidate
        da.rightCols(g) = (d.array() * (1.0 - z.array()) * (1.0 - nn.array().square())).matrix();
        const Mat drh = da.rightCols(g) * u.rightCols(g).transpose();
        // update and reset gates
        da.leftCols(g) = (d.array() * (hv - nn).array() * z.array() * (1.0 - z.array())).matrix();
        da.middleCols(g, g) = (drh.array() * hv.array() * r.array() * (1.0 - r.array())).matrix();
        Mat dh = d.cwiseProduct(z) + drh.cwiseProduct(r);
        dh.noalias() += da.leftCols(2 * g) * u.leftCols(2 * g).transpose();
        Mat du(g, 3 * g);
        du.leftCols(2 * g).noalias() = hv.transpose() * da.leftCols(2 * g);
        du.rightCols(g).noalias() = rh.transpose() * da.rightCols(g);
        tp.accumulate(ix, da * wxv.transpose());
        tp.accumulate(ih, dh);
        tp.accumulate(iwx, xv.transpose() * da);
        tp.accumulate(iuh, du);
        tp.accumulate(ibb, da.colwise().sum());
      });
}

}  // namespace atr::learner
