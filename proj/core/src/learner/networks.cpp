#include "atr/learner/networks.hpp"

#include <cmath>
#include <stdexcept>

namespace atr::learner {

namespace {

Var use(Tape& t, Param& p, bool train) { return train ? t.param(p) : t.constant(p.value); }

Mat random_weight(int in, int out, sim::Rng& rng, double gain) {
  Mat w(in, out);
  const double s = gain / std::sqrt(static_cast<double>(in));
  for (int i = 0; i < in; ++i)
    for (int j = 0; j < out; ++j) w(i, j) = s * rng.normal();
  quantize(w);
  return w;
}

void append(std::vector<Param*>& dst, const std::vector<Param*>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

}  // namespace

void quantize(Mat& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
}

void quantize(Param& p) {
  quantize(p.value);
  quantize(p.m);
  quantize(p.v);
}

std::vector<int> NetConfig::policy_hidden() const {
  if (profile == "full") return {512, 256, 128};
  return {128, 64, 32};
}

std::vector<int> NetConfig::encoder_hidden() const {
  if (profile == "full") return {128, 64};
  return {32, 16};
}

int NetConfig::conv_channels() const { return profile == "full" ? 32 : 8; }
int NetConfig::gru_hidden() const { return profile == "full" ? 64 : 16; }
int NetConfig::estimator_dense() const { return profile == "full" ? 128 : 32; }

void NetConfig::validate() const {
  if (profile != "full" && profile != "small")
    throw std::invalid_argument("net profile must be 'full' or 'small'");
  if (temporal != "cnn_gru" && temporal != "flat")
    throw std::invalid_argument("temporal encoder must be 'cnn_gru' or 'flat'");
  if (history < 1) throw std::invalid_argument("history must be at least 1");
  if (!(init_std > 0.0)) throw std::invalid_argument("initial action std must be positive");
}

Mlp::Mlp(const std::string& name, int in, const std::vector<int>& hidden, int out, sim::Rng& rng,
         double out_gain)
    : in_(in), out_(out) {
  int prev = in;
  for (std::size_t l = 0; l <= hidden.size(); ++l) {
    const bool last = l == hidden.size();
    const int width = last ? out : hidden[l];
    w_.emplace_back(name + "/w" + std::to_string(l),
                    random_weight(prev, width, rng, last ? out_gain : 1.0));
    b_.emplace_back(name + "/b" + std::to_string(l), Mat::Zero(1, width));
    prev = width;
  }
}

Var Mlp::forward(Tape& tape, const Var& x, bool train) const {
  if (x.cols() != in_) throw std::invalid_argument("Mlp: input width mismatch");
  Var h = x;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    h = linear(h, use(tape, w_[l], train), use(tape, b_[l], train));
    if (l + 1 < w_.size()) h = elu(h);
  }
  return h;
}

std::vector<Param*> Mlp::params() {
  std::vector<Param*> out;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    out.push_back(&w_[l]);
    out.push_back(&b_[l]);
  }
  return out;
}

TemporalEncoder::TemporalEncoder(const std::string& name, const NetConfig& cfg, int in_dim,
                                 int out_dim, sim::Rng& rng)
    : kind_(cfg.temporal), steps_(cfg.history), in_(in_dim) {
  if (kind_ == "flat") {
    flat_ = Mlp(name + "/flat", steps_ * in_, {cfg.estimator_dense()}, out_dim, rng);
    return;
  }
  const int c = cfg.conv_channels();
  const int g = cfg.gru_hidden();
  conv_w_ = Param(name + "/conv_w", random_weight(kernel_ * in_, c, rng, 1.0));
  conv_b_ = Param(name + "/conv_b", Mat::Zero(1, c));
  Mat wx(c, 3 * g), uh(g, 3 * g);
  for (int k = 0; k < 3; ++k) {
    wx.middleCols(k * g, g) = random_weight(c, g, rng, 1.0);
    uh.middleCols(k * g, g) = random_weight(g, g, rng, 1.0);
  }
  gru_wx_ = Param(name + "/gru_wx", wx);
  gru_uh_ = Param(name + "/gru_uh", uh);
  gru_b_ = Param(name + "/gru_b", Mat::Zero(1, 3 * g));
  head_ = Mlp(name + "/head", g, {cfg.estimator_dense()}, out_dim, rng);
}

Var TemporalEncoder::recur(Tape& tape, const Var& seq, bool train,
                           std::vector<Var>* states) const {
  if (seq.cols() != steps_ * in_) throw std::invalid_argument("TemporalEncoder: window mismatch");
  const Var wx = use(tape, gru_wx_, train), uh = use(tape, gru_uh_, train);
  const Var gb = use(tape, gru_b_, train);
  const int c = static_cast<int>(conv_w_.value.cols());
  const Var conv = elu(causal_conv(seq, use(tape, conv_w_, train), use(tape, conv_b_, train),
                                   steps_, in_, kernel_));
  Var h = tape.constant(Mat::Zero(seq.rows(), gru_uh_.value.rows()));
  for (int t = 0; t < steps_; ++t) {
    h = gru_cell(slice_cols(conv, t * c, c), h, wx, uh, gb);
    if (states != nullptr) states->push_back(h);
  }
  return h;
}

std::vector<Var> TemporalEncoder::forward_all(Tape& tape, const Var& seq, bool train) const {
  if (kind_ != "cnn_gru") throw std::logic_error("forward_all needs the recurrent encoder");
  std::vector<Var> states;
  recur(tape, seq, train, &states);
  for (auto& s : states) s = head_.forward(tape, s, train);
  return states;
}

Var TemporalEncoder::forward(Tape& tape, const Var& seq, bool train) const {
  if (kind_ == "flat") return flat_.forward(tape, seq, train);
  return head_.forward(tape, recur(tape, seq, train, nullptr), train);
}

std::vector<Param*> TemporalEncoder::params() {
  if (kind_ == "flat") return flat_.params();
  std::vector<Param*> out = {&conv_w_, &conv_b_, &gru_wx_, &gru_uh_, &gru_b_};
  append(out, head_.params());
  return out;
}

Normalizer Normalizer::make(const env::ObsVec& obs_offset) {
  Normalizer n;
  n.obs_offset = obs_offset;
  n.obs_scale = env::Env::obs_scale();
  const env::DrRanges r = env::DrRanges::training();
  n.int_mid = 0.5 * (r.lo + r.hi);
  n.int_half = 0.5 * (r.hi - r.lo);
  n.ext_scale.setOnes();
  n.ext_scale.segment<2>(env::ext_index::kRelPos).setConstant(5.0);
  n.ext_scale[env::ext_index::kRelYaw] = 2.0;
  return n;
}

Mat Normalizer::obs(const Mat& raw) const {
  Mat out = raw;
  out.rowwise() -= obs_offset.transpose();
  out.array().rowwise() *= obs_scale.transpose().array();
  return out;
}

Mat Normalizer::intrinsic(const Mat& raw) const {
  Mat out = raw;
  out.rowwise() -= int_mid.transpose();
  out.array().rowwise() /= int_half.transpose().array();
  return out;
}

Mat Normalizer::extrinsic(const Mat& raw) const {
  Mat out = raw;
  out.array().rowwise() *= ext_scale.transpose().array();
  return out;
}

Mat Normalizer::history(const Mat& raw, int steps) const {
  const int d = env::kObsDim;
  if (raw.cols() != steps * d) throw std::invalid_argument("history width mismatch");
  Mat out = Mat::Zero(raw.rows(), raw.cols());
  for (Eigen::Index b = 0; b < raw.rows(); ++b) {
    for (int i = 0; i < steps; ++i) {
      const auto row = raw.block(b, i * d, 1, d);
      if (row.isZero(0.0)) continue;
      const int t = steps - 1 - i;
      out.block(b, t * d, 1, d) =
          ((row - obs_offset.transpose()).array() * obs_scale.transpose().array()).matrix();
    }
  }
  return out;
}

PolicyBundle::PolicyBundle(const NetConfig& cfg, const env::ObsVec& obs_offset,
                           std::uint64_t seed)
    : cfg_(cfg), norm_(Normalizer::make(obs_offset)) {
  cfg_.validate();
  sim::Rng rng(seed, 0x77);
  actor_ = Mlp("actor", kPolicyInputDim, cfg_.policy_hidden(), env::kActDim, rng, 0.01);
  critic_ = Mlp("critic", kPolicyInputDim, cfg_.policy_hidden(), 1, rng, 1.0);
  encoder_ = Mlp("encoder", env::kIntDim, cfg_.encoder_hidden(), kLatentDim, rng, 1.0);
  est_int_ = TemporalEncoder("est_int", cfg_, env::kObsDim, kLatentDim, rng);
  est_ext_ = TemporalEncoder("est_ext", cfg_, env::kObsDim, env::kExtDim, rng);
  Mat ls = Mat::Constant(1, env::kActDim, std::log(cfg_.init_std));
  quantize(ls);
  log_std_ = Param("log_std", ls);
}

std::vector<Param*> PolicyBundle::policy_params() {
  std::vector<Param*> out;
  append(out, actor_.params());
  out.push_back(&log_std_);
  append(out, critic_.params());
  append(out, encoder_.params());
  return out;
}

std::vector<Param*> PolicyBundle::estimator_params() {
  std::vector<Param*> out;
  append(out, est_int_.params());
  append(out, est_ext_.params());
  return out;
}

std::vector<Param*> PolicyBundle::params() {
  std::vector<Param*> out = policy_params();
  append(out, estimator_params());
  return out;
}

std::size_t PolicyBundle::parameter_count() {
  std::size_t n = 0;
  for (Param* p : params()) n += static_cast<std::size_t>(p->size());
  return n;
}

Var PolicyBundle::encode(Tape& t, const Var& x_int_n, bool train) const {
  return encoder_.forward(t, x_int_n, train);
}

Var PolicyBundle::actor_mean(Tape& t, const Var& obs_n, const Var& z, const Var& ext_n,
                             bool train) const {
  return actor_.forward(t, concat_cols({obs_n, z, ext_n}), train);
}

Var PolicyBundle::critic(Tape& t, const Var& obs_n, const Var& z, const Var& ext_n,
                         bool train) const {
  return critic_.forward(t, concat_cols({obs_n, z, ext_n}), train);
}

Var PolicyBundle::estimate_intrinsic(Tape& t, const Var& seq, bool train) const {
  return est_int_.forward(t, seq, train);
}

Var PolicyBundle::estimate_extrinsic(Tape& t, const Var& seq, bool train) const {
  const Var raw = est_ext_.forward(t, seq, train);
  return concat_cols({sigmoid(slice_cols(raw, 0, 4)), slice_cols(raw, 4, env::kExtDim - 4)});
}

Var PolicyBundle::log_std(Tape& t, bool train) const { return use(t, log_std_, train); }

PolicyOutputs PolicyBundle::evaluate(const PolicyInputs& in, Mode mode, bool with_value,
                                     bool with_estimates) const {
  Tape t;
  PolicyOutputs out;
  const Var obs_n = t.constant(norm_.obs(in.obs));
  Var z, ext_n;
  const bool need_estimates = mode == Mode::kDeployment || with_estimates;
  if (need_estimates) {
    const Var seq = t.constant(norm_.history(in.history, cfg_.history));
    const Var zh = estimate_intrinsic(t, seq, false);
    const Var eh = estimate_extrinsic(t, seq, false);
    out.z_hat = zh.value();
    out.ext_hat = eh.value();
  }
  if (mode == Mode::kTraining) {
    z = encode(t, t.constant(norm_.intrinsic(in.x_int)), false);
    ext_n = t.constant(norm_.extrinsic(in.x_ext));
    out.z = z.value();
  } else {
    z = t.constant(out.z_hat);
    ext_n = t.constant(norm_.extrinsic(out.ext_hat));
    if (in.x_int.rows() == in.obs.rows())
      out.z = encode(t, t.constant(norm_.intrinsic(in.x_int)), false).value();
  }
  out.mean = actor_mean(t, obs_n, z, ext_n, false).value();
  if (with_value) out.value = critic(t, obs_n, z, ext_n, false).value();
  return out;
}

}  // namespace atr::learner
