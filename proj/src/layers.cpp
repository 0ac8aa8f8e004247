#include "layers.hpp"

#include <cmath>

namespace cpcseq::nn {

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n - 2;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

Linear Linear::make(const std::string& prefix, int in, int out, Rng& rng, bool bias) {
  Linear l;
  l.has_bias = bias;
  l.w = make_parameter(prefix + ".weight",
                       {static_cast<std::uint64_t>(out), static_cast<std::uint64_t>(in)});
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  init_uniform(l.w, bound, rng);
  if (bias) {
    l.b = make_parameter(prefix + ".bias", {static_cast<std::uint64_t>(out)});
    init_uniform(l.b, bound, rng);
  }
  return l;
}

Var Linear::forward(Tape& t, Var x) {
  Var out = t.matmul_nt(x, t.param(w));
  if (has_bias) out = t.add_rowvec(out, t.param(b));
  return out;
}

std::vector<Parameter*> Linear::params() {
  std::vector<Parameter*> p{&w};
  if (has_bias) p.push_back(&b);
  return p;
}

Conv1d Conv1d::make(const std::string& prefix, int in, int out, int kernel, Rng& rng) {
  Conv1d c;
  c.kernel = kernel;
  c.in_channels = in;
  c.w = make_parameter(prefix + ".weight",
                       {static_cast<std::uint64_t>(out), static_cast<std::uint64_t>(kernel),
                        static_cast<std::uint64_t>(in)});
  c.b = make_parameter(prefix + ".bias", {static_cast<std::uint64_t>(out)});
  const double bound = 1.0 / std::sqrt(static_cast<double>(in * kernel));
  init_uniform(c.w, bound, rng);
  init_uniform(c.b, bound, rng);
  return c;
}

Var Conv1d::forward(Tape& t, Var stacked, int batch, int len) {
  const int pad = (kernel - 1) / 2;
  std::vector<Var> taps;
  taps.reserve(static_cast<std::size_t>(kernel));
  for (int j = 0; j < kernel; ++j) {
    std::vector<int> idx(static_cast<std::size_t>(batch) * static_cast<std::size_t>(len));
    for (int bI = 0; bI < batch; ++bI)
      for (int s = 0; s < len; ++s)
        idx[static_cast<std::size_t>(bI) * len + s] = bI * len + reflect_index(s + j - pad, len);
    taps.push_back(t.gather_rows(stacked, std::move(idx)));
  }
  Var cols = t.concat_cols(taps);  // [(B*T) x (k*in)], tap-major to match w
  Var out = t.matmul_nt(cols, t.param(w));
  return t.add_rowvec(out, t.param(b));
}

std::vector<Parameter*> Conv1d::params() { return {&w, &b}; }

GruLayer GruLayer::make(const std::string& prefix, int in, int hidden, Rng& rng) {
  GruLayer g;
  g.hidden = hidden;
  const auto h3 = static_cast<std::uint64_t>(3 * hidden);
  g.w_ih = make_parameter(prefix + ".w_ih", {h3, static_cast<std::uint64_t>(in)});
  g.w_hh = make_parameter(prefix + ".w_hh", {h3, static_cast<std::uint64_t>(hidden)});
  g.b_ih = make_parameter(prefix + ".b_ih", {h3});
  g.b_hh = make_parameter(prefix + ".b_hh", {h3});
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  init_uniform(g.w_ih, bound, rng);
  init_uniform(g.w_hh, bound, rng);
  init_uniform(g.b_ih, bound, rng);
  init_uniform(g.b_hh, bound, rng);
  return g;
}

std::vector<Var> GruLayer::forward(Tape& t, const std::vector<Var>& steps) {
  const long batch = t.value(steps[0]).rows();
  Var vw_ih = t.param(w_ih), vw_hh = t.param(w_hh);
  Var vb_ih = t.param(b_ih), vb_hh = t.param(b_hh);
  Var h = t.constant(Mat::Zero(batch, hidden));
  std::vector<Var> out;
  out.reserve(steps.size());
  for (Var x : steps) {
    Var gi = t.add_rowvec(t.matmul_nt(x, vw_ih), vb_ih);
    Var gh = t.add_rowvec(t.matmul_nt(h, vw_hh), vb_hh);
    Var r = t.sigmoid(t.add(t.slice_cols(gi, 0, hidden), t.slice_cols(gh, 0, hidden)));
    Var z = t.sigmoid(t.add(t.slice_cols(gi, hidden, hidden), t.slice_cols(gh, hidden, hidden)));
    Var n = t.tanh_act(t.add(t.slice_cols(gi, 2 * hidden, hidden),
                             t.cmul(r, t.slice_cols(gh, 2 * hidden, hidden))));
    Var one_minus_z = t.add_const(t.scale(z, -1.0), 1.0);
    h = t.add(t.cmul(one_minus_z, n), t.cmul(z, h));
    out.push_back(h);
  }
  return out;
}

std::vector<Parameter*> GruLayer::params() { return {&w_ih, &w_hh, &b_ih, &b_hh}; }

LstmLayer LstmLayer::make(const std::string& prefix, int in, int hidden, Rng& rng) {
  LstmLayer l;
  l.hidden = hidden;
  const auto h4 = static_cast<std::uint64_t>(4 * hidden);
  l.w_ih = make_parameter(prefix + ".w_ih", {h4, static_cast<std::uint64_t>(in)});
  l.w_hh = make_parameter(prefix + ".w_hh", {h4, static_cast<std::uint64_t>(hidden)});
  l.b_ih = make_parameter(prefix + ".b_ih", {h4});
  l.b_hh = make_parameter(prefix + ".b_hh", {h4});
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  init_uniform(l.w_ih, bound, rng);
  init_uniform(l.w_hh, bound, rng);
  init_uniform(l.b_ih, bound, rng);
  init_uniform(l.b_hh, bound, rng);
  return l;
}

std::vector<Var> LstmLayer::forward(Tape& t, const std::vector<Var>& steps) {
  const long batch = t.value(steps[0]).rows();
  Var vw_ih = t.param(w_ih), vw_hh = t.param(w_hh);
  Var vb_ih = t.param(b_ih), vb_hh = t.param(b_hh);
  Var h = t.constant(Mat::Zero(batch, hidden));
  Var c = t.constant(Mat::Zero(batch, hidden));
  std::vector<Var> out;
  out.reserve(steps.size());
  for (Var x : steps) {
    Var gates = t.add(t.add_rowvec(t.matmul_nt(x, vw_ih), vb_ih),
                      t.add_rowvec(t.matmul_nt(h, vw_hh), vb_hh));
    Var i = t.sigmoid(t.slice_cols(gates, 0, hidden));
    Var f = t.sigmoid(t.slice_cols(gates, hidden, hidden));
    Var g = t.tanh_act(t.slice_cols(gates, 2 * hidden, hidden));
    Var o = t.sigmoid(t.slice_cols(gates, 3 * hidden, hidden));
    c = t.add(t.cmul(f, c), t.cmul(i, g));
    h = t.cmul(o, t.tanh_act(c));
    out.push_back(h);
  }
  return out;
}

std::vector<Parameter*> LstmLayer::params() { return {&w_ih, &w_hh, &b_ih, &b_hh}; }

GruStack GruStack::make(const std::string& prefix, int in, int hidden, int num_layers,
                        double dropout_p, Rng& rng) {
  GruStack s;
  s.dropout_p = dropout_p;
  for (int l = 0; l < num_layers; ++l) {
    s.layers.push_back(
        GruLayer::make(prefix + ".layer" + std::to_string(l), l == 0 ? in : hidden, hidden, rng));
  }
  return s;
}

Var GruStack::forward_final(Tape& t, const std::vector<Var>& steps, bool train, Rng* rng) {
  std::vector<Var> cur = steps;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    cur = layers[l].forward(t, cur);
    if (l + 1 < layers.size()) {
      for (Var& v : cur) v = dropout(t, v, dropout_p, train, rng);
    }
  }
  return cur.back();
}

std::vector<Parameter*> GruStack::params() {
  std::vector<Parameter*> out;
  for (auto& l : layers)
    for (auto* p : l.params()) out.push_back(p);
  return out;
}

BatchNorm BatchNorm::make(const std::string& prefix, int features) {
  BatchNorm bn;
  bn.gamma = make_parameter(prefix + ".gamma", {static_cast<std::uint64_t>(features)});
  bn.beta = make_parameter(prefix + ".beta", {static_cast<std::uint64_t>(features)});
  bn.gamma.value.setOnes();
  bn.running_mean = make_parameter(prefix + ".running_mean", {static_cast<std::uint64_t>(features)});
  bn.running_var = make_parameter(prefix + ".running_var", {static_cast<std::uint64_t>(features)});
  bn.running_var.value.setOnes();
  bn.running_mean.trainable = false;
  bn.running_var.trainable = false;
  return bn;
}

Var BatchNorm::forward(Tape& t, Var x, bool train) {
  Var vg = t.param(gamma), vb = t.param(beta);
  if (train) {
    const long b = t.value(x).rows();
    Var mu = t.mean_rows(x);
    Var xc = t.sub(x, t.matmul(t.constant(Mat::Ones(b, 1)), mu));
    Var var = t.mean_rows(t.cmul(xc, xc));
    Var inv = t.rsqrt(var, eps);
    Var xhat = t.cmul_rowvec(xc, inv);
    // running estimates track unbiased batch variance
    const Mat mu_v = t.value(mu);
    Mat var_v = t.value(var);
    if (b > 1) var_v *= static_cast<double>(b) / static_cast<double>(b - 1);
    running_mean.value = (1.0 - momentum) * running_mean.value + momentum * mu_v;
    running_var.value = (1.0 - momentum) * running_var.value + momentum * var_v;
    return t.add_rowvec(t.cmul_rowvec(xhat, vg), vb);
  }
  Mat inv = (running_var.value.array() + eps).rsqrt().matrix();
  Var xc = t.add_rowvec(x, t.constant(-running_mean.value));
  Var xhat = t.cmul_rowvec(xc, t.constant(std::move(inv)));
  return t.add_rowvec(t.cmul_rowvec(xhat, vg), vb);
}

std::vector<Parameter*> BatchNorm::params() {
  return {&gamma, &beta, &running_mean, &running_var};
}

Adam::Adam(std::vector<Parameter*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (auto* p : params_) {
    m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    if (!p.trainable) continue;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    const Mat mhat = m_[i] / bc1;
    const Mat vhat = v_[i] / bc2;
    p.value.array() -= lr_ * mhat.array() / (vhat.array().sqrt() + eps_);
  }
}

}  // namespace cpcseq::nn
