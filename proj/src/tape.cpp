#include "tape.hpp"

#include <cassert>
#include <cmath>
#include <numeric>
#include <utility>

#include "rng.hpp"

namespace cpcseq::nn {

Parameter make_parameter(std::string name, std::vector<std::uint64_t> dims) {
  Parameter p;
  p.name = std::move(name);
  p.dims = std::move(dims);
  long rows = static_cast<long>(p.dims[0]);
  long cols = 1;
  for (std::size_t i = 1; i < p.dims.size(); ++i) cols *= static_cast<long>(p.dims[i]);
  if (p.dims.size() == 1) {
    rows = 1;
    cols = static_cast<long>(p.dims[0]);
  }
  p.value = Mat::Zero(rows, cols);
  p.grad = Mat::Zero(rows, cols);
  return p;
}

void init_uniform(Parameter& p, double bound, Rng& rng) {
  for (long r = 0; r < p.value.rows(); ++r)
    for (long c = 0; c < p.value.cols(); ++c)
      p.value(r, c) = rng.uniform(-bound, bound);
}

Var Tape::push(Mat value, std::function<void(Tape&, Node&)> backprop) {
  Node n;
  n.stored = std::move(value);
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::push_external(const Mat* value, Mat* grad_sink) {
  Node n;
  n.external = value;
  n.grad_sink = grad_sink;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::constant(Mat v) { return push(std::move(v), nullptr); }

Var Tape::param(Parameter& p) {
  auto it = bound_params_.find(&p);
  if (it != bound_params_.end()) return it->second;
  Var v = push_external(&p.value, p.trainable ? &p.grad : nullptr);
  bound_params_.emplace(&p, v);
  return v;
}

Mat& Tape::grad_of(std::int32_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) {
    const Mat& v = n.external ? *n.external : n.stored;
    n.grad = Mat::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

bool Tape::has_grad(std::int32_t id) const { return nodes_[id].grad.size() != 0; }

Var Tape::matmul(Var a, Var b) {
  const Mat& A = value(a);
  const Mat& B = value(b);
  return push(A * B, [a, b](Tape& t, Node& n) {
    t.grad_of(a.id).noalias() += n.grad * t.value(b).transpose();
    t.grad_of(b.id).noalias() += t.value(a).transpose() * n.grad;
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  const Mat& A = value(a);
  const Mat& B = value(b);
  return push(A * B.transpose(), [a, b](Tape& t, Node& n) {
    t.grad_of(a.id).noalias() += n.grad * t.value(b);
    t.grad_of(b.id).noalias() += n.grad.transpose() * t.value(a);
  });
}

Var Tape::add(Var a, Var b) {
  return push(value(a) + value(b), [a, b](Tape& t, Node& n) {
    t.grad_of(a.id) += n.grad;
    t.grad_of(b.id) += n.grad;
  });
}

Var Tape::sub(Var a, Var b) {
  return push(value(a) - value(b), [a, b](Tape& t, Node& n) {
    t.grad_of(a.id) += n.grad;
    t.grad_of(b.id) -= n.grad;
  });
}

Var Tape::add_rowvec(Var a, Var row) {
  Mat out = value(a);
  out.rowwise() += value(row).row(0);
  return push(std::move(out), [a, row](Tape& t, Node& n) {
    t.grad_of(a.id) += n.grad;
    t.grad_of(row.id).row(0) += n.grad.colwise().sum();
  });
}

Var Tape::cmul(Var a, Var b) {
  return push(value(a).cwiseProduct(value(b)), [a, b](Tape& t, Node& n) {
    t.grad_of(a.id) += n.grad.cwiseProduct(t.value(b));
    t.grad_of(b.id) += n.grad.cwiseProduct(t.value(a));
  });
}

Var Tape::cmul_rowvec(Var a, Var row) {
  Mat out = value(a);
  out.array().rowwise() *= value(row).row(0).array();
  return push(std::move(out), [a, row](Tape& t, Node& n) {
    Mat& ga = t.grad_of(a.id);
    ga.array() += n.grad.array().rowwise() * t.value(row).row(0).array();
    t.grad_of(row.id).row(0) += n.grad.cwiseProduct(t.value(a)).colwise().sum();
  });
}

Var Tape::scale(Var a, double c) {
  return push(value(a) * c, [a, c](Tape& t, Node& n) { t.grad_of(a.id) += c * n.grad; });
}

Var Tape::add_const(Var a, double c) {
  return push(value(a).array() + c, [a](Tape& t, Node& n) { t.grad_of(a.id) += n.grad; });
}

Var Tape::relu(Var a) {
  return push(value(a).cwiseMax(0.0), [a](Tape& t, Node& n) {
    t.grad_of(a.id).array() += n.grad.array() * (t.value(a).array() > 0.0).cast<double>();
  });
}

Var Tape::sigmoid(Var a) {
  Mat out = (1.0 / (1.0 + (-value(a).array()).exp())).matrix();
  return push(std::move(out), [a](Tape& t, Node& n) {
    const auto& y = n.stored.array();
    t.grad_of(a.id).array() += n.grad.array() * y * (1.0 - y);
  });
}

Var Tape::tanh_act(Var a) {
  Mat out = value(a).array().tanh().matrix();
  return push(std::move(out), [a](Tape& t, Node& n) {
    const auto& y = n.stored.array();
    t.grad_of(a.id).array() += n.grad.array() * (1.0 - y * y);
  });
}

Var Tape::rsqrt(Var a, double eps) {
  Mat out = (value(a).array() + eps).rsqrt().matrix();
  return push(std::move(out), [a](Tape& t, Node& n) {
    const auto& y = n.stored.array();  // y = (a+eps)^(-1/2); dy/da = -y^3/2
    t.grad_of(a.id).array() += n.grad.array() * (-0.5) * y * y * y;
  });
}

Var Tape::gather_rows(Var a, std::vector<int> rows) {
  const Mat& A = value(a);
  Mat out(static_cast<long>(rows.size()), A.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<long>(i)) = A.row(rows[i]);
  return push(std::move(out), [a, rows = std::move(rows)](Tape& t, Node& n) {
    Mat& ga = t.grad_of(a.id);
    for (std::size_t i = 0; i < rows.size(); ++i)
      ga.row(rows[i]) += n.grad.row(static_cast<long>(i));
  });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  long cols = 0;
  const long rows = value(parts[0]).rows();
  for (Var p : parts) cols += value(p).cols();
  Mat out(rows, cols);
  long off = 0;
  for (Var p : parts) {
    const Mat& v = value(p);
    out.middleCols(off, v.cols()) = v;
    off += v.cols();
  }
  return push(std::move(out), [parts](Tape& t, Node& n) {
    long off = 0;
    for (Var p : parts) {
      const long w = t.value(p).cols();
      t.grad_of(p.id) += n.grad.middleCols(off, w);
      off += w;
    }
  });
}

Var Tape::slice_cols(Var a, int offset, int ncols) {
  Mat out = value(a).middleCols(offset, ncols);
  return push(std::move(out), [a, offset, ncols](Tape& t, Node& n) {
    t.grad_of(a.id).middleCols(offset, ncols) += n.grad;
  });
}

Var Tape::mean_rows(Var a) {
  const Mat& A = value(a);
  Mat out = A.colwise().mean();
  return push(std::move(out), [a](Tape& t, Node& n) {
    const Mat& A = t.value(a);
    const double inv = 1.0 / static_cast<double>(A.rows());
    t.grad_of(a.id).array().rowwise() += inv * n.grad.row(0).array();
  });
}

Var Tape::sum_all(Var a) {
  Mat out(1, 1);
  out(0, 0) = value(a).sum();
  return push(std::move(out), [a](Tape& t, Node& n) {
    t.grad_of(a.id).array() += n.grad(0, 0);
  });
}

Var Tape::infonce_step(Var logits) {
  const Mat& L = value(logits);
  const long b = L.rows();
  // softmax rows with max subtraction; kept for the backward pass
  Mat soft(b, L.cols());
  double loss = 0.0;
  for (long i = 0; i < b; ++i) {
    const double m = L.row(i).maxCoeff();
    Eigen::ArrayXd e = (L.row(i).array() - m).exp();
    const double s = e.sum();
    soft.row(i) = (e / s).matrix();
    loss -= L(i, i) - (m + std::log(s));
  }
  loss /= static_cast<double>(b);
  Mat out(1, 1);
  out(0, 0) = loss;
  return push(std::move(out), [logits, soft = std::move(soft)](Tape& t, Node& n) {
    const double g = n.grad(0, 0) / static_cast<double>(soft.rows());
    Mat d = soft;
    d.diagonal().array() -= 1.0;
    t.grad_of(logits.id) += g * d;
  });
}

Var Tape::cross_entropy(Var logits, std::vector<int> labels) {
  const Mat& L = value(logits);
  const long b = L.rows();
  Mat soft(b, L.cols());
  double loss = 0.0;
  for (long i = 0; i < b; ++i) {
    const double m = L.row(i).maxCoeff();
    Eigen::ArrayXd e = (L.row(i).array() - m).exp();
    const double s = e.sum();
    soft.row(i) = (e / s).matrix();
    loss -= L(i, labels[static_cast<std::size_t>(i)]) - (m + std::log(s));
  }
  loss /= static_cast<double>(b);
  Mat out(1, 1);
  out(0, 0) = loss;
  return push(std::move(out),
              [logits, labels = std::move(labels), soft = std::move(soft)](Tape& t, Node& n) {
                const double g = n.grad(0, 0) / static_cast<double>(soft.rows());
                Mat d = soft;
                for (long i = 0; i < d.rows(); ++i) d(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
                t.grad_of(logits.id) += g * d;
              });
}

void Tape::backward(Var root) {
  assert(value(root).rows() == 1 && value(root).cols() == 1);
  grad_of(root.id)(0, 0) = 1.0;
  for (std::int32_t id = root.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!has_grad(id)) continue;
    if (n.backprop) n.backprop(*this, n);
    if (n.grad_sink) *n.grad_sink += n.grad;
  }
}

void Tape::clear() {
  nodes_.clear();
  bound_params_.clear();
}

Var dropout(Tape& t, Var x, double p, bool train, Rng* rng) {
  if (!train || p <= 0.0) return x;
  const Mat& v = t.value(x);
  Mat mask(v.rows(), v.cols());
  const double keep = 1.0 - p;
  for (long r = 0; r < mask.rows(); ++r)
    for (long c = 0; c < mask.cols(); ++c)
      mask(r, c) = (rng->uniform() < keep) ? 1.0 / keep : 0.0;
  return t.cmul(x, t.constant(std::move(mask)));
}

}  // namespace cpcseq::nn
