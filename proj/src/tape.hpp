#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

namespace cpcseq {
class Rng;
}

namespace cpcseq::nn {

using Mat = Eigen::MatrixXd;

// A named, trainable tensor. Stored as a 2-D matrix [dims[0] x prod(dims[1:])]
// in logical row-major layout; `dims` keeps the logical rank for
// serialization. Frozen parameters take part in forward passes as constants
// and receive no gradient.
struct Parameter {
  std::string name;
  std::vector<std::uint64_t> dims;
  Mat value;
  Mat grad;
  bool trainable = true;

  long rows() const { return value.rows(); }
  long cols() const { return value.cols(); }
  void zero_grad() { grad.setZero(); }
};

// Fills `p.value` with uniform draws in [-bound, bound], in logical row-major
// order so initialization is independent of the storage layout.
void init_uniform(Parameter& p, double bound, Rng& rng);

Parameter make_parameter(std::string name, std::vector<std::uint64_t> dims);

// Handle to a node on a Tape; valid until the tape is cleared.
struct Var {
  std::int32_t id = -1;
};

// Reverse-mode tape of matrix-valued operations. Nodes are appended in
// topological order by construction, so backward() is a reverse sweep.
// A fresh tape is built per training step and cleared afterwards.
class Tape {
 public:
  // Leaves.
  Var constant(Mat v);
  Var param(Parameter& p);  // cached: repeated calls return the same node

  // Linear algebra.
  Var matmul(Var a, Var b);     // A * B
  Var matmul_nt(Var a, Var b);  // A * B^T
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var add_rowvec(Var a, Var row);   // row [1 x F] broadcast over rows of a
  Var cmul(Var a, Var b);           // elementwise
  Var cmul_rowvec(Var a, Var row);  // broadcast elementwise multiply
  Var scale(Var a, double c);
  Var add_const(Var a, double c);

  // Nonlinearities.
  Var relu(Var a);
  Var sigmoid(Var a);
  Var tanh_act(Var a);
  Var rsqrt(Var a, double eps);  // (a + eps)^(-1/2), elementwise

  // Shape plumbing.
  Var gather_rows(Var a, std::vector<int> rows);  // out.row(i) = a.row(rows[i])
  Var concat_cols(const std::vector<Var>& parts);
  Var slice_cols(Var a, int offset, int n);
  Var mean_rows(Var a);  // [1 x F] column means
  Var sum_all(Var a);    // [1 x 1]

  // Losses (scalar [1 x 1] outputs).
  // InfoNCE step loss over square logits with positives on the diagonal:
  //   -(1/B) sum_i (logits(i,i) - logsumexp_row_i)
  Var infonce_step(Var logits);
  // Mean softmax cross entropy of logits [B x C] against integer labels.
  Var cross_entropy(Var logits, std::vector<int> labels);

  const Mat& value(Var v) const {
    const Node& n = nodes_[v.id];
    return n.external ? *n.external : n.stored;
  }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(root)/d(root) = 1 (root must be 1x1) and sweeps the tape in
  // reverse, accumulating parameter gradients into Parameter::grad.
  void backward(Var root);

  void clear();

 private:
  struct Node {
    Mat stored;                 // owned value (empty for external leaves)
    const Mat* external = nullptr;  // parameter leaves alias their value here
    Mat grad;                   // lazily sized during backward
    Mat* grad_sink = nullptr;   // parameter leaves accumulate here
    std::function<void(Tape&, Node&)> backprop;  // null for leaves
  };

  Var push(Mat value, std::function<void(Tape&, Node&)> backprop);
  Var push_external(const Mat* value, Mat* grad_sink);

  // Returns the gradient accumulator for `id`, allocating zeros on first use.
  Mat& grad_of(std::int32_t id);
  bool has_grad(std::int32_t id) const;

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, Var> bound_params_;
};

// Convenience: builds a constant dropout mask (inverted scaling) and applies
// it. No-op when train == false or p == 0.
Var dropout(Tape& t, Var x, double p, bool train, Rng* rng);

}  // namespace cpcseq::nn
