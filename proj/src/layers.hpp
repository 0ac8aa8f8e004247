#pragma once

#include <string>
#include <vector>

#include "rng.hpp"
#include "tape.hpp"

namespace cpcseq::nn {

// Fold an arbitrary integer index into [0, n) by mirror reflection without
// repeating the edge sample (period 2n-2). Matches standard reflect padding
// whenever the pad fits; stays total for any pad and n >= 1.
int reflect_index(int i, int n);

struct Linear {
  Parameter w;  // [out x in]
  Parameter b;  // [out]
  bool has_bias = true;

  static Linear make(const std::string& prefix, int in, int out, Rng& rng, bool bias = true);
  Var forward(Tape& t, Var x);  // x [R x in] -> [R x out]
  std::vector<Parameter*> params();
};

// 1-D convolution over the time axis of a window batch stacked as
// [(B*T) x C] with row index b*T + t. Reflect boundary, stride 1, so the
// output keeps T rows per window. Weight layout [out x (k*in)], tap-major.
struct Conv1d {
  Parameter w;
  Parameter b;
  int kernel = 3;
  int in_channels = 0;

  static Conv1d make(const std::string& prefix, int in, int out, int kernel, Rng& rng);
  Var forward(Tape& t, Var stacked, int batch, int len);
  std::vector<Parameter*> params();
};

// Single GRU layer, gate order reset|update|new (rows of w_ih / w_hh).
struct GruLayer {
  Parameter w_ih;  // [3H x in]
  Parameter w_hh;  // [3H x H]
  Parameter b_ih;  // [3H]
  Parameter b_hh;  // [3H]
  int hidden = 0;

  static GruLayer make(const std::string& prefix, int in, int hidden, Rng& rng);
  // Consumes per-step inputs [B x in]; returns per-step hidden states [B x H].
  std::vector<Var> forward(Tape& t, const std::vector<Var>& steps);
  std::vector<Parameter*> params();
};

// Single LSTM layer, gate order input|forget|cell|output.
struct LstmLayer {
  Parameter w_ih;  // [4H x in]
  Parameter w_hh;  // [4H x H]
  Parameter b_ih;  // [4H]
  Parameter b_hh;  // [4H]
  int hidden = 0;

  static LstmLayer make(const std::string& prefix, int in, int hidden, Rng& rng);
  std::vector<Var> forward(Tape& t, const std::vector<Var>& steps);
  std::vector<Parameter*> params();
};

// Stacked GRU with dropout applied between layers (train mode only).
struct GruStack {
  std::vector<GruLayer> layers;
  double dropout_p = 0.2;

  static GruStack make(const std::string& prefix, int in, int hidden, int num_layers, double dropout_p,
                       Rng& rng);
  // Final top-layer hidden state after consuming all steps: [B x H].
  Var forward_final(Tape& t, const std::vector<Var>& steps, bool train, Rng* rng);
  std::vector<Parameter*> params();
};

// Batch normalization over the batch dimension of [B x F] activations.
// Train mode normalizes with batch statistics (biased variance) and updates
// the running estimates with unbiased variance; eval mode uses the running
// estimates as constants. The running estimates are kept as non-trainable
// parameters so they serialize with everything else.
struct BatchNorm {
  Parameter gamma;         // [F]
  Parameter beta;          // [F]
  Parameter running_mean;  // [F], state rather than weight
  Parameter running_var;   // [F]
  double eps = 1e-5;
  double momentum = 0.1;

  static BatchNorm make(const std::string& prefix, int features);
  Var forward(Tape& t, Var x, bool train);
  std::vector<Parameter*> params();
};

// Adam with bias correction. The learning rate is mutable so schedules can
// adjust it between steps.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  void zero_grad();
  void step();

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace cpcseq::nn
