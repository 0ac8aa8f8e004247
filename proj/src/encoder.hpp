#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "layers.hpp"

namespace cpcseq::model {

using nn::Mat;
using nn::Parameter;
using nn::Tape;
using nn::Var;

enum class EncoderFamily { FullyConnected, Conv1d, Recurrent };
enum class RnnCell { Lstm, Gru };

EncoderFamily encoder_family_from_string(const std::string& s);
std::string to_string(EncoderFamily f);
RnnCell rnn_cell_from_string(const std::string& s);
std::string to_string(RnnCell c);

struct EncoderSpec {
  EncoderFamily family = EncoderFamily::Conv1d;
  std::vector<int> layer_widths = {32, 64, 128};
  int kernel_size = 3;           // conv1d only, odd
  RnnCell cell = RnnCell::Gru;   // recurrent only
  int hidden = 128;              // recurrent only
  double dropout_p = 0.2;

  int latent_dim() const {
    return family == EncoderFamily::Recurrent ? hidden : layer_widths.back();
  }
  int num_layers() const {
    return family == EncoderFamily::Recurrent ? 1 : static_cast<int>(layer_widths.size());
  }
  void validate() const;  // throws UsageError on malformed specs

  nlohmann::json to_json() const;
  static EncoderSpec from_json(const nlohmann::json& j);
};

// Returned by receptive_field() for recurrent encoders, whose view of the
// past is unbounded (causal).
inline constexpr int kUnboundedCausal = -1;

// conv1d: 1 + num_layers * (kernel - 1); fully connected: 1.
int receptive_field(const EncoderSpec& spec);

// Maps a window batch to per-timestep latents, preserving sequence length.
//   fully_connected: the MLP runs independently per timestep.
//   conv1d:          blocks of conv (reflect boundary) -> ReLU -> dropout.
//   recurrent:       forward-only single layer; dropout on the outputs.
struct Encoder {
  EncoderSpec spec;
  int in_channels = 0;
  std::vector<nn::Linear> fc;
  std::vector<nn::Conv1d> conv;
  nn::GruLayer rnn_gru;
  nn::LstmLayer rnn_lstm;

  static Encoder make(const EncoderSpec& spec, int in_channels, Rng& rng);

  // `stacked` holds B windows of T timesteps as [(B*T) x C], row b*T + t.
  // Returns T latent matrices [B x D]. Layers below `frozen_layers` run with
  // eval semantics (no dropout) regardless of `train`, so frozen features
  // stay pure functions of the weights.
  std::vector<Var> forward(Tape& t, Var stacked, int batch, int len, bool train, Rng* rng,
                           int frozen_layers = 0);

  std::vector<Parameter*> params();
  // Parameters belonging to encoder layer `i` (0-based); used by partial
  // freeze policies.
  std::vector<Parameter*> layer_params(int i);
};

// Stacks windows [T x C] into the [(B*T) x C] layout the encoder consumes.
Mat stack_windows(const std::vector<Eigen::MatrixXd>& windows,
                  const std::vector<std::size_t>& indices);

}  // namespace cpcseq::model
