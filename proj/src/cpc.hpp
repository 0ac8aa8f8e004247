#pragma once

#include <functional>
#include <string>
#include <vector>

#include "encoder.hpp"
#include "pipeline.hpp"

namespace cpcseq::model {

// Width overrides for the tiny models used by gradient checks; the defaults
// are the production sizes.
struct CpcDims {
  int latent = 128;   // must equal the encoder's latent dim
  int context = 256;  // g_ar hidden size
  int gar_layers = 2;
  double gar_dropout = 0.2;
};

struct CpcModel {
  Encoder encoder;
  nn::GruStack gar;
  std::vector<nn::Linear> heads;  // K linear maps context -> latent
  int k_horizon = 0;
  CpcDims dims;

  static CpcModel make(const EncoderSpec& spec, int in_channels, int k_horizon, Rng& rng,
                       CpcDims dims = {});
  std::vector<Parameter*> params();
};

// Everything a checkpoint needs to rebuild the network shape.
struct ModelConfig {
  EncoderSpec spec;
  int in_channels = 0;
  int k_horizon = 12;
  int window_len = 30;
  CpcDims dims;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// Uniform anchor on [0, T-K-1]: context covers latent steps 0..t, targets
// t+1..t+K all stay inside the window.
int sample_anchor(int len, int k_horizon, Rng& rng);

struct CpcForward {
  std::vector<Var> step_logits;  // K matrices [B x B]; positives on diagonal
  Var context;                   // [B x context_dim]
  Var loss;                      // [1 x 1] mean InfoNCE over the K steps
};

// Encodes the whole batch, summarizes latents 0..t with g_ar, scores each
// future step against in-batch negatives (same offset, other windows).
CpcForward cpc_forward(Tape& t, CpcModel& m, const Mat& stacked, int batch, int len, int anchor,
                       bool train, Rng* rng);

// InfoNCE over per-step logits with positives on the diagonal, averaged over
// steps. Templated so the identity tests can run in both precisions.
template <typename Scalar>
Scalar info_nce_value(const std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>& logits) {
  Scalar total = Scalar(0);
  for (const auto& L : logits) {
    if (L.rows() != L.cols()) throw std::invalid_argument("info_nce: logits must be square");
    const long b = L.rows();
    Scalar step = Scalar(0);
    for (long i = 0; i < b; ++i) {
      const Scalar m = L.row(i).maxCoeff();
      Scalar sum = Scalar(0);
      for (long j = 0; j < b; ++j) sum += std::exp(L(i, j) - m);
      step -= L(i, i) - (m + std::log(sum));
    }
    total += step / Scalar(b);
  }
  return total / Scalar(logits.size());
}

// Fraction of rows whose argmax lands on the diagonal, per step; argmax ties
// resolve to the lowest column.
std::vector<double> pretext_accuracy(const std::vector<Mat>& logits);

struct PretrainConfig {
  int k_horizon = 12;
  double learning_rate = 1e-3;
  int epochs = 150;
  int batch_size = 64;
  long seed = 1;
  CpcDims dims;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::vector<double> val_step_accuracy;
};

struct PretrainResult {
  std::vector<EpochStats> history;
  int best_epoch = -1;  // lowest validation loss
  double best_val_loss = 0.0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Trains the model in place with Adam; returns per-epoch history and restores
// the parameters of the best-validation-loss epoch before returning. The
// callback fires after every epoch so callers can persist partial history
// (it also fires for the final partial epoch when training aborts on a
// non-finite loss, before NumericError is thrown).
PretrainResult pretrain(CpcModel& m, const PretrainConfig& cfg, const data::WindowDataset& train,
                        const data::WindowDataset& val, const EpochCallback& on_epoch = nullptr);

// Mean InfoNCE loss and per-step pretext accuracy over a dataset in eval
// mode, with anchors drawn from `anchor_seed`.
std::pair<double, std::vector<double>> evaluate_pretext(CpcModel& m, const data::WindowDataset& ds,
                                                        int batch_size, long anchor_seed);

}  // namespace cpcseq::model
