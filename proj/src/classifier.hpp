#pragma once

#include <optional>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "cpc.hpp"
#include "metrics.hpp"

namespace cpcseq::model {

// Which pre-trained weights stay frozen during supervised training.
//   enc_leN          : first N encoder layers frozen from the checkpoint,
//                      deeper layers and g_ar re-initialized and trained
//   enc_le3_plus_gar : whole backbone frozen (features are pure functions)
//   none             : nothing frozen, everything randomly initialized
enum class FreezePolicy { EncLe1, EncLe2, EncLe3, EncLe3PlusGar, None };

FreezePolicy freeze_policy_from_string(const std::string& s);
std::string to_string(FreezePolicy p);

struct FinetuneConfig {
  double learning_rate = 5e-4;
  int epochs = 150;
  double decay_factor = 0.8;
  int decay_every = 25;
  int batch_size = 64;
  long seed = 1;
  // Per-epoch validation F1 tracking costs a full validation pass per epoch;
  // final validation metrics are always computed.
  bool track_val_history = false;
};

// lr(e) = base * decay^floor(e / every)
double scheduled_lr(double base, double decay, int every, int epoch);

// 256 -> 128 -> num_classes MLP; batch norm, ReLU and dropout(0.2) after the
// first two layers.
struct ClassifierHead {
  nn::Linear l1, l2, l3;
  nn::BatchNorm bn1, bn2;
  double dropout_p = 0.2;
  int num_classes = 0;

  static ClassifierHead make(int feature_dim, int num_classes, Rng& rng);
  Var forward(Tape& t, Var x, bool train, Rng* rng);
  std::vector<Parameter*> params();
};

// Encoder + g_ar stack with a freeze policy applied; produces the 256-d
// context vector c_T after consuming the whole window.
struct Backbone {
  Encoder encoder;
  nn::GruStack gar;
  ModelConfig config;
  FreezePolicy policy = FreezePolicy::None;

  // Frozen layers load checkpoint weights with gradients disabled; the rest
  // are freshly initialized from `rng` and trainable.
  static Backbone from_checkpoint(const Checkpoint& ck, FreezePolicy policy, Rng& rng);
  // All-random backbone (end-to-end baseline and unit tests).
  static Backbone random(const ModelConfig& cfg, FreezePolicy policy, Rng& rng);

  bool fully_frozen() const { return policy == FreezePolicy::EncLe3PlusGar; }
  // c_T for a stacked batch; frozen layers always run with eval semantics.
  Var features(Tape& t, const Mat& stacked, int batch, int len, bool train, Rng* rng);
  std::vector<Parameter*> params();
  std::vector<Parameter*> trainable_params();
};

// Feature matrix [N x context_dim] of a dataset through a backbone in eval
// mode, batched for speed.
Mat extract_features(Backbone& bb, const data::WindowDataset& ds, int batch_size = 256);

struct TrainClassifierResult {
  eval::MetricsReport val_metrics;
  std::vector<double> epoch_train_loss;
  std::vector<double> epoch_val_f1;
};

// Fires after every epoch (val_f1 < 0 when not tracked); also fires for the
// aborted epoch when training hits a non-finite loss.
using ClassifierEpochCallback = std::function<void(int epoch, double train_loss, double val_f1)>;

// Cross-entropy training of head plus any trainable backbone layers. Batches
// of size < 2 are dropped (batch norm needs a batch). Throws NumericError on
// a non-finite loss.
TrainClassifierResult train_classifier(Backbone& bb, ClassifierHead& head,
                                       const data::WindowDataset& train,
                                       const data::WindowDataset& val, const FinetuneConfig& cfg,
                                       const ClassifierEpochCallback& on_epoch = nullptr);

std::vector<int> predict(Backbone& bb, ClassifierHead& head, const data::WindowDataset& ds);

// Argmax with ties resolved to the lowest class index.
int argmax_class(const Eigen::RowVectorXd& logits);

}  // namespace cpcseq::model
