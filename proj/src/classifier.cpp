#include "classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "errors.hpp"

namespace cpcseq::model {

FreezePolicy freeze_policy_from_string(const std::string& s) {
  if (s == "enc_le1") return FreezePolicy::EncLe1;
  if (s == "enc_le2") return FreezePolicy::EncLe2;
  if (s == "enc_le3") return FreezePolicy::EncLe3;
  if (s == "enc_le3_plus_gar") return FreezePolicy::EncLe3PlusGar;
  if (s == "none") return FreezePolicy::None;
  throw UsageError("unknown freeze policy '" + s + "'");
}

std::string to_string(FreezePolicy p) {
  switch (p) {
    case FreezePolicy::EncLe1: return "enc_le1";
    case FreezePolicy::EncLe2: return "enc_le2";
    case FreezePolicy::EncLe3: return "enc_le3";
    case FreezePolicy::EncLe3PlusGar: return "enc_le3_plus_gar";
    case FreezePolicy::None: return "none";
  }
  return "?";
}

double scheduled_lr(double base, double decay, int every, int epoch) {
  return base * std::pow(decay, static_cast<double>(epoch / every));
}

ClassifierHead ClassifierHead::make(int feature_dim, int num_classes, Rng& rng) {
  if (num_classes < 1) throw UsageError("classifier: need at least one class");
  ClassifierHead h;
  h.num_classes = num_classes;
  h.l1 = nn::Linear::make("clf.layer1", feature_dim, 256, rng);
  h.bn1 = nn::BatchNorm::make("clf.bn1", 256);
  h.l2 = nn::Linear::make("clf.layer2", 256, 128, rng);
  h.bn2 = nn::BatchNorm::make("clf.bn2", 128);
  h.l3 = nn::Linear::make("clf.layer3", 128, num_classes, rng);
  return h;
}

Var ClassifierHead::forward(Tape& t, Var x, bool train, Rng* rng) {
  Var h = l1.forward(t, x);
  h = bn1.forward(t, h, train);
  h = t.relu(h);
  h = nn::dropout(t, h, dropout_p, train, rng);
  h = l2.forward(t, h);
  h = bn2.forward(t, h, train);
  h = t.relu(h);
  h = nn::dropout(t, h, dropout_p, train, rng);
  return l3.forward(t, h);
}

std::vector<Parameter*> ClassifierHead::params() {
  std::vector<Parameter*> out;
  for (auto* p : l1.params()) out.push_back(p);
  for (auto* p : bn1.params()) out.push_back(p);
  for (auto* p : l2.params()) out.push_back(p);
  for (auto* p : bn2.params()) out.push_back(p);
  for (auto* p : l3.params()) out.push_back(p);
  return out;
}

namespace {

int frozen_encoder_layers(FreezePolicy p, int encoder_layers) {
  int n = 0;
  switch (p) {
    case FreezePolicy::EncLe1: n = 1; break;
    case FreezePolicy::EncLe2: n = 2; break;
    case FreezePolicy::EncLe3: n = 3; break;
    case FreezePolicy::EncLe3PlusGar: n = encoder_layers; break;
    case FreezePolicy::None: n = 0; break;
  }
  if (n > encoder_layers)
    throw UsageError("freeze policy " + to_string(p) + " needs " + std::to_string(n) +
                     " encoder layers, model has " + std::to_string(encoder_layers));
  return n;
}

}  // namespace

Backbone Backbone::random(const ModelConfig& cfg, FreezePolicy policy, Rng& rng) {
  Backbone bb;
  bb.config = cfg;
  bb.policy = policy;
  bb.encoder = Encoder::make(cfg.spec, cfg.in_channels, rng);
  bb.gar = nn::GruStack::make("gar", cfg.spec.latent_dim(), cfg.dims.context, cfg.dims.gar_layers,
                              cfg.dims.gar_dropout, rng);
  const int frozen = frozen_encoder_layers(policy, cfg.spec.num_layers());
  for (int i = 0; i < frozen; ++i)
    for (auto* p : bb.encoder.layer_params(i)) p->trainable = false;
  if (policy == FreezePolicy::EncLe3PlusGar)
    for (auto* p : bb.gar.params()) p->trainable = false;
  return bb;
}

Backbone Backbone::from_checkpoint(const Checkpoint& ck, FreezePolicy policy, Rng& rng) {
  ModelConfig cfg = ModelConfig::from_json(ck.config.at("model"));
  Backbone bb = Backbone::random(cfg, policy, rng);
  const int frozen = frozen_encoder_layers(policy, cfg.spec.num_layers());
  for (int i = 0; i < frozen; ++i)
    for (auto* p : bb.encoder.layer_params(i)) ck.fill(*p);
  if (policy == FreezePolicy::EncLe3PlusGar)
    for (auto* p : bb.gar.params()) ck.fill(*p);
  return bb;
}

Var Backbone::features(Tape& t, const Mat& stacked, int batch, int len, bool train, Rng* rng) {
  const int frozen = frozen_encoder_layers(policy, config.spec.num_layers());
  // dropout stays off inside frozen layers so frozen features are pure
  std::vector<Var> latents =
      encoder.forward(t, t.constant(stacked), batch, len, train, rng, frozen);
  const bool gar_train = train && policy != FreezePolicy::EncLe3PlusGar;
  return gar.forward_final(t, latents, gar_train, rng);
}

std::vector<Parameter*> Backbone::params() {
  std::vector<Parameter*> out = encoder.params();
  for (auto* p : gar.params()) out.push_back(p);
  return out;
}

std::vector<Parameter*> Backbone::trainable_params() {
  std::vector<Parameter*> out;
  for (auto* p : params())
    if (p->trainable) out.push_back(p);
  return out;
}

Mat extract_features(Backbone& bb, const data::WindowDataset& ds, int batch_size) {
  if (ds.size() == 0) throw DataError("extract_features: empty dataset");
  const int len = ds.window_len();
  Mat out(static_cast<long>(ds.size()), bb.config.dims.context);
  for (std::size_t at = 0; at < ds.size(); at += static_cast<std::size_t>(batch_size)) {
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(batch_size),
                                                   ds.size() - at);
    std::vector<std::size_t> idx(take);
    std::iota(idx.begin(), idx.end(), at);
    Tape t;
    Mat stacked = stack_windows(ds.windows, idx);
    Var c = bb.features(t, stacked, static_cast<int>(take), len, /*train=*/false, nullptr);
    out.middleRows(static_cast<long>(at), static_cast<long>(take)) = t.value(c);
  }
  return out;
}

int argmax_class(const Eigen::RowVectorXd& logits) {
  int best = 0;
  for (int j = 1; j < logits.size(); ++j)
    if (logits(j) > logits(best)) best = j;
  return best;
}

namespace {

struct FeatureCache {
  bool active = false;
  Mat train_features;  // [N x F], only when the backbone is fully frozen
  Mat val_features;
};

std::vector<int> predict_from_logits(const Mat& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (long i = 0; i < logits.rows(); ++i)
    out[static_cast<std::size_t>(i)] = argmax_class(logits.row(i));
  return out;
}

}  // namespace

TrainClassifierResult train_classifier(Backbone& bb, ClassifierHead& head,
                                       const data::WindowDataset& train,
                                       const data::WindowDataset& val, const FinetuneConfig& cfg,
                                       const ClassifierEpochCallback& on_epoch) {
  if (train.size() == 0) throw DataError("train_classifier: empty labeled set");
  for (std::size_t i = 0; i < train.size(); ++i)
    if (train.labels[i] < 0 || train.labels[i] >= head.num_classes)
      throw DataError("train_classifier: label out of range at window " + std::to_string(i));

  const int len = train.window_len();
  FeatureCache cache;
  if (bb.fully_frozen()) {
    cache.active = true;
    cache.train_features = extract_features(bb, train);
    if (val.size() > 0) cache.val_features = extract_features(bb, val);
  }

  std::vector<Parameter*> opt_params = head.params();
  for (auto* p : bb.trainable_params()) opt_params.push_back(p);
  nn::Adam opt(opt_params, cfg.learning_rate);

  Rng shuffle_rng(static_cast<std::uint64_t>(cfg.seed));
  Rng dropout_rng(static_cast<std::uint64_t>(cfg.seed) ^ 0xa0761d6478bd642fULL);

  auto eval_dataset = [&](const data::WindowDataset& ds, const Mat* cached) {
    Mat feats = cached && cache.active ? *cached : extract_features(bb, ds);
    Tape t;
    Var logits = head.forward(t, t.constant(feats), /*train=*/false, nullptr);
    return predict_from_logits(t.value(logits));
  };

  TrainClassifierResult res;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.set_lr(scheduled_lr(cfg.learning_rate, cfg.decay_factor, cfg.decay_every, epoch));

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    long used_batches = 0;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t take =
          std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), order.size() - at);
      if (take < 2) break;  // batch norm needs at least one pair
      std::vector<std::size_t> idx(order.begin() + static_cast<long>(at),
                                   order.begin() + static_cast<long>(at + take));
      std::vector<int> labels;
      labels.reserve(take);
      for (std::size_t i : idx) labels.push_back(train.labels[i]);

      Tape t;
      Var feats;
      if (cache.active) {
        Mat f(static_cast<long>(take), cache.train_features.cols());
        for (std::size_t i = 0; i < take; ++i)
          f.row(static_cast<long>(i)) = cache.train_features.row(static_cast<long>(idx[i]));
        feats = t.constant(std::move(f));
      } else {
        Mat stacked = stack_windows(train.windows, idx);
        feats = bb.features(t, stacked, static_cast<int>(take), len, /*train=*/true, &dropout_rng);
      }
      Var logits = head.forward(t, feats, /*train=*/true, &dropout_rng);
      Var loss = t.cross_entropy(logits, labels);
      const double lv = t.value(loss)(0, 0);
      if (!std::isfinite(lv)) {
        if (on_epoch) on_epoch(epoch, lv, -1.0);
        throw NumericError("train_classifier: non-finite loss at epoch " + std::to_string(epoch));
      }
      epoch_loss += lv;
      ++used_batches;
      opt.zero_grad();
      t.backward(loss);
      opt.step();
    }
    if (used_batches == 0)
      throw DataError("train_classifier: no usable batches (need at least 2 labeled windows)");
    res.epoch_train_loss.push_back(epoch_loss / static_cast<double>(used_batches));

    double val_f1 = -1.0;
    if (cfg.track_val_history && val.size() > 0) {
      auto preds = eval_dataset(val, &cache.val_features);
      val_f1 = eval::compute_metrics(val.labels, preds, head.num_classes).mean_f1;
      res.epoch_val_f1.push_back(val_f1);
    }
    if (on_epoch) on_epoch(epoch, res.epoch_train_loss.back(), val_f1);
  }

  if (val.size() > 0) {
    auto preds = eval_dataset(val, &cache.val_features);
    res.val_metrics = eval::compute_metrics(val.labels, preds, head.num_classes);
  }
  return res;
}

std::vector<int> predict(Backbone& bb, ClassifierHead& head, const data::WindowDataset& ds) {
  Mat feats = extract_features(bb, ds);
  Tape t;
  Var logits = head.forward(t, t.constant(feats), /*train=*/false, nullptr);
  return predict_from_logits(t.value(logits));
}

}  // namespace cpcseq::model
