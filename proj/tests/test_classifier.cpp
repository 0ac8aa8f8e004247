#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cmath>
#include <cstdint>

#include "classifier.hpp"
#include "errors.hpp"
#include "rng.hpp"
#include "synthetic.hpp"
#include "util.hpp"

using namespace cpcseq;
using namespace cpcseq::model;
using nn::Mat;

int main(int argc, char** argv) {
  tune_allocator();
  return doctest::Context(argc, argv).run();
}

namespace {

std::uint64_t fnv1a(const Mat& m) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
  for (std::size_t i = 0; i < static_cast<std::size_t>(m.size()) * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.spec.family = EncoderFamily::Conv1d;
  cfg.spec.layer_widths = {2, 3, 4};
  cfg.spec.kernel_size = 3;
  cfg.in_channels = 6;
  cfg.k_horizon = 4;
  cfg.window_len = 30;
  cfg.dims.context = 8;
  cfg.dims.latent = 4;
  return cfg;
}

Checkpoint tiny_checkpoint(long seed) {
  ModelConfig cfg = tiny_config();
  Rng rng(static_cast<std::uint64_t>(seed));
  CpcModel m = CpcModel::make(cfg.spec, cfg.in_channels, cfg.k_horizon, rng, cfg.dims);
  nlohmann::json j;
  j["model"] = cfg.to_json();
  return checkpoint_from_params(m.params(), j);
}

data::WindowDataset small_labeled_dataset(long seed, int subjects = 2, double seconds = 20) {
  data::SyntheticConfig cfg;
  cfg.num_subjects = subjects;
  cfg.duration_s = seconds;
  cfg.num_classes = 3;
  cfg.seed = seed;
  return data::segment_windows(data::generate_synthetic(cfg), 1.0, 0.5);
}

}  // namespace

TEST_CASE("learning rate schedule") {
  CHECK(scheduled_lr(5e-4, 0.8, 25, 0) == 5e-4);
  CHECK(scheduled_lr(5e-4, 0.8, 25, 24) == 5e-4);
  CHECK(scheduled_lr(5e-4, 0.8, 25, 25) == doctest::Approx(4e-4));
  CHECK(scheduled_lr(5e-4, 0.8, 25, 149) == doctest::Approx(5e-4 * 0.32768));
  CHECK(std::pow(0.8, 5) == doctest::Approx(0.32768));
}

TEST_CASE("trainable parameters under full freezing are exactly the head") {
  Rng rng(1);
  ModelConfig cfg = tiny_config();
  cfg.dims.context = 256;  // production head sizes
  Checkpoint ck;
  {
    Rng r(7);
    CpcModel m = CpcModel::make(cfg.spec, cfg.in_channels, cfg.k_horizon, r, cfg.dims);
    nlohmann::json j;
    j["model"] = cfg.to_json();
    ck = checkpoint_from_params(m.params(), j);
  }
  Backbone bb = Backbone::from_checkpoint(ck, FreezePolicy::EncLe3PlusGar, rng);
  CHECK(bb.trainable_params().empty());

  const int num_classes = 11;
  ClassifierHead head = ClassifierHead::make(256, num_classes, rng);
  long trainable = 0;
  for (auto* p : head.params())
    if (p->trainable) trainable += p->value.size();
  const long expected = (256 * 256 + 256) + 2 * 256 + (256 * 128 + 128) + 2 * 128 +
                        (128 * num_classes + num_classes);
  CHECK(trainable == expected);
}

TEST_CASE("argmax prediction rules") {
  Eigen::RowVectorXd v(3);
  v << 0.1, 0.9, 0.9;
  CHECK(argmax_class(v) == 1);  // tie between 1 and 2 -> lowest index
  Eigen::RowVectorXd equal = Eigen::RowVectorXd::Zero(4);
  CHECK(argmax_class(equal) == 0);
  Eigen::RowVectorXd two(2);
  two << 0.1, 0.9;
  CHECK(argmax_class(two) == 1);
  // softmax shift invariance
  Eigen::RowVectorXd shifted = v.array() + 123.0;
  CHECK(argmax_class(shifted) == argmax_class(v));
}

TEST_CASE("fully frozen features are pure and sensitive to the final timestep") {
  Rng rng(3);
  Checkpoint ck = tiny_checkpoint(5);
  Backbone bb = Backbone::from_checkpoint(ck, FreezePolicy::EncLe3PlusGar, rng);
  data::WindowDataset ds = small_labeled_dataset(9, 1, 10);
  REQUIRE(ds.size() >= 2);

  Mat a = extract_features(bb, ds);
  Mat b = extract_features(bb, ds);
  CHECK(a == b);
  CHECK(a.rows() == static_cast<long>(ds.size()));
  CHECK(a.cols() == 8);
  CHECK(a.allFinite());

  data::WindowDataset perturbed = ds;
  perturbed.windows[0].row(perturbed.windows[0].rows() - 1).array() += 0.5;
  Mat c = extract_features(bb, perturbed);
  CHECK(c.row(0) != a.row(0));
  CHECK(c.row(1) == a.row(1));
}

TEST_CASE("frozen tensors stay bit-identical through training") {
  Rng rng(4);
  Checkpoint ck = tiny_checkpoint(6);
  data::WindowDataset train = small_labeled_dataset(10);
  data::WindowDataset val = small_labeled_dataset(11, 1, 10);

  for (auto policy : {FreezePolicy::EncLe2, FreezePolicy::EncLe3PlusGar}) {
    CAPTURE(to_string(policy));
    Backbone bb = Backbone::from_checkpoint(ck, policy, rng);
    ClassifierHead head = ClassifierHead::make(8, 3, rng);

    std::vector<std::pair<std::string, std::uint64_t>> frozen_hashes;
    for (auto* p : bb.params())
      if (!p->trainable) frozen_hashes.emplace_back(p->name, fnv1a(p->value));
    REQUIRE(!frozen_hashes.empty());
    std::vector<std::uint64_t> trainable_before;
    for (auto* p : bb.trainable_params()) trainable_before.push_back(fnv1a(p->value));

    FinetuneConfig fcfg;
    fcfg.epochs = 3;
    fcfg.batch_size = 32;
    fcfg.learning_rate = 1e-3;
    train_classifier(bb, head, train, val, fcfg);

    std::size_t i = 0;
    for (auto* p : bb.params())
      if (!p->trainable) {
        CHECK(fnv1a(p->value) == frozen_hashes[i].second);
        ++i;
      }
    // the trainable backbone part did move (when there is one)
    if (policy == FreezePolicy::EncLe2) {
      bool moved = false;
      std::size_t j = 0;
      for (auto* p : bb.trainable_params()) moved |= fnv1a(p->value) != trainable_before[j++];
      CHECK(moved);
    }
  }
}

TEST_CASE("zero learning rate leaves every trainable parameter untouched") {
  Rng rng(5);
  Checkpoint ck = tiny_checkpoint(7);
  Backbone bb = Backbone::from_checkpoint(ck, FreezePolicy::EncLe3PlusGar, rng);
  ClassifierHead head = ClassifierHead::make(8, 3, rng);
  data::WindowDataset train = small_labeled_dataset(12);
  data::WindowDataset val = small_labeled_dataset(13, 1, 10);

  std::vector<Mat> before;
  for (auto* p : head.params())
    if (p->trainable) before.push_back(p->value);

  FinetuneConfig fcfg;
  fcfg.learning_rate = 0.0;
  fcfg.epochs = 2;
  fcfg.batch_size = 16;
  auto res = train_classifier(bb, head, train, val, fcfg);

  std::size_t i = 0;
  for (auto* p : head.params())
    if (p->trainable) CHECK(p->value == before[i++]);

  // with the running batch-norm statistics rolled back, predictions match a
  // never-trained head exactly
  Rng rng2(5);
  Backbone bb2 = Backbone::from_checkpoint(ck, FreezePolicy::EncLe3PlusGar, rng2);
  ClassifierHead fresh = ClassifierHead::make(8, 3, rng2);
  head.bn1.running_mean.value = fresh.bn1.running_mean.value;
  head.bn1.running_var.value = fresh.bn1.running_var.value;
  head.bn2.running_mean.value = fresh.bn2.running_mean.value;
  head.bn2.running_var.value = fresh.bn2.running_var.value;
  CHECK(predict(bb, head, val) == predict(bb2, fresh, val));
}

TEST_CASE("single-class training degenerates to a constant predictor") {
  Rng rng(6);
  Checkpoint ck = tiny_checkpoint(8);
  Backbone bb = Backbone::from_checkpoint(ck, FreezePolicy::EncLe3PlusGar, rng);
  ClassifierHead head = ClassifierHead::make(8, 3, rng);

  data::WindowDataset all = small_labeled_dataset(14);
  data::WindowDataset single;
  single.num_classes = 3;
  single.sample_rate_hz = all.sample_rate_hz;
  for (std::size_t i = 0; i < all.size() && single.size() < 24; ++i) {
    if (all.labels[i] == 1) {
      single.windows.push_back(all.windows[i]);
      single.labels.push_back(1);
      single.subject_ids.push_back(all.subject_ids[i]);
    }
  }
  REQUIRE(single.size() >= 8);

  FinetuneConfig fcfg;
  fcfg.epochs = 40;
  fcfg.batch_size = 16;
  fcfg.learning_rate = 1e-3;
  auto res = train_classifier(bb, head, single, single, fcfg);
  auto preds = predict(bb, head, single);
  CHECK(std::all_of(preds.begin(), preds.end(), [](int p) { return p == 1; }));
  // one perfect class out of three absent-or-perfect classes
  CHECK(res.val_metrics.mean_f1 == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("end-to-end baseline equals the none policy with identical seeds") {
  ModelConfig cfg = tiny_config();
  data::WindowDataset train = small_labeled_dataset(15);
  data::WindowDataset val = small_labeled_dataset(16, 1, 10);
  FinetuneConfig fcfg;
  fcfg.epochs = 2;
  fcfg.batch_size = 32;
  fcfg.seed = 3;

  auto run = [&]() {
    Rng rng(static_cast<std::uint64_t>(fcfg.seed));
    Backbone bb = Backbone::random(cfg, FreezePolicy::None, rng);
    ClassifierHead head = ClassifierHead::make(cfg.dims.context, 3, rng);
    auto res = train_classifier(bb, head, train, val, fcfg);
    return std::pair(res.val_metrics.mean_f1, predict(bb, head, val));
  };
  auto [f1_a, preds_a] = run();
  auto [f1_b, preds_b] = run();
  CHECK(f1_a == f1_b);
  CHECK(preds_a == preds_b);
}

TEST_CASE("zero training epochs leave a chance-level head") {
  Rng rng(12);
  Checkpoint ck = tiny_checkpoint(21);
  Backbone bb = Backbone::from_checkpoint(ck, FreezePolicy::EncLe3PlusGar, rng);
  ClassifierHead head = ClassifierHead::make(8, 3, rng);
  data::WindowDataset ds = small_labeled_dataset(22);

  std::vector<Mat> before;
  for (auto* p : head.params()) before.push_back(p->value);
  FinetuneConfig fcfg;
  fcfg.epochs = 0;
  auto res = train_classifier(bb, head, ds, ds, fcfg);
  std::size_t i = 0;
  for (auto* p : head.params()) CHECK(p->value == before[i++]);
  CHECK(res.epoch_train_loss.empty());
  CHECK(res.val_metrics.mean_f1 < 0.67);  // untrained: chance-ish, not a fit
}

TEST_CASE("label and dataset validation") {
  Rng rng(8);
  Checkpoint ck = tiny_checkpoint(9);
  Backbone bb = Backbone::from_checkpoint(ck, FreezePolicy::EncLe3PlusGar, rng);
  ClassifierHead head = ClassifierHead::make(8, 2, rng);
  FinetuneConfig fcfg;
  fcfg.epochs = 1;

  data::WindowDataset empty;
  empty.num_classes = 2;
  CHECK_THROWS_AS(train_classifier(bb, head, empty, empty, fcfg), DataError);

  data::WindowDataset bad = small_labeled_dataset(17, 1, 10);  // labels in {0,1,2}, head has 2
  CHECK_THROWS_AS(train_classifier(bb, head, bad, bad, fcfg), DataError);
}

TEST_CASE("partial freeze policies reject too-shallow encoders") {
  ModelConfig cfg = tiny_config();
  cfg.spec.family = EncoderFamily::Recurrent;  // single layer
  Rng rng(9);
  CHECK_THROWS_AS(Backbone::random(cfg, FreezePolicy::EncLe2, rng), UsageError);
}
