#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cmath>

#include "cpc.hpp"
#include "errors.hpp"
#include "gradcheck.hpp"
#include "rng.hpp"
#include "synthetic.hpp"
#include "util.hpp"

using namespace cpcseq;
using namespace cpcseq::model;
using nn::Mat;
using nn::Tape;
using nn::Var;

int main(int argc, char** argv) {
  tune_allocator();
  return doctest::Context(argc, argv).run();
}

namespace {

using MatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic>;

Mat random_mat(long r, long c, Rng& rng) {
  Mat m(r, c);
  for (long i = 0; i < r; ++i)
    for (long j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

// <= 500 parameters for the finite-difference oracle
CpcDims tiny_dims() {
  CpcDims d;
  d.context = 4;
  d.gar_layers = 2;
  d.gar_dropout = 0.2;
  return d;
}

EncoderSpec tiny_spec(EncoderFamily family, RnnCell cell = RnnCell::Gru) {
  EncoderSpec s;
  s.family = family;
  s.layer_widths = {2, 3, 4};
  s.kernel_size = 3;
  s.cell = cell;
  s.hidden = 4;
  s.dropout_p = 0.2;
  return s;
}

long count_params(CpcModel& m) {
  long n = 0;
  for (auto* p : m.params()) n += p->value.size();
  return n;
}

}  // namespace

TEST_CASE("sample_anchor support and uniformity") {
  Rng rng(1);
  SUBCASE("T=30 K=12 covers 0..17 roughly uniformly") {
    std::vector<long> counts(18, 0);
    const int draws = 180000;
    for (int i = 0; i < draws; ++i) {
      int t = sample_anchor(30, 12, rng);
      REQUIRE(t >= 0);
      REQUIRE(t <= 17);
      ++counts[static_cast<std::size_t>(t)];
    }
    for (long c : counts)
      CHECK(std::abs(static_cast<double>(c) / draws - 1.0 / 18.0) < 0.005);
  }
  SUBCASE("T=30 K=16 bounds") {
    for (int i = 0; i < 2000; ++i) {
      int t = sample_anchor(30, 16, rng);
      CHECK(t >= 0);
      CHECK(t <= 13);
    }
  }
  SUBCASE("T=13 K=12 forces t=0") {
    for (int i = 0; i < 50; ++i) CHECK(sample_anchor(13, 12, rng) == 0);
  }
  SUBCASE("window too short for the horizon") {
    CHECK_THROWS_AS(sample_anchor(12, 12, rng), DataError);
    CHECK_THROWS_AS(sample_anchor(8, 12, rng), DataError);
  }
}

TEST_CASE("info_nce identities in both precisions") {
  SUBCASE("uniform logits give ln B") {
    std::vector<Mat> logits64{Mat::Zero(8, 8), Mat::Constant(8, 8, 3.5)};
    CHECK(std::abs(info_nce_value<double>(logits64) - std::log(8.0)) < 1e-12);
    std::vector<MatF> logits32{MatF::Zero(8, 8), MatF::Constant(8, 8, 3.5f)};
    CHECK(std::abs(static_cast<double>(info_nce_value<float>(logits32)) - std::log(8.0)) < 1e-6);
  }
  SUBCASE("saturated diagonal drives the loss to zero") {
    Mat l = Mat::Zero(8, 8);
    l.diagonal().setConstant(40.0);
    CHECK(info_nce_value<double>({l}) < 1e-10);
  }
  SUBCASE("mean aggregation over steps") {
    Mat uniform = Mat::Zero(8, 8);
    Mat saturated = Mat::Zero(8, 8);
    saturated.diagonal().setConstant(60.0);
    const double got = info_nce_value<double>({uniform, saturated});
    CHECK(got == doctest::Approx(std::log(8.0) / 2.0).epsilon(1e-12));
  }
  SUBCASE("adding a constant to one row leaves the loss unchanged") {
    Rng rng(5);
    Mat l = random_mat(6, 6, rng);
    const double base = info_nce_value<double>({l});
    Mat shifted = l;
    shifted.row(2).array() += 13.7;
    CHECK(info_nce_value<double>({shifted}) == doctest::Approx(base).epsilon(1e-12));
    auto acc_a = pretext_accuracy({l});
    auto acc_b = pretext_accuracy({shifted});
    CHECK(acc_a == acc_b);
  }
  SUBCASE("large finite logits stay finite") {
    Mat l = Mat::Constant(4, 4, 1e300);
    CHECK(std::isfinite(info_nce_value<double>({l})));
  }
  SUBCASE("non-square rejected") {
    std::vector<Mat> bad{Mat::Zero(3, 4)};
    CHECK_THROWS(info_nce_value<double>(bad));
  }
}

TEST_CASE("pretext accuracy") {
  SUBCASE("identity logits hit every diagonal") {
    std::vector<Mat> logits{Mat::Identity(8, 8), Mat::Identity(8, 8)};
    auto acc = pretext_accuracy(logits);
    REQUIRE(acc.size() == 2);
    CHECK(acc[0] == 1.0);
    CHECK(acc[1] == 1.0);
  }
  SUBCASE("strictly smallest diagonal never wins") {
    Rng rng(2);
    Mat l = random_mat(8, 8, rng).array() + 10.0;
    l.diagonal().setConstant(-100.0);
    CHECK(pretext_accuracy({l})[0] == 0.0);
  }
  SUBCASE("all-equal rows have no strict diagonal argmax") {
    Mat l = Mat::Zero(8, 8);
    auto acc = pretext_accuracy({l});
    // lowest-index tie break: only row 0 scores
    CHECK(acc[0] == doctest::Approx(1.0 / 8.0));
  }
  SUBCASE("random gaussian logits converge to chance level 1/B") {
    Rng rng(7);
    const int draws = 10000;
    double mean_acc = 0.0;
    for (int d = 0; d < draws; ++d) {
      Mat l = random_mat(8, 8, rng);
      mean_acc += pretext_accuracy({l})[0];
    }
    mean_acc /= draws;
    CHECK(std::abs(mean_acc - 0.125) < 0.01);
  }
}

TEST_CASE("cpc_forward contracts") {
  Rng rng(3);
  EncoderSpec spec = tiny_spec(EncoderFamily::Conv1d);
  CpcModel m = CpcModel::make(spec, 2, 2, rng, tiny_dims());
  const int B = 4, T = 8;
  Mat stacked = random_mat(B * T, 2, rng);

  SUBCASE("one square logits matrix per future step") {
    Tape t;
    auto fwd = cpc_forward(t, m, stacked, B, T, 3, false, nullptr);
    REQUIRE(fwd.step_logits.size() == 2);
    for (Var v : fwd.step_logits) {
      CHECK(t.value(v).rows() == B);
      CHECK(t.value(v).cols() == B);
    }
    CHECK(t.value(fwd.context).rows() == B);
    CHECK(t.value(fwd.context).cols() == 4);
  }
  SUBCASE("identical windows make every score equal: loss is ln B per step") {
    Mat one = random_mat(T, 2, rng);
    Mat same(B * T, 2);
    for (int b = 0; b < B; ++b) same.middleRows(b * T, T) = one;
    Tape t;
    auto fwd = cpc_forward(t, m, same, B, T, 3, false, nullptr);
    CHECK(t.value(fwd.loss)(0, 0) == doctest::Approx(std::log(B)).epsilon(1e-12));
    // negative-construction invariant: no row may have a strict diagonal argmax
    for (Var v : fwd.step_logits) {
      const Mat& L = t.value(v);
      for (int i = 0; i < B; ++i)
        for (int j = 0; j < B; ++j) CHECK(L(i, i) == doctest::Approx(L(i, j)).epsilon(1e-12));
    }
  }
  SUBCASE("zeroed heads give exactly ln B") {
    for (auto& h : m.heads) {
      h.w.value.setZero();
      h.b.value.setZero();
    }
    Tape t;
    auto fwd = cpc_forward(t, m, stacked, B, T, 3, false, nullptr);
    CHECK(t.value(fwd.loss)(0, 0) == doctest::Approx(std::log(B)).epsilon(1e-12));
  }
  SUBCASE("bad anchors and batch sizes rejected") {
    Tape t;
    CHECK_THROWS_AS(cpc_forward(t, m, stacked, B, T, 6, false, nullptr), DataError);  // 6+2 >= 8
    CHECK_THROWS_AS(cpc_forward(t, m, stacked, B, T, -1, false, nullptr), DataError);
    Mat single = random_mat(T, 2, rng);
    CHECK_THROWS_AS(cpc_forward(t, m, single, 1, T, 3, false, nullptr), DataError);
  }
}

TEST_CASE("backward identities") {
  Rng rng(4);
  EncoderSpec spec = tiny_spec(EncoderFamily::Conv1d);
  CpcModel m = CpcModel::make(spec, 2, 2, rng, tiny_dims());
  const int B = 3, T = 8;
  Mat stacked = random_mat(B * T, 2, rng);

  SUBCASE("head beyond the used horizon gets exactly zero gradient") {
    for (auto* p : m.params()) p->zero_grad();
    Tape t;
    auto fwd = cpc_forward(t, m, stacked, B, T, 3, false, nullptr);
    // loss over step 1 only; head2 never participates
    t.backward(t.infonce_step(fwd.step_logits[0]));
    CHECK(m.heads[1].w.grad.isZero(0.0));
    CHECK(m.heads[1].b.grad.isZero(0.0));
    CHECK(!m.heads[0].w.grad.isZero(0.0));
  }
  SUBCASE("doubling the loss doubles every gradient") {
    auto run = [&](double scale) {
      for (auto* p : m.params()) p->zero_grad();
      Tape t;
      auto fwd = cpc_forward(t, m, stacked, B, T, 3, false, nullptr);
      t.backward(t.scale(fwd.loss, scale));
      std::vector<Mat> grads;
      for (auto* p : m.params()) grads.push_back(p->grad);
      return grads;
    };
    auto g1 = run(1.0);
    auto g2 = run(2.0);
    for (std::size_t i = 0; i < g1.size(); ++i)
      CHECK((g2[i] - 2.0 * g1[i]).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("gradients match central finite differences for every encoder family") {
  const int B = 3, T = 8, K = 2;
  auto check_family = [&](EncoderSpec spec, const char* name) {
    CAPTURE(name);
    Rng rng(9);
    CpcModel m = CpcModel::make(spec, 2, K, rng, tiny_dims());
    REQUIRE(count_params(m) <= 500);
    Mat stacked = random_mat(B * T, 2, rng);
    const int anchor = 3;

    auto forward = [&]() {
      Tape t;
      auto fwd = cpc_forward(t, m, stacked, B, T, anchor, false, nullptr);
      return t.value(fwd.loss)(0, 0);
    };
    auto backward = [&]() {
      Tape t;
      auto fwd = cpc_forward(t, m, stacked, B, T, anchor, false, nullptr);
      t.backward(fwd.loss);
    };
    auto res = test::finite_difference_check(m.params(), forward, backward, 1e-6);
    CAPTURE(res.worst_entry);
    CHECK(res.max_rel_error < 1e-5);
  };

  check_family(tiny_spec(EncoderFamily::Conv1d), "conv1d");
  check_family(tiny_spec(EncoderFamily::FullyConnected), "fully_connected");
  check_family(tiny_spec(EncoderFamily::Recurrent, RnnCell::Gru), "gru");
  check_family(tiny_spec(EncoderFamily::Recurrent, RnnCell::Lstm), "lstm");
}

TEST_CASE("train-mode gradient with a pinned dropout stream") {
  const int B = 3, T = 8, K = 2;
  Rng rng(10);
  CpcModel m = CpcModel::make(tiny_spec(EncoderFamily::Conv1d), 2, K, rng, tiny_dims());
  Mat stacked = random_mat(B * T, 2, rng);

  auto forward = [&]() {
    Rng drop(123);
    Tape t;
    auto fwd = cpc_forward(t, m, stacked, B, T, 3, true, &drop);
    return t.value(fwd.loss)(0, 0);
  };
  auto backward = [&]() {
    Rng drop(123);
    Tape t;
    auto fwd = cpc_forward(t, m, stacked, B, T, 3, true, &drop);
    t.backward(fwd.loss);
  };
  auto res = test::finite_difference_check(m.params(), forward, backward, 1e-6);
  CHECK(res.max_rel_error < 1e-5);
}

TEST_CASE("pretrain") {
  data::SyntheticConfig scfg;
  scfg.num_subjects = 2;
  scfg.duration_s = 30;
  scfg.seed = 21;
  data::RecordingSet rs = data::generate_synthetic(scfg);
  data::WindowDataset all = data::segment_windows(rs, 1.0, 0.5);
  data::WindowDataset train, val;
  train = all;
  val = all;  // pretext validation may reuse windows; content irrelevant here

  SUBCASE("zero learning rate leaves parameters bit-identical") {
    Rng rng(31);
    CpcModel m = CpcModel::make(tiny_spec(EncoderFamily::Conv1d), 6, 4, rng, tiny_dims());
    std::vector<Mat> before;
    for (auto* p : m.params()) before.push_back(p->value);
    PretrainConfig cfg;
    cfg.k_horizon = 4;
    cfg.learning_rate = 0.0;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    cfg.seed = 1;
    pretrain(m, cfg, train, val);
    auto params = m.params();
    for (std::size_t i = 0; i < params.size(); ++i) CHECK(params[i]->value == before[i]);
  }

  SUBCASE("training reduces the loss for five different seeds") {
    for (long seed = 1; seed <= 5; ++seed) {
      Rng rng(100 + seed);
      CpcModel m = CpcModel::make(tiny_spec(EncoderFamily::Conv1d), 6, 4, rng, tiny_dims());
      PretrainConfig cfg;
      cfg.k_horizon = 4;
      cfg.learning_rate = 1e-3;
      cfg.epochs = 20;
      cfg.batch_size = 64;
      cfg.seed = seed;
      auto res = pretrain(m, cfg, train, val);
      REQUIRE(res.history.size() == 20);
      CHECK(res.history.back().train_loss < res.history.front().train_loss);
    }
  }

  SUBCASE("same config and seed give identical history and parameters") {
    auto run = [&]() {
      Rng rng(77);
      CpcModel m = CpcModel::make(tiny_spec(EncoderFamily::Recurrent), 6, 4, rng, tiny_dims());
      PretrainConfig cfg;
      cfg.k_horizon = 4;
      cfg.epochs = 3;
      cfg.batch_size = 32;
      cfg.seed = 5;
      auto res = pretrain(m, cfg, train, val);
      std::vector<Mat> values;
      for (auto* p : m.params()) values.push_back(p->value);
      return std::pair(res, values);
    };
    auto [res_a, params_a] = run();
    auto [res_b, params_b] = run();
    REQUIRE(res_a.history.size() == res_b.history.size());
    for (std::size_t e = 0; e < res_a.history.size(); ++e) {
      CHECK(res_a.history[e].train_loss == res_b.history[e].train_loss);
      CHECK(res_a.history[e].val_loss == res_b.history[e].val_loss);
      CHECK(res_a.history[e].val_step_accuracy == res_b.history[e].val_step_accuracy);
    }
    for (std::size_t i = 0; i < params_a.size(); ++i) CHECK(params_a[i] == params_b[i]);
    CHECK(res_a.best_epoch == res_b.best_epoch);
  }

  SUBCASE("non-finite loss aborts with the partial history preserved") {
    Rng rng(41);
    CpcModel m = CpcModel::make(tiny_spec(EncoderFamily::Conv1d), 6, 4, rng, tiny_dims());
    m.heads[0].w.value(0, 0) = std::numeric_limits<double>::quiet_NaN();
    PretrainConfig cfg;
    cfg.k_horizon = 4;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    int epochs_seen = 0;
    CHECK_THROWS_AS(
        pretrain(m, cfg, train, val, [&](const EpochStats&) { ++epochs_seen; }),
        NumericError);
    CHECK(epochs_seen == 1);  // the aborted epoch still reaches the callback
  }

  SUBCASE("window length incompatible with K") {
    Rng rng(43);
    CpcModel m = CpcModel::make(tiny_spec(EncoderFamily::Conv1d), 6, 30, rng, tiny_dims());
    PretrainConfig cfg;
    cfg.k_horizon = 30;
    CHECK_THROWS_AS(pretrain(m, cfg, train, val), DataError);
  }
}
