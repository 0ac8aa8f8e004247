#include "cpc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "errors.hpp"

namespace cpcseq::model {

CpcModel CpcModel::make(const EncoderSpec& spec, int in_channels, int k_horizon, Rng& rng,
                        CpcDims dims) {
  if (k_horizon < 1) throw UsageError("cpc: K must be positive");
  CpcModel m;
  m.dims = dims;
  m.dims.latent = spec.latent_dim();
  m.k_horizon = k_horizon;
  m.encoder = Encoder::make(spec, in_channels, rng);
  m.gar = nn::GruStack::make("gar", m.dims.latent, m.dims.context, m.dims.gar_layers,
                             m.dims.gar_dropout, rng);
  for (int j = 1; j <= k_horizon; ++j)
    m.heads.push_back(
        nn::Linear::make("head" + std::to_string(j), m.dims.context, m.dims.latent, rng));
  return m;
}

std::vector<Parameter*> CpcModel::params() {
  std::vector<Parameter*> out = encoder.params();
  for (auto* p : gar.params()) out.push_back(p);
  for (auto& h : heads)
    for (auto* p : h.params()) out.push_back(p);
  return out;
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json j;
  j["encoder"] = spec.to_json();
  j["in_channels"] = in_channels;
  j["k"] = k_horizon;
  j["window_len"] = window_len;
  j["latent_dim"] = dims.latent;
  j["context_dim"] = dims.context;
  j["gar_layers"] = dims.gar_layers;
  j["gar_dropout"] = dims.gar_dropout;
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.spec = EncoderSpec::from_json(j.at("encoder"));
  c.in_channels = j.at("in_channels").get<int>();
  c.k_horizon = j.at("k").get<int>();
  c.window_len = j.at("window_len").get<int>();
  c.dims.latent = j.at("latent_dim").get<int>();
  c.dims.context = j.at("context_dim").get<int>();
  c.dims.gar_layers = j.at("gar_layers").get<int>();
  c.dims.gar_dropout = j.at("gar_dropout").get<double>();
  return c;
}

int sample_anchor(int len, int k_horizon, Rng& rng) {
  const int hi = len - k_horizon;  // support is [0, hi-1]
  if (hi < 1)
    throw DataError("sample_anchor: window of " + std::to_string(len) +
                    " steps is too short for horizon K=" + std::to_string(k_horizon));
  return static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(hi)));
}

CpcForward cpc_forward(Tape& t, CpcModel& m, const Mat& stacked, int batch, int len, int anchor,
                       bool train, Rng* rng) {
  if (batch < 2) throw DataError("cpc_forward: need at least 2 windows for negatives");
  if (anchor < 0 || anchor + m.k_horizon >= len)
    throw DataError("cpc_forward: anchor t=" + std::to_string(anchor) + " out of range for T=" +
                    std::to_string(len) + ", K=" + std::to_string(m.k_horizon));

  Var input = t.constant(stacked);
  std::vector<Var> latents = m.encoder.forward(t, input, batch, len, train, rng);

  std::vector<Var> context_steps(latents.begin(), latents.begin() + anchor + 1);
  CpcForward out;
  out.context = m.gar.forward_final(t, context_steps, train, rng);

  std::vector<Var> step_losses;
  for (int j = 1; j <= m.k_horizon; ++j) {
    Var pred = m.heads[static_cast<std::size_t>(j - 1)].forward(t, out.context);  // [B x latent]
    Var logits = t.matmul_nt(pred, latents[static_cast<std::size_t>(anchor + j)]);  // [B x B]
    out.step_logits.push_back(logits);
    step_losses.push_back(t.infonce_step(logits));
  }
  Var sum = step_losses[0];
  for (std::size_t j = 1; j < step_losses.size(); ++j) sum = t.add(sum, step_losses[j]);
  out.loss = t.scale(sum, 1.0 / static_cast<double>(m.k_horizon));
  return out;
}

std::vector<double> pretext_accuracy(const std::vector<Mat>& logits) {
  std::vector<double> acc;
  acc.reserve(logits.size());
  for (const auto& L : logits) {
    const long b = L.rows();
    long hits = 0;
    for (long i = 0; i < b; ++i) {
      long best = 0;
      for (long j = 1; j < L.cols(); ++j)
        if (L(i, j) > L(i, best)) best = j;  // ties keep the lowest index
      if (best == i) ++hits;
    }
    acc.push_back(static_cast<double>(hits) / static_cast<double>(b));
  }
  return acc;
}

namespace {

struct BatchPlan {
  std::vector<std::vector<std::size_t>> batches;
};

// Seeded shuffle into fixed-size batches; a final partial batch is kept only
// if it still contains a negative (>= 2 windows).
BatchPlan make_batches(std::size_t n, int batch_size, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  BatchPlan plan;
  for (std::size_t at = 0; at < n; at += static_cast<std::size_t>(batch_size)) {
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(batch_size), n - at);
    if (take < 2) break;
    plan.batches.emplace_back(order.begin() + static_cast<long>(at),
                              order.begin() + static_cast<long>(at + take));
  }
  return plan;
}

}  // namespace

std::pair<double, std::vector<double>> evaluate_pretext(CpcModel& m, const data::WindowDataset& ds,
                                                        int batch_size, long anchor_seed) {
  Rng rng(static_cast<std::uint64_t>(anchor_seed));
  const int len = ds.window_len();
  double total_loss = 0.0;
  long batches = 0;
  std::vector<double> acc_sum(static_cast<std::size_t>(m.k_horizon), 0.0);

  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(batch_size)) {
    const std::size_t take =
        std::min<std::size_t>(static_cast<std::size_t>(batch_size), order.size() - at);
    if (take < 2) break;
    std::vector<std::size_t> idx(order.begin() + static_cast<long>(at),
                                 order.begin() + static_cast<long>(at + take));
    const int anchor = sample_anchor(len, m.k_horizon, rng);
    Tape tape;
    Mat stacked = stack_windows(ds.windows, idx);
    CpcForward fwd = cpc_forward(tape, m, stacked, static_cast<int>(take), len, anchor,
                                 /*train=*/false, nullptr);
    total_loss += tape.value(fwd.loss)(0, 0);
    std::vector<Mat> logit_values;
    for (Var v : fwd.step_logits) logit_values.push_back(tape.value(v));
    const auto acc = pretext_accuracy(logit_values);
    for (std::size_t j = 0; j < acc.size(); ++j) acc_sum[j] += acc[j];
    ++batches;
  }
  if (batches == 0) throw DataError("evaluate_pretext: dataset has fewer than 2 windows");
  for (auto& a : acc_sum) a /= static_cast<double>(batches);
  return {total_loss / static_cast<double>(batches), acc_sum};
}

PretrainResult pretrain(CpcModel& m, const PretrainConfig& cfg, const data::WindowDataset& train,
                        const data::WindowDataset& val, const EpochCallback& on_epoch) {
  if (train.size() < 2) throw DataError("pretrain: dataset smaller than one usable batch");
  if (cfg.batch_size < 2) throw DataError("pretrain: batch_size must be at least 2");
  const int len = train.window_len();
  if (len - cfg.k_horizon < 1)
    throw DataError("pretrain: window length " + std::to_string(len) +
                    " incompatible with K=" + std::to_string(cfg.k_horizon));

  nn::Adam opt(m.params(), cfg.learning_rate);
  Rng shuffle_rng(static_cast<std::uint64_t>(cfg.seed));
  Rng anchor_rng(static_cast<std::uint64_t>(cfg.seed) ^ 0x9e3779b97f4a7c15ULL);
  Rng dropout_rng(static_cast<std::uint64_t>(cfg.seed) ^ 0xc2b2ae3d27d4eb4fULL);
  const long val_anchor_seed = cfg.seed ^ 0x165667b1;

  PretrainResult res;
  std::vector<Mat> best_params;
  auto snapshot = [&]() {
    best_params.clear();
    for (auto* p : m.params()) best_params.push_back(p->value);
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    BatchPlan plan = make_batches(train.size(), cfg.batch_size, shuffle_rng);
    double epoch_loss = 0.0;
    for (const auto& idx : plan.batches) {
      const int anchor = sample_anchor(len, cfg.k_horizon, anchor_rng);
      Tape tape;
      Mat stacked = stack_windows(train.windows, idx);
      CpcForward fwd = cpc_forward(tape, m, stacked, static_cast<int>(idx.size()), len, anchor,
                                   /*train=*/true, &dropout_rng);
      const double loss = tape.value(fwd.loss)(0, 0);
      if (!std::isfinite(loss)) {
        EpochStats aborted;
        aborted.epoch = epoch;
        aborted.train_loss = loss;
        res.history.push_back(aborted);
        if (on_epoch) on_epoch(aborted);
        throw NumericError("pretrain: non-finite loss at epoch " + std::to_string(epoch));
      }
      epoch_loss += loss;
      opt.zero_grad();
      tape.backward(fwd.loss);
      opt.step();
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = plan.batches.empty() ? 0.0 : epoch_loss / static_cast<double>(plan.batches.size());
    auto [vloss, vacc] = evaluate_pretext(m, val, cfg.batch_size, val_anchor_seed);
    stats.val_loss = vloss;
    stats.val_step_accuracy = vacc;
    res.history.push_back(stats);
    if (on_epoch) on_epoch(stats);

    if (res.best_epoch < 0 || vloss < res.best_val_loss) {
      res.best_epoch = epoch;
      res.best_val_loss = vloss;
      snapshot();
    }
  }

  if (res.best_epoch >= 0) {
    auto params = m.params();
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_params[i];
  }
  return res;
}

}  // namespace cpcseq::model
