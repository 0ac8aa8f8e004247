#include "sweeps.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "errors.hpp"
#include "pipeline.hpp"

namespace cpcseq::eval {

void SweepPoint::finalize() {
  if (per_seed_f1.empty()) return;
  std::vector<double> sorted = per_seed_f1;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  median = (n % 2 == 1) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  min = sorted.front();
  max = sorted.back();
  mean = 0.0;
  for (double v : sorted) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : sorted) var += (v - mean) * (v - mean);
  stddev = std::sqrt(var / static_cast<double>(n));
}

nlohmann::json SweepResult::to_json() const {
  nlohmann::json j;
  j["axis"] = axis;
  j["config"] = config;
  j["points"] = nlohmann::json::array();
  for (const auto& p : points) {
    nlohmann::json pj;
    pj["setting"] = p.setting;
    if (!p.group.empty()) pj["group"] = p.group;
    pj["seeds"] = p.seeds;
    pj["per_seed_mean_f1"] = p.per_seed_f1;
    pj["median"] = p.median;
    pj["mean"] = p.mean;
    pj["min"] = p.min;
    pj["max"] = p.max;
    pj["stddev"] = p.stddev;
    if (!p.extra.is_null()) pj["extra"] = p.extra;
    j["points"].push_back(std::move(pj));
  }
  return j;
}

std::string SweepResult::to_csv() const {
  std::ostringstream out;
  out << "axis,setting,group,seed,mean_f1\n";
  out.precision(10);
  for (const auto& p : points)
    for (std::size_t i = 0; i < p.seeds.size(); ++i)
      out << axis << ',' << p.setting << ',' << (p.group.empty() ? "-" : p.group) << ','
          << p.seeds[i] << ',' << p.per_seed_f1[i] << '\n';
  return out.str();
}

void run_tasks(std::vector<std::function<void()>> tasks, int threads) {
  threads = std::max(1, threads);
  if (threads == 1 || tasks.size() <= 1) {
    for (auto& t : tasks) t();
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      tasks[i]();
    }
  };
  std::vector<std::thread> pool;
  const int n = std::min<int>(threads, static_cast<int>(tasks.size()));
  pool.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

namespace {

model::ModelConfig config_of(const model::Checkpoint& ck) {
  return model::ModelConfig::from_json(ck.config.at("model"));
}

data::WindowDataset budget_subset(const data::WindowDataset& train, int labels_per_class,
                                  long seed) {
  data::WindowDataset labeled = data::drop_unlabeled(train);
  if (labels_per_class <= 0) return labeled;
  return data::sample_labeled_subset(labeled, labels_per_class, seed);
}

}  // namespace

ClassificationRun run_classification(const model::Checkpoint& ck, BackboneSource source,
                                     model::FreezePolicy policy, const SweepData& data,
                                     int labels_per_class, long seed,
                                     const model::FinetuneConfig& base_cfg,
                                     const std::vector<double>& lr_grid) {
  const model::ModelConfig mc = config_of(ck);
  data::WindowDataset train = budget_subset(data.train, labels_per_class, seed);
  data::WindowDataset val = data::drop_unlabeled(data.val);
  data::WindowDataset test = data::drop_unlabeled(data.test);
  if (train.size() == 0) throw DataError("run_classification: no labeled training windows");
  const int num_classes = train.num_classes;

  std::vector<double> lrs = lr_grid.empty() ? std::vector<double>{base_cfg.learning_rate} : lr_grid;

  ClassificationRun best;
  double best_val = -1.0;
  bool have_result = false;
  for (double lr : lrs) {
    Rng init_rng(static_cast<std::uint64_t>(seed));
    model::Backbone bb = [&]() {
      switch (source) {
        case BackboneSource::PretrainedCheckpoint:
          return model::Backbone::from_checkpoint(ck, policy, init_rng);
        case BackboneSource::RandomFrozen:
          return model::Backbone::random(mc, model::FreezePolicy::EncLe3PlusGar, init_rng);
        case BackboneSource::EndToEnd:
          return model::Backbone::random(mc, model::FreezePolicy::None, init_rng);
      }
      throw UsageError("unreachable backbone source");
    }();
    model::ClassifierHead head = model::ClassifierHead::make(mc.dims.context, num_classes, init_rng);

    model::FinetuneConfig cfg = base_cfg;
    cfg.learning_rate = lr;
    cfg.seed = seed;
    auto trained = model::train_classifier(bb, head, train, val, cfg);

    const double val_f1 = val.size() > 0 ? trained.val_metrics.mean_f1 : 0.0;
    if (!have_result || val_f1 > best_val) {
      have_result = true;
      best_val = val_f1;
      best.chosen_lr = lr;
      auto preds = model::predict(bb, head, test);
      best.test_metrics = compute_metrics(test.labels, preds, num_classes);
      best.test_f1 = best.test_metrics.mean_f1;
    }
  }
  return best;
}

SweepResult semi_supervised_sweep(const model::Checkpoint& ck, const SweepData& data,
                                  const SemiSupervisedOptions& opt) {
  if (opt.budgets.empty()) throw UsageError("semi_supervised_sweep: empty budget list");
  std::vector<int> budgets = opt.budgets;
  std::sort(budgets.begin(), budgets.end());

  std::vector<std::string> groups{"cpc"};
  if (opt.include_random_control) groups.push_back("random");
  if (opt.include_end_to_end) groups.push_back("end_to_end");

  SweepResult res;
  res.axis = "labels_per_class";
  for (int b : budgets)
    for (const auto& g : groups) {
      SweepPoint p;
      p.setting = std::to_string(b);
      p.group = g;
      p.seeds = opt.seeds;
      p.per_seed_f1.assign(opt.seeds.size(), 0.0);
      res.points.push_back(std::move(p));
    }

  std::vector<std::function<void()>> tasks;
  for (std::size_t pi = 0; pi < res.points.size(); ++pi) {
    const int budget = std::stoi(res.points[pi].setting);
    for (std::size_t si = 0; si < opt.seeds.size(); ++si) {
      tasks.push_back([&, pi, budget, si]() {
        SweepPoint& point = res.points[pi];
        BackboneSource src = point.group == "cpc"       ? BackboneSource::PretrainedCheckpoint
                             : point.group == "random"  ? BackboneSource::RandomFrozen
                                                        : BackboneSource::EndToEnd;
        auto run = run_classification(ck, src, model::FreezePolicy::EncLe3PlusGar, data, budget,
                                      opt.seeds[si], opt.finetune, opt.lr_grid);
        point.per_seed_f1[si] = run.test_f1;
      });
    }
  }
  run_tasks(std::move(tasks), opt.threads);
  for (auto& p : res.points) p.finalize();
  return res;
}

namespace {

// Pretrain a model on the sweep's train split and return it as a checkpoint.
model::Checkpoint pretrain_checkpoint(const SweepData& data, const model::EncoderSpec& spec,
                                      const model::PretrainConfig& base, long seed) {
  model::PretrainConfig cfg = base;
  cfg.seed = seed;
  Rng rng(static_cast<std::uint64_t>(seed));
  model::CpcModel m = model::CpcModel::make(spec, data.train.num_channels(), cfg.k_horizon, rng,
                                            cfg.dims);
  auto result = model::pretrain(m, cfg, data.train, data.val);

  model::ModelConfig mc;
  mc.spec = spec;
  mc.in_channels = data.train.num_channels();
  mc.k_horizon = cfg.k_horizon;
  mc.window_len = data.train.window_len();
  mc.dims = m.dims;
  nlohmann::json j;
  j["model"] = mc.to_json();
  j["pretrain"] = {{"seed", seed},
                   {"epochs", cfg.epochs},
                   {"learning_rate", cfg.learning_rate},
                   {"batch_size", cfg.batch_size},
                   {"best_epoch", result.best_epoch}};
  return model::checkpoint_from_params(m.params(), j);
}

std::string encoder_label(const model::EncoderSpec& s) {
  switch (s.family) {
    case model::EncoderFamily::FullyConnected: return "fc";
    case model::EncoderFamily::Conv1d: return "conv_k" + std::to_string(s.kernel_size);
    case model::EncoderFamily::Recurrent: return to_string(s.cell);
  }
  return "?";
}

}  // namespace

SweepResult ablation_encoders(const SweepData& data, const EncoderAblationOptions& opt) {
  std::vector<model::EncoderSpec> specs = opt.specs;
  if (specs.empty()) {
    model::EncoderSpec fc;
    fc.family = model::EncoderFamily::FullyConnected;
    specs.push_back(fc);
    for (int k : {3, 5, 7, 9}) {
      model::EncoderSpec c;
      c.family = model::EncoderFamily::Conv1d;
      c.kernel_size = k;
      specs.push_back(c);
    }
    model::EncoderSpec r;
    r.family = model::EncoderFamily::Recurrent;
    r.cell = model::RnnCell::Lstm;
    specs.push_back(r);
    r.cell = model::RnnCell::Gru;
    specs.push_back(r);
  }
  for (auto& s : specs) s.validate();

  SweepResult res;
  res.axis = "encoder_spec";
  for (const auto& s : specs) {
    SweepPoint p;
    p.setting = encoder_label(s);
    p.seeds = opt.seeds;
    p.per_seed_f1.assign(opt.seeds.size(), 0.0);
    p.extra["per_seed_step_accuracy"] =
        nlohmann::json::array_t(opt.seeds.size(), nlohmann::json());
    res.points.push_back(std::move(p));
  }

  std::vector<std::function<void()>> tasks;
  for (std::size_t pi = 0; pi < specs.size(); ++pi) {
    for (std::size_t si = 0; si < opt.seeds.size(); ++si) {
      tasks.push_back([&, pi, si]() {
        const long seed = opt.seeds[si];
        model::Checkpoint ck = pretrain_checkpoint(data, specs[pi], opt.pretrain, seed);

        // pretext accuracy per step on the test split
        Rng rng(static_cast<std::uint64_t>(seed));
        model::CpcModel probe = model::CpcModel::make(specs[pi], data.train.num_channels(),
                                                      opt.pretrain.k_horizon, rng,
                                                      opt.pretrain.dims);
        for (auto* p : probe.params()) ck.fill(*p);
        auto [loss, acc] = model::evaluate_pretext(probe, data.test, opt.pretrain.batch_size,
                                                   /*anchor_seed=*/seed ^ 0x5bf03635);
        res.points[pi].extra["per_seed_step_accuracy"][si] = acc;

        auto run = run_classification(ck, BackboneSource::PretrainedCheckpoint,
                                      model::FreezePolicy::EncLe3PlusGar, data,
                                      opt.labels_per_class, seed, opt.finetune);
        res.points[pi].per_seed_f1[si] = run.test_f1;
      });
    }
  }
  run_tasks(std::move(tasks), opt.threads);
  for (auto& p : res.points) p.finalize();
  return res;
}

SweepResult ablation_horizon(const SweepData& data, const HorizonAblationOptions& opt) {
  const int len = data.train.window_len();
  for (int k : opt.k_values)
    if (len - k < 1)
      throw DataError("ablation_horizon: K=" + std::to_string(k) +
                      " leaves no context for windows of " + std::to_string(len) + " steps");

  SweepResult res;
  res.axis = "k_horizon";
  std::vector<int> ks = opt.k_values;
  std::sort(ks.begin(), ks.end());
  for (int k : ks) {
    SweepPoint p;
    p.setting = std::to_string(k);
    p.seeds = opt.seeds;
    p.per_seed_f1.assign(opt.seeds.size(), 0.0);
    res.points.push_back(std::move(p));
  }

  std::vector<std::function<void()>> tasks;
  for (std::size_t pi = 0; pi < ks.size(); ++pi) {
    for (std::size_t si = 0; si < opt.seeds.size(); ++si) {
      tasks.push_back([&, pi, si]() {
        const long seed = opt.seeds[si];
        model::PretrainConfig pcfg = opt.pretrain;
        pcfg.k_horizon = ks[pi];
        model::Checkpoint ck = pretrain_checkpoint(data, opt.encoder, pcfg, seed);
        auto run = run_classification(ck, BackboneSource::PretrainedCheckpoint,
                                      model::FreezePolicy::EncLe3PlusGar, data,
                                      opt.labels_per_class, seed, opt.finetune);
        res.points[pi].per_seed_f1[si] = run.test_f1;
      });
    }
  }
  run_tasks(std::move(tasks), opt.threads);
  for (auto& p : res.points) p.finalize();
  return res;
}

SweepResult ablation_freeze(const model::Checkpoint& ck, const SweepData& data,
                            const FreezeAblationOptions& opt) {
  SweepResult res;
  res.axis = "freeze_policy";
  for (auto policy : opt.policies) {
    SweepPoint p;
    p.setting = to_string(policy);
    p.seeds = opt.seeds;
    p.per_seed_f1.assign(opt.seeds.size(), 0.0);
    p.extra["per_seed_confusion"] = nlohmann::json::array_t(opt.seeds.size(), nlohmann::json());
    res.points.push_back(std::move(p));
  }

  std::vector<std::function<void()>> tasks;
  for (std::size_t pi = 0; pi < opt.policies.size(); ++pi) {
    for (std::size_t si = 0; si < opt.seeds.size(); ++si) {
      tasks.push_back([&, pi, si]() {
        const auto policy = opt.policies[pi];
        const auto src = policy == model::FreezePolicy::None ? BackboneSource::EndToEnd
                                                             : BackboneSource::PretrainedCheckpoint;
        auto run = run_classification(ck, src, policy, data, opt.labels_per_class, opt.seeds[si],
                                      opt.finetune);
        res.points[pi].per_seed_f1[si] = run.test_f1;
        res.points[pi].extra["per_seed_confusion"][si] = run.test_metrics.confusion;
      });
    }
  }
  run_tasks(std::move(tasks), opt.threads);
  for (auto& p : res.points) p.finalize();
  return res;
}

}  // namespace cpcseq::eval
