#include "runner.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "checkpoint.hpp"
#include "classifier.hpp"
#include "cpc.hpp"
#include "errors.hpp"
#include "pipeline.hpp"
#include "recording.hpp"
#include "report.hpp"
#include "sweeps.hpp"
#include "synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cpcseq::run {

namespace {

template <typename T>
T jget(const json& j, const char* key, T def) {
  if (!j.is_object() || !j.contains(key)) return def;
  return j.at(key).get<T>();
}

json jsec(const json& j, const char* key) {
  if (j.is_object() && j.contains(key)) return j.at(key);
  return json::object();
}

struct Log {
  std::ofstream file;
  explicit Log(const fs::path& path) : file(path) {}
  void line(const std::string& s) {
    file << s << '\n';
    file.flush();
    std::cout << s << std::endl;
  }
};

long global_seed(const json& cfg) { return jget<long>(cfg, "seed", 1); }

data::SyntheticConfig synth_config(const json& cfg, long seed) {
  const json s = jsec(jsec(cfg, "data"), "synthetic");
  data::SyntheticConfig sc;
  sc.num_subjects = jget<int>(s, "num_subjects", sc.num_subjects);
  sc.num_classes = jget<int>(s, "num_classes", sc.num_classes);
  sc.num_channels = jget<int>(s, "num_channels", sc.num_channels);
  sc.duration_s = jget<double>(s, "duration_s", sc.duration_s);
  sc.rate_hz = jget<double>(s, "rate_hz", sc.rate_hz);
  sc.noise_std = jget<double>(s, "noise_std", sc.noise_std);
  sc.seed = jget<long>(s, "seed", seed);
  sc.base_freqs = jget<std::vector<double>>(s, "base_freqs", {});
  return sc;
}

data::RecordingSet load_data(const json& cfg, Log& log) {
  const json d = jsec(cfg, "data");
  const std::string path = jget<std::string>(d, "path", "");
  if (!path.empty()) {
    log.line("loading recordings from " + path);
    return data::load_recordings(path);
  }
  if (d.contains("synthetic")) {
    log.line("generating synthetic recordings");
    return data::generate_synthetic(synth_config(cfg, global_seed(cfg)));
  }
  throw UsageError("config: no data source (set data.path or data.synthetic)");
}

struct Prepared {
  eval::SweepData sweep;
  data::SplitAssignment split;
  data::NormalizationStats stats;
  int window_len = 0;
  int channels = 0;
  int num_classes = 0;
};

Prepared prepare_data(const json& cfg, Log& log) {
  data::RecordingSet rs = load_data(cfg, log);
  const json pl = jsec(cfg, "pipeline");
  const double target_hz = jget<double>(pl, "target_hz", 30.0);
  const double window_seconds = jget<double>(pl, "window_seconds", 1.0);
  const double overlap = jget<double>(pl, "overlap_fraction", 0.5);

  bool needs_resample = false;
  for (const auto& r : rs.recordings)
    if (std::abs(r.sample_rate_hz - target_hz) > 1e-6 * target_hz) needs_resample = true;
  if (needs_resample) {
    log.line("resampling to " + std::to_string(target_hz) + " Hz");
    rs = data::resample(rs, target_hz);
  }

  const json sp = jsec(pl, "split");
  const std::string policy_name = jget<std::string>(sp, "policy", "fractional");
  data::SplitPolicy policy = policy_name == "fixed_list" ? data::SplitPolicy::FixedList
                                                         : data::SplitPolicy::Fractional;
  if (policy_name != "fixed_list" && policy_name != "fractional")
    throw UsageError("config: unknown split policy '" + policy_name + "'");
  std::optional<data::FixedSplitLists> lists;
  if (policy == data::SplitPolicy::FixedList && sp.contains("train")) {
    data::FixedSplitLists fl;
    fl.train = sp.at("train").get<std::vector<std::string>>();
    fl.val = sp.at("val").get<std::vector<std::string>>();
    fl.test = sp.at("test").get<std::vector<std::string>>();
    lists = fl;
  }
  Prepared out;
  out.split = data::split_by_subject(rs, policy, jget<long>(sp, "seed", global_seed(cfg)), lists);
  log.line("split: train " + std::to_string(out.split.train.size()) + ", val " +
           std::to_string(out.split.val.size()) + ", test " +
           std::to_string(out.split.test.size()) + " subjects");

  data::RecordingSet train_rs = data::select_subjects(rs, out.split.train);
  out.stats = data::fit_normalization(train_rs);

  std::vector<std::string> warnings;
  auto window = [&](const std::vector<std::string>& subjects) {
    data::RecordingSet part = data::apply_normalization(data::select_subjects(rs, subjects),
                                                        out.stats);
    return data::segment_windows(part, window_seconds, overlap, &warnings);
  };
  out.sweep.train = window(out.split.train);
  out.sweep.val = window(out.split.val);
  out.sweep.test = window(out.split.test);
  for (const auto& w : warnings) log.line("warning: " + w);
  out.window_len = out.sweep.train.window_len();
  out.channels = out.sweep.train.num_channels();
  out.num_classes = out.sweep.train.num_classes;
  log.line("windows: train " + std::to_string(out.sweep.train.size()) + ", val " +
           std::to_string(out.sweep.val.size()) + ", test " +
           std::to_string(out.sweep.test.size()));
  if (out.sweep.train.size() == 0) throw DataError("no training windows after segmentation");
  return out;
}

model::CpcDims dims_from(const json& p) {
  model::CpcDims d;
  d.context = jget<int>(p, "context_dim", 256);
  d.gar_layers = jget<int>(p, "gar_layers", 2);
  d.gar_dropout = jget<double>(p, "gar_dropout", 0.2);
  return d;
}

model::PretrainConfig pretrain_config(const json& cfg) {
  const json p = jsec(cfg, "pretrain");
  model::PretrainConfig pc;
  pc.k_horizon = jget<int>(p, "k", 12);
  pc.learning_rate = jget<double>(p, "learning_rate", 1e-3);
  pc.epochs = jget<int>(p, "epochs", 150);
  pc.batch_size = jget<int>(p, "batch_size", 64);
  pc.seed = jget<long>(p, "seed", global_seed(cfg));
  pc.dims = dims_from(p);
  return pc;
}

model::FinetuneConfig finetune_config(const json& cfg) {
  const json f = jsec(cfg, "finetune");
  model::FinetuneConfig fc;
  fc.learning_rate = jget<double>(f, "learning_rate", 5e-4);
  fc.epochs = jget<int>(f, "epochs", 150);
  fc.decay_factor = jget<double>(f, "decay_factor", 0.8);
  fc.decay_every = jget<int>(f, "decay_every", 25);
  fc.batch_size = jget<int>(f, "batch_size", 64);
  fc.seed = jget<long>(f, "seed", global_seed(cfg));
  return fc;
}

std::vector<long> sweep_seeds(const json& sw, long base) {
  if (sw.contains("seeds")) return sw.at("seeds").get<std::vector<long>>();
  const int count = jget<int>(sw, "num_seeds", 5);
  std::vector<long> seeds;
  for (int i = 0; i < count; ++i) seeds.push_back(base + i);
  return seeds;
}

void prepare_out_dir(const fs::path& out, bool force) {
  if (fs::exists(out) && !fs::is_empty(out) && !force)
    throw UsageError("output directory '" + out.string() +
                     "' is not empty; pass --force to overwrite");
  fs::create_directories(out);
}

json history_json(const std::vector<model::EpochStats>& history) {
  json epochs = json::array();
  for (const auto& e : history) {
    json ej;
    ej["epoch"] = e.epoch;
    ej["train_loss"] = e.train_loss;
    ej["val_loss"] = e.val_loss;
    ej["val_step_accuracy"] = e.val_step_accuracy;
    epochs.push_back(std::move(ej));
  }
  return json{{"epochs", std::move(epochs)}};
}

void run_synth(const json& cfg, const fs::path& out, Log& log) {
  data::SyntheticConfig sc = synth_config(cfg, global_seed(cfg));
  data::RecordingSet rs = data::generate_synthetic(sc);
  const fs::path path = out / "data.csv";
  data::save_recordings_csv(rs, path.string());
  long steps = 0;
  for (const auto& r : rs.recordings) steps += r.num_timesteps();
  log.line("wrote " + path.string() + " (" + std::to_string(rs.recordings.size()) +
           " subjects, " + std::to_string(steps) + " timesteps, " +
           std::to_string(rs.num_classes) + " classes)");
}

void run_pretrain(const json& cfg, const fs::path& out, Log& log) {
  Prepared prep = prepare_data(cfg, log);
  model::PretrainConfig pc = pretrain_config(cfg);
  model::EncoderSpec spec = model::EncoderSpec::from_json(jsec(cfg, "encoder"));

  Rng init_rng(static_cast<std::uint64_t>(pc.seed));
  model::CpcModel m = model::CpcModel::make(spec, prep.channels, pc.k_horizon, init_rng, pc.dims);

  std::vector<model::EpochStats> history;
  auto on_epoch = [&](const model::EpochStats& e) {
    history.push_back(e);
    std::string acc1 = e.val_step_accuracy.empty()
                           ? "-"
                           : std::to_string(e.val_step_accuracy.front());
    log.line("epoch " + std::to_string(e.epoch) + " train_loss " + std::to_string(e.train_loss) +
             " val_loss " + std::to_string(e.val_loss) + " val_acc_step1 " + acc1);
    eval::write_json_file((out / "history.json").string(), history_json(history));
  };

  model::PretrainResult res;
  res = model::pretrain(m, pc, prep.sweep.train, prep.sweep.val, on_epoch);

  model::ModelConfig mc;
  mc.spec = spec;
  mc.in_channels = prep.channels;
  mc.k_horizon = pc.k_horizon;
  mc.window_len = prep.window_len;
  mc.dims = m.dims;

  json ck_cfg;
  ck_cfg["model"] = mc.to_json();
  ck_cfg["pretrain"] = {{"seed", pc.seed},
                        {"epochs", pc.epochs},
                        {"learning_rate", pc.learning_rate},
                        {"batch_size", pc.batch_size},
                        {"best_epoch", res.best_epoch},
                        {"best_val_loss", res.best_val_loss}};
  model::Checkpoint ck = model::checkpoint_from_params(m.params(), ck_cfg);
  ck.save((out / "checkpoint.bin").string());
  log.line("checkpoint written to " + (out / "checkpoint.bin").string() + " (best epoch " +
           std::to_string(res.best_epoch) + ")");

  json report;
  report["config"] = cfg;
  report["best_epoch"] = res.best_epoch;
  report["best_val_loss"] = res.best_val_loss;
  report["history"] = history_json(history);
  eval::write_json_file((out / "report.json").string(), report);
}

struct TrainedStack {
  model::Backbone backbone;
  model::ClassifierHead head;
  model::TrainClassifierResult result;
  double chosen_lr = 0.0;
};

TrainedStack train_stack(const model::Checkpoint& ck, model::FreezePolicy policy,
                         const eval::SweepData& swdata, const model::FinetuneConfig& base,
                         const std::vector<double>& lr_grid, int num_classes, Log& log,
                         const fs::path& out) {
  const model::ModelConfig mc = model::ModelConfig::from_json(ck.config.at("model"));
  std::vector<double> lrs = lr_grid.empty() ? std::vector<double>{base.learning_rate} : lr_grid;
  data::WindowDataset train = data::drop_unlabeled(swdata.train);
  data::WindowDataset val = data::drop_unlabeled(swdata.val);

  TrainedStack best;
  double best_val = -1.0;
  bool first = true;
  json epochs = json::array();  // across the whole lr grid
  for (double lr : lrs) {
    Rng rng(static_cast<std::uint64_t>(base.seed));
    TrainedStack cur{
        policy == model::FreezePolicy::None
            ? model::Backbone::random(mc, policy, rng)
            : model::Backbone::from_checkpoint(ck, policy, rng),
        model::ClassifierHead::make(mc.dims.context, num_classes, rng),
        {},
        lr};
    model::FinetuneConfig fc = base;
    fc.learning_rate = lr;
    fc.track_val_history = true;
    auto on_epoch = [&](int epoch, double train_loss, double val_f1) {
      json e{{"epoch", epoch}, {"train_loss", train_loss}, {"learning_rate", lr}};
      if (val_f1 >= 0) e["val_f1"] = val_f1;
      epochs.push_back(std::move(e));
      eval::write_json_file((out / "history.json").string(), json{{"epochs", epochs}});
      log.line("epoch " + std::to_string(epoch) + " train_loss " + std::to_string(train_loss) +
               (val_f1 >= 0 ? " val_f1 " + std::to_string(val_f1) : ""));
    };
    cur.result = model::train_classifier(cur.backbone, cur.head, train, val, fc, on_epoch);
    const double val_f1 = cur.result.val_metrics.mean_f1;
    log.line("lr " + std::to_string(lr) + " -> validation mean F1 " + std::to_string(val_f1));
    if (first || val_f1 > best_val) {
      first = false;
      best_val = val_f1;
      best = std::move(cur);
    }
  }
  return best;
}

void run_finetune(const json& cfg, const fs::path& out, Log& log) {
  const json f = jsec(cfg, "finetune");
  const std::string ck_path = jget<std::string>(f, "checkpoint", "");
  if (ck_path.empty()) throw UsageError("config: finetune.checkpoint is required");
  model::Checkpoint ck = model::Checkpoint::load(ck_path);
  const model::ModelConfig mc = model::ModelConfig::from_json(ck.config.at("model"));

  Prepared prep = prepare_data(cfg, log);
  if (prep.window_len != mc.window_len)
    throw DataError("checkpoint expects windows of " + std::to_string(mc.window_len) +
                    " steps, data has " + std::to_string(prep.window_len));
  if (prep.channels != mc.in_channels)
    throw DataError("checkpoint expects " + std::to_string(mc.in_channels) +
                    " channels, data has " + std::to_string(prep.channels));

  model::FreezePolicy policy =
      model::freeze_policy_from_string(jget<std::string>(f, "policy", "enc_le3_plus_gar"));
  model::FinetuneConfig fc = finetune_config(cfg);
  const auto lr_grid = jget<std::vector<double>>(f, "learning_rates", {});
  const int budget = jget<int>(f, "labels_per_class", 0);

  eval::SweepData swdata = prep.sweep;
  if (budget > 0) {
    std::vector<std::string> warnings;
    swdata.train = data::sample_labeled_subset(data::drop_unlabeled(swdata.train), budget,
                                               fc.seed, &warnings);
    for (const auto& w : warnings) log.line("warning: " + w);
    log.line("label budget " + std::to_string(budget) + "/class -> " +
             std::to_string(swdata.train.size()) + " training windows");
  }

  TrainedStack stack = train_stack(ck, policy, swdata, fc, lr_grid, prep.num_classes, log, out);

  // metrics on validation and test
  data::WindowDataset test = data::drop_unlabeled(prep.sweep.test);
  json metrics;
  metrics["validation"] = stack.result.val_metrics.to_json();
  if (test.size() > 0) {
    auto preds = model::predict(stack.backbone, stack.head, test);
    auto rep = eval::compute_metrics(test.labels, preds, prep.num_classes);
    metrics["test"] = rep.to_json();
    log.line("test mean F1 " + std::to_string(rep.mean_f1));
  }
  metrics["chosen_learning_rate"] = stack.chosen_lr;
  metrics["policy"] = to_string(policy);
  eval::write_json_file((out / "metrics.json").string(), metrics);

  json report;
  report["config"] = cfg;
  report["metrics"] = metrics;
  report["history"] = {{"epoch_train_loss", stack.result.epoch_train_loss},
                       {"epoch_val_f1", stack.result.epoch_val_f1}};
  eval::write_json_file((out / "report.json").string(), report);

  // serialized classifier: full backbone plus head plus enough config to
  // rebuild for evaluation
  json clf_cfg;
  clf_cfg["model"] = mc.to_json();
  clf_cfg["policy"] = to_string(policy);
  clf_cfg["num_classes"] = prep.num_classes;
  clf_cfg["finetune"] = {{"seed", fc.seed},
                         {"epochs", fc.epochs},
                         {"learning_rate", stack.chosen_lr},
                         {"batch_size", fc.batch_size},
                         {"labels_per_class", budget}};
  std::vector<nn::Parameter*> all = stack.backbone.params();
  for (auto* p : stack.head.params()) all.push_back(p);
  model::Checkpoint clf = model::checkpoint_from_params(all, clf_cfg);
  clf.save((out / "classifier.bin").string());
  log.line("classifier written to " + (out / "classifier.bin").string());
}

void run_evaluate(const json& cfg, const fs::path& out, Log& log) {
  const json e = jsec(cfg, "evaluate");
  const std::string clf_path = jget<std::string>(e, "classifier", "");
  if (clf_path.empty()) throw UsageError("config: evaluate.classifier is required");
  model::Checkpoint clf = model::Checkpoint::load(clf_path);
  const model::ModelConfig mc = model::ModelConfig::from_json(clf.config.at("model"));
  const int num_classes = clf.config.at("num_classes").get<int>();
  model::FreezePolicy policy =
      model::freeze_policy_from_string(clf.config.at("policy").get<std::string>());

  Prepared prep = prepare_data(cfg, log);
  if (prep.window_len != mc.window_len || prep.channels != mc.in_channels)
    throw DataError("classifier checkpoint does not match the prepared windows");

  Rng rng(0);
  model::Backbone bb = model::Backbone::random(mc, policy, rng);
  for (auto* p : bb.params()) clf.fill(*p);
  model::ClassifierHead head = model::ClassifierHead::make(mc.dims.context, num_classes, rng);
  for (auto* p : head.params()) clf.fill(*p);

  const std::string split = jget<std::string>(e, "split", "test");
  const data::WindowDataset* ds = split == "train" ? &prep.sweep.train
                                  : split == "val" ? &prep.sweep.val
                                                   : &prep.sweep.test;
  data::WindowDataset labeled = data::drop_unlabeled(*ds);
  if (labeled.size() == 0) throw DataError("evaluate: no labeled windows in split '" + split + "'");
  auto preds = model::predict(bb, head, labeled);
  auto rep = eval::compute_metrics(labeled.labels, preds, num_classes);
  log.line("split " + split + ": mean F1 " + std::to_string(rep.mean_f1));

  json metrics;
  metrics["split"] = split;
  metrics["metrics"] = rep.to_json();
  eval::write_json_file((out / "metrics.json").string(), metrics);

  json report;
  report["config"] = cfg;
  report["metrics"] = metrics;
  eval::write_json_file((out / "report.json").string(), report);
}

void run_sweep(const json& cfg, const fs::path& out, Log& log) {
  const json sw = jsec(cfg, "sweep");
  const std::string axis = jget<std::string>(sw, "axis", "");
  Prepared prep = prepare_data(cfg, log);
  const int threads = resolve_threads(cfg);
  log.line("sweep axis " + axis + " on " + std::to_string(threads) + " worker(s)");

  eval::SweepResult result;
  if (axis == "labels_per_class") {
    const std::string ck_path = jget<std::string>(sw, "checkpoint", "");
    if (ck_path.empty()) throw UsageError("config: sweep.checkpoint is required for this axis");
    model::Checkpoint ck = model::Checkpoint::load(ck_path);
    eval::SemiSupervisedOptions opt;
    opt.budgets = jget<std::vector<int>>(sw, "budgets", opt.budgets);
    opt.seeds = sweep_seeds(sw, global_seed(cfg));
    opt.lr_grid = jget<std::vector<double>>(jsec(cfg, "finetune"), "learning_rates", {});
    opt.finetune = finetune_config(cfg);
    opt.include_random_control = jget<bool>(sw, "random_control", true);
    opt.include_end_to_end = jget<bool>(sw, "end_to_end", true);
    opt.threads = threads;
    result = eval::semi_supervised_sweep(ck, prep.sweep, opt);
  } else if (axis == "k_horizon") {
    eval::HorizonAblationOptions opt;
    opt.k_values = jget<std::vector<int>>(sw, "k_values", opt.k_values);
    opt.seeds = sweep_seeds(sw, global_seed(cfg));
    opt.encoder = model::EncoderSpec::from_json(jsec(cfg, "encoder"));
    opt.pretrain = pretrain_config(cfg);
    opt.finetune = finetune_config(cfg);
    opt.labels_per_class = jget<int>(sw, "labels_per_class", 0);
    opt.threads = threads;
    result = eval::ablation_horizon(prep.sweep, opt);
  } else if (axis == "encoder_spec") {
    eval::EncoderAblationOptions opt;
    if (sw.contains("encoders"))
      for (const auto& ej : sw.at("encoders"))
        opt.specs.push_back(model::EncoderSpec::from_json(ej));
    opt.seeds = sweep_seeds(sw, global_seed(cfg));
    opt.pretrain = pretrain_config(cfg);
    opt.finetune = finetune_config(cfg);
    opt.labels_per_class = jget<int>(sw, "labels_per_class", 0);
    opt.threads = threads;
    result = eval::ablation_encoders(prep.sweep, opt);
  } else if (axis == "freeze_policy") {
    const std::string ck_path = jget<std::string>(sw, "checkpoint", "");
    if (ck_path.empty()) throw UsageError("config: sweep.checkpoint is required for this axis");
    model::Checkpoint ck = model::Checkpoint::load(ck_path);
    eval::FreezeAblationOptions opt;
    if (sw.contains("policies")) {
      opt.policies.clear();
      for (const auto& pj : sw.at("policies"))
        opt.policies.push_back(model::freeze_policy_from_string(pj.get<std::string>()));
    }
    opt.seeds = sweep_seeds(sw, global_seed(cfg));
    opt.finetune = finetune_config(cfg);
    opt.labels_per_class = jget<int>(sw, "labels_per_class", 0);
    opt.threads = threads;
    result = eval::ablation_freeze(ck, prep.sweep, opt);
  } else {
    throw UsageError("config: unknown sweep axis '" + axis + "'");
  }

  result.config = cfg;
  eval::write_json_file((out / "report.json").string(), result.to_json());
  eval::write_text_file((out / "report.csv").string(), result.to_csv());
  eval::write_text_file((out / "plot.svg").string(), eval::sweep_svg(result));
  if (axis == "encoder_spec")
    eval::write_text_file((out / "step_accuracy.svg").string(), eval::step_accuracy_svg(result));
  for (const auto& p : result.points)
    log.line("point " + p.setting + (p.group.empty() ? "" : "/" + p.group) + ": median F1 " +
             std::to_string(p.median) + " (min " + std::to_string(p.min) + ", max " +
             std::to_string(p.max) + ")");
}

}  // namespace

bool known_command(const std::string& command) {
  return command == "synth" || command == "pretrain" || command == "finetune" ||
         command == "evaluate" || command == "sweep";
}

int resolve_threads(const json& cfg) {
  if (jget<bool>(cfg, "deterministic", false)) return 1;
  int threads = jget<int>(cfg, "threads", 0);
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CPC_SEQ_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) threads = std::min(threads, cap);
  }
  return std::max(1, threads);
}

std::vector<std::string> validate_config(const std::string& command, const json& cfg) {
  std::vector<std::string> v;
  if (!known_command(command)) {
    v.push_back("unknown command '" + command + "'");
    return v;
  }

  const json d = jsec(cfg, "data");
  const bool has_path = !jget<std::string>(d, "path", "").empty();
  const bool has_synth = d.contains("synthetic");
  if (command == "synth" && !has_synth) v.push_back("synth requires data.synthetic");
  if (command != "synth" && !has_path && !has_synth)
    v.push_back("no data source (set data.path or data.synthetic)");
  if (has_path && has_synth) v.push_back("both data.path and data.synthetic configured");
  if (has_synth && jget<int>(d.at("synthetic"), "num_classes", 6) < 2)
    v.push_back("synthetic data needs at least 2 classes");

  const json pl = jsec(cfg, "pipeline");
  const double target_hz = jget<double>(pl, "target_hz", 30.0);
  const double window_seconds = jget<double>(pl, "window_seconds", 1.0);
  const double overlap = jget<double>(pl, "overlap_fraction", 0.5);
  if (target_hz <= 0) v.push_back("pipeline.target_hz must be positive");
  if (overlap < 0.0 || overlap >= 1.0) v.push_back("pipeline.overlap_fraction must lie in [0, 1)");
  const int window_len = static_cast<int>(std::llround(window_seconds * target_hz));
  if (window_len < 1) v.push_back("window shorter than one timestep");

  try {
    model::EncoderSpec::from_json(jsec(cfg, "encoder"));
  } catch (const std::exception& e) {
    v.push_back(std::string("encoder: ") + e.what());
  }

  if (command == "pretrain" || command == "sweep") {
    const json p = jsec(cfg, "pretrain");
    const int k = jget<int>(p, "k", 12);
    const int batch = jget<int>(p, "batch_size", 64);
    if (k < 1) v.push_back("pretrain.k must be positive");
    if (window_len - k < 1)
      v.push_back("horizon leaves no context (K=" + std::to_string(k) + ", window length " +
                  std::to_string(window_len) + ")");
    if (batch < 2) v.push_back("no negatives available (batch_size=" + std::to_string(batch) + ")");
    if (jget<int>(p, "epochs", 150) < 0) v.push_back("pretrain.epochs must be non-negative");
    if (jget<double>(p, "learning_rate", 1e-3) < 0)
      v.push_back("pretrain.learning_rate must be non-negative");
  }

  if (command == "finetune" || command == "sweep") {
    const json f = jsec(cfg, "finetune");
    if (jget<int>(f, "batch_size", 64) < 2) v.push_back("finetune.batch_size must be at least 2");
    if (jget<int>(f, "epochs", 150) < 0) v.push_back("finetune.epochs must be non-negative");
    if (command == "finetune") {
      if (jget<std::string>(f, "checkpoint", "").empty())
        v.push_back("finetune.checkpoint is required");
      try {
        model::freeze_policy_from_string(jget<std::string>(f, "policy", "enc_le3_plus_gar"));
      } catch (const std::exception& e) {
        v.push_back(e.what());
      }
    }
  }

  if (command == "evaluate" && jget<std::string>(jsec(cfg, "evaluate"), "classifier", "").empty())
    v.push_back("evaluate.classifier is required");

  if (command == "sweep") {
    const json sw = jsec(cfg, "sweep");
    const std::string axis = jget<std::string>(sw, "axis", "");
    if (axis != "labels_per_class" && axis != "k_horizon" && axis != "encoder_spec" &&
        axis != "freeze_policy")
      v.push_back("sweep.axis must be one of labels_per_class|k_horizon|encoder_spec|freeze_policy");
    if (axis == "labels_per_class" && jget<std::vector<int>>(sw, "budgets", {1}).empty())
      v.push_back("sweep.budgets must not be empty");
    if ((axis == "labels_per_class" || axis == "freeze_policy") &&
        jget<std::string>(sw, "checkpoint", "").empty())
      v.push_back("sweep.checkpoint is required for axis " + axis);
    if (axis == "k_horizon")
      for (int k : jget<std::vector<int>>(sw, "k_values", {2, 4, 8, 12, 16}))
        if (window_len - k < 1)
          v.push_back("horizon leaves no context (K=" + std::to_string(k) + ", window length " +
                      std::to_string(window_len) + ")");
  }
  return v;
}

void execute(const std::string& command, json config, const std::string& out_dir, bool force) {
  if (!known_command(command)) throw UsageError("unknown command '" + command + "'");
  auto violations = validate_config(command, config);
  if (!violations.empty()) {
    std::string msg = "invalid config:";
    for (const auto& s : violations) msg += "\n  - " + s;
    throw UsageError(msg);
  }

  const fs::path out(out_dir);
  prepare_out_dir(out, force);
  config["command"] = command;
  eval::write_json_file((out / "config.json").string(), config);

  Log log(out / "log.txt");
  log.line("command: " + command);
  if (command == "synth") {
    run_synth(config, out, log);
  } else if (command == "pretrain") {
    run_pretrain(config, out, log);
  } else if (command == "finetune") {
    run_finetune(config, out, log);
  } else if (command == "evaluate") {
    run_evaluate(config, out, log);
  } else if (command == "sweep") {
    run_sweep(config, out, log);
  }
  log.line("done");
}

}  // namespace cpcseq::run
