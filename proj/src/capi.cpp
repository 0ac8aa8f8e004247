#include "cpcseq.h"

#include <cstring>
#include <string>

#include <json.hpp>

#include "errors.hpp"
#include "metrics.hpp"
#include "pipeline.hpp"
#include "recording.hpp"
#include "runner.hpp"
#include "synthetic.hpp"

using nlohmann::json;

struct cpcseq_recordings {
  cpcseq::data::RecordingSet set;
};

struct cpcseq_windows {
  cpcseq::data::WindowDataset ds;
};

namespace {

thread_local std::string g_last_error;

int fail(int code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const cpcseq::UsageError& e) {
    return fail(CPCSEQ_USAGE_ERROR, e.what());
  } catch (const cpcseq::DataError& e) {
    return fail(CPCSEQ_DATA_ERROR, e.what());
  } catch (const cpcseq::NumericError& e) {
    return fail(CPCSEQ_NUMERIC_ERROR, e.what());
  } catch (const std::exception& e) {
    return fail(CPCSEQ_INTERNAL_ERROR, e.what());
  }
}

json parse_config(const char* config_json) {
  if (config_json == nullptr) throw cpcseq::UsageError("config JSON is null");
  json cfg = json::parse(config_json, nullptr, false);
  if (cfg.is_discarded()) throw cpcseq::UsageError("config is not valid JSON");
  if (!cfg.is_object()) throw cpcseq::UsageError("config must be a JSON object");
  return cfg;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

cpcseq::data::SyntheticConfig synth_config_from_json(const json& j) {
  cpcseq::data::SyntheticConfig sc;
  if (j.contains("num_subjects")) sc.num_subjects = j.at("num_subjects").get<int>();
  if (j.contains("num_classes")) sc.num_classes = j.at("num_classes").get<int>();
  if (j.contains("num_channels")) sc.num_channels = j.at("num_channels").get<int>();
  if (j.contains("duration_s")) sc.duration_s = j.at("duration_s").get<double>();
  if (j.contains("rate_hz")) sc.rate_hz = j.at("rate_hz").get<double>();
  if (j.contains("noise_std")) sc.noise_std = j.at("noise_std").get<double>();
  if (j.contains("seed")) sc.seed = j.at("seed").get<long>();
  if (j.contains("base_freqs")) sc.base_freqs = j.at("base_freqs").get<std::vector<double>>();
  return sc;
}

}  // namespace

extern "C" {

const char* cpcseq_version(void) { return "0.1.0"; }

const char* cpcseq_last_error(void) { return g_last_error.c_str(); }

int cpcseq_run(const char* command, const char* config_json, const char* out_dir, int force) {
  return guarded([&]() {
    if (command == nullptr || out_dir == nullptr)
      throw cpcseq::UsageError("command and out_dir must not be null");
    cpcseq::run::execute(command, parse_config(config_json), out_dir, force != 0);
    return CPCSEQ_OK;
  });
}

int cpcseq_validate(const char* command, const char* config_json, char** violations_json) {
  return guarded([&]() {
    if (command == nullptr || violations_json == nullptr)
      throw cpcseq::UsageError("command and violations_json must not be null");
    auto violations = cpcseq::run::validate_config(command, parse_config(config_json));
    *violations_json = dup_string(json(violations).dump());
    return CPCSEQ_OK;
  });
}

void cpcseq_string_free(char* s) { std::free(s); }

int cpcseq_recordings_load(const char* path, cpcseq_recordings** out) {
  return guarded([&]() {
    if (path == nullptr || out == nullptr)
      throw cpcseq::UsageError("path and out must not be null");
    auto* rs = new cpcseq_recordings{cpcseq::data::load_recordings(path)};
    *out = rs;
    return CPCSEQ_OK;
  });
}

int cpcseq_recordings_synthesize(const char* config_json, cpcseq_recordings** out) {
  return guarded([&]() {
    if (out == nullptr) throw cpcseq::UsageError("out must not be null");
    json cfg = config_json ? parse_config(config_json) : json::object();
    auto* rs = new cpcseq_recordings{cpcseq::data::generate_synthetic(synth_config_from_json(cfg))};
    *out = rs;
    return CPCSEQ_OK;
  });
}

int cpcseq_recordings_save_csv(const cpcseq_recordings* rs, const char* path) {
  return guarded([&]() {
    if (rs == nullptr || path == nullptr)
      throw cpcseq::UsageError("recordings and path must not be null");
    cpcseq::data::save_recordings_csv(rs->set, path);
    return CPCSEQ_OK;
  });
}

int cpcseq_recordings_info(const cpcseq_recordings* rs, size_t* num_recordings,
                           size_t* num_channels, int* num_classes) {
  return guarded([&]() {
    if (rs == nullptr) throw cpcseq::UsageError("recordings must not be null");
    if (num_recordings) *num_recordings = rs->set.recordings.size();
    if (num_channels) *num_channels = rs->set.channels.size();
    if (num_classes) *num_classes = rs->set.num_classes;
    return CPCSEQ_OK;
  });
}

void cpcseq_recordings_free(cpcseq_recordings* rs) { delete rs; }

int cpcseq_windows_segment(const cpcseq_recordings* rs, double window_seconds,
                           double overlap_fraction, cpcseq_windows** out) {
  return guarded([&]() {
    if (rs == nullptr || out == nullptr)
      throw cpcseq::UsageError("recordings and out must not be null");
    auto* ds = new cpcseq_windows{
        cpcseq::data::segment_windows(rs->set, window_seconds, overlap_fraction)};
    *out = ds;
    return CPCSEQ_OK;
  });
}

int cpcseq_windows_info(const cpcseq_windows* ds, size_t* num_windows, int* window_len,
                        int* num_channels) {
  return guarded([&]() {
    if (ds == nullptr) throw cpcseq::UsageError("windows must not be null");
    if (num_windows) *num_windows = ds->ds.size();
    if (window_len) *window_len = ds->ds.window_len();
    if (num_channels) *num_channels = ds->ds.num_channels();
    return CPCSEQ_OK;
  });
}

void cpcseq_windows_free(cpcseq_windows* ds) { delete ds; }

int cpcseq_compute_metrics(const int* truth, const int* predicted, size_t n, int num_classes,
                           char** report_json) {
  return guarded([&]() {
    if (truth == nullptr || predicted == nullptr || report_json == nullptr)
      throw cpcseq::UsageError("label vectors and report_json must not be null");
    std::vector<int> t(truth, truth + n), p(predicted, predicted + n);
    auto rep = cpcseq::eval::compute_metrics(t, p, num_classes);
    *report_json = dup_string(rep.to_json().dump());
    return CPCSEQ_OK;
  });
}

}  // extern "C"
