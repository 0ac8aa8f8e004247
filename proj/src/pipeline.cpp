#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "errors.hpp"
#include "rng.hpp"

namespace cpcseq::data {

RecordingSet resample(const RecordingSet& rs, double target_hz) {
  if (target_hz <= 0.0) throw DataError("resample: target_hz must be positive");
  RecordingSet out;
  out.channels = rs.channels;
  out.num_classes = rs.num_classes;
  for (const auto& rec : rs.recordings) {
    if (rec.sample_rate_hz <= 0.0)
      throw DataError("resample: recording '" + rec.subject_id + "' has unknown sample rate");
    const long n = rec.num_timesteps();
    const double src_dt = 1.0 / rec.sample_rate_hz;
    const double duration = static_cast<double>(n - 1) * src_dt;
    const long m = static_cast<long>(std::floor(duration * target_hz)) + 1;

    Recording res;
    res.subject_id = rec.subject_id;
    res.sample_rate_hz = target_hz;
    res.samples.resize(m, rec.samples.cols());
    res.labels.resize(static_cast<std::size_t>(m));
    for (long i = 0; i < m; ++i) {
      const double t = static_cast<double>(i) / target_hz;
      const double pos = t * rec.sample_rate_hz;
      long lo = static_cast<long>(std::floor(pos));
      lo = std::clamp(lo, 0L, n - 1);
      const long hi = std::min(lo + 1, n - 1);
      const double frac = std::clamp(pos - static_cast<double>(lo), 0.0, 1.0);
      res.samples.row(i) = (1.0 - frac) * rec.samples.row(lo) + frac * rec.samples.row(hi);
      const long nearest = (frac < 0.5) ? lo : hi;
      res.labels[static_cast<std::size_t>(i)] = rec.labels[static_cast<std::size_t>(nearest)];
    }
    out.recordings.push_back(std::move(res));
  }
  return out;
}

namespace {

long round_half_up(double x) { return static_cast<long>(std::floor(x + 0.5)); }

}  // namespace

SplitAssignment split_by_subject(const RecordingSet& rs, SplitPolicy policy, long seed,
                                 const std::optional<FixedSplitLists>& lists) {
  SplitAssignment out;
  out.seed = seed;
  out.policy = policy;

  if (policy == SplitPolicy::FixedList) {
    FixedSplitLists def;
    if (lists.has_value()) {
      def = *lists;
    } else {
      for (int i = 1; i <= 10; ++i) def.train.push_back(std::to_string(i));
      def.val = {"11", "12"};
      def.test = {"13", "14"};
    }
    std::set<std::string> present;
    for (const auto& r : rs.recordings) present.insert(r.subject_id);
    auto check = [&](const std::vector<std::string>& ids, const char* split) {
      for (const auto& id : ids)
        if (!present.count(id))
          throw DataError(std::string("fixed_list split: unknown subject '") + id + "' in " + split);
    };
    check(def.train, "train");
    check(def.val, "val");
    check(def.test, "test");
    out.train = def.train;
    out.val = def.val;
    out.test = def.test;
    std::size_t assigned = out.train.size() + out.val.size() + out.test.size();
    if (assigned != present.size())
      throw DataError("fixed_list split: lists do not cover every subject exactly once");
    return out;
  }

  std::vector<std::string> subjects;
  {
    std::set<std::string> seen;
    for (const auto& r : rs.recordings)
      if (seen.insert(r.subject_id).second) subjects.push_back(r.subject_id);
  }
  std::sort(subjects.begin(), subjects.end());
  if (subjects.size() < 3)
    throw DataError("fractional split: need at least 3 subjects, got " +
                    std::to_string(subjects.size()));

  Rng rng(static_cast<std::uint64_t>(seed));
  rng.shuffle(subjects);

  const long total = static_cast<long>(subjects.size());
  const long n_test = round_half_up(0.20 * static_cast<double>(total));
  const long n_val = round_half_up(0.20 * static_cast<double>(total - n_test));
  const long n_train = total - n_test - n_val;
  if (n_test < 1 || n_val < 1 || n_train < 1)
    throw DataError("fractional split: too few subjects for non-empty train/val/test splits");

  out.test.assign(subjects.begin(), subjects.begin() + n_test);
  out.val.assign(subjects.begin() + n_test, subjects.begin() + n_test + n_val);
  out.train.assign(subjects.begin() + n_test + n_val, subjects.end());
  return out;
}

RecordingSet select_subjects(const RecordingSet& rs, const std::vector<std::string>& subjects) {
  std::set<std::string> want(subjects.begin(), subjects.end());
  RecordingSet out;
  out.channels = rs.channels;
  out.num_classes = rs.num_classes;
  for (const auto& r : rs.recordings)
    if (want.count(r.subject_id)) out.recordings.push_back(r);
  return out;
}

NormalizationStats fit_normalization(const RecordingSet& train) {
  if (train.recordings.empty()) throw DataError("fit_normalization: empty train split");
  const long ch = train.recordings[0].samples.cols();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(ch);
  Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(ch);
  double count = 0.0;
  for (const auto& r : train.recordings) {
    sum += r.samples.colwise().sum().transpose();
    sumsq += r.samples.array().square().colwise().sum().matrix().transpose();
    count += static_cast<double>(r.num_timesteps());
  }
  NormalizationStats s;
  s.mean = sum / count;
  Eigen::VectorXd var = (sumsq / count - s.mean.array().square().matrix()).cwiseMax(0.0);
  s.stddev = var.array().sqrt();
  return s;
}

RecordingSet apply_normalization(const RecordingSet& rs, const NormalizationStats& stats) {
  if (!rs.recordings.empty() && rs.recordings[0].samples.cols() != stats.mean.size())
    throw DataError("apply_normalization: channel count mismatch");
  RecordingSet out = rs;
  Eigen::ArrayXd denom = stats.stddev.array().max(kStdEpsilon);
  for (auto& r : out.recordings) {
    r.samples.array().rowwise() -= stats.mean.transpose().array();
    r.samples.array().rowwise() /= denom.transpose();
  }
  return out;
}

namespace {

int window_label(const std::vector<int>& labels, long begin, long len) {
  std::map<int, long> counts;
  for (long i = begin; i < begin + len; ++i) ++counts[labels[static_cast<std::size_t>(i)]];
  long best = -1;
  int best_label = kUnlabeled;
  bool tie = false;
  for (const auto& [label, n] : counts) {
    if (n > best) {
      best = n;
      best_label = label;
      tie = false;
    } else if (n == best) {
      tie = true;
    }
  }
  if (tie) return labels[static_cast<std::size_t>(begin + len - 1)];
  return best_label;
}

}  // namespace

WindowDataset segment_windows(const RecordingSet& rs, double window_seconds,
                              double overlap_fraction, std::vector<std::string>* warnings) {
  if (overlap_fraction < 0.0 || overlap_fraction >= 1.0)
    throw DataError("segment_windows: overlap_fraction must lie in [0, 1)");
  WindowDataset ds;
  ds.window_seconds = window_seconds;
  ds.overlap_fraction = overlap_fraction;
  ds.num_classes = rs.num_classes;
  if (rs.recordings.empty()) return ds;

  const double rate = rs.recordings[0].sample_rate_hz;
  for (const auto& rec : rs.recordings)
    if (rec.sample_rate_hz != rate)
      throw DataError("segment_windows: recordings disagree on sample rate; resample first");
  ds.sample_rate_hz = rate;
  const long T = static_cast<long>(std::llround(window_seconds * rate));
  if (T < 1) throw DataError("segment_windows: window shorter than one timestep");
  const long stride = T - static_cast<long>(std::floor(static_cast<double>(T) * overlap_fraction));

  for (const auto& rec : rs.recordings) {
    const long L = rec.num_timesteps();
    if (L < T) {
      if (warnings)
        warnings->push_back("recording '" + rec.subject_id + "' shorter than one window (" +
                            std::to_string(L) + " < " + std::to_string(T) + "), skipped");
      continue;
    }
    const long n = (L - T) / stride + 1;
    for (long w = 0; w < n; ++w) {
      const long begin = w * stride;
      ds.windows.push_back(rec.samples.middleRows(begin, T));
      ds.labels.push_back(window_label(rec.labels, begin, T));
      ds.subject_ids.push_back(rec.subject_id);
    }
  }
  return ds;
}

WindowDataset sample_labeled_subset(const WindowDataset& ds, int per_class, long seed,
                                    std::vector<std::string>* warnings) {
  if (per_class < 1) throw DataError("sample_labeled_subset: per_class must be positive");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.labels[i] != kUnlabeled) by_class[ds.labels[i]].push_back(i);

  Rng rng(static_cast<std::uint64_t>(seed));
  std::vector<std::size_t> chosen;
  for (int cls = 0; cls < ds.num_classes; ++cls) {
    auto it = by_class.find(cls);
    if (it == by_class.end() || it->second.empty()) {
      if (warnings)
        warnings->push_back("class " + std::to_string(cls) + " has no labeled windows, excluded");
      continue;
    }
    std::vector<std::size_t> pool = it->second;
    rng.shuffle(pool);
    const std::size_t take = std::min<std::size_t>(pool.size(), static_cast<std::size_t>(per_class));
    if (warnings && take < static_cast<std::size_t>(per_class))
      warnings->push_back("class " + std::to_string(cls) + " has only " +
                          std::to_string(pool.size()) + " windows, taking all");
    std::vector<std::size_t> picked(pool.begin(), pool.begin() + static_cast<long>(take));
    std::sort(picked.begin(), picked.end());
    chosen.insert(chosen.end(), picked.begin(), picked.end());
  }

  WindowDataset out;
  out.window_seconds = ds.window_seconds;
  out.overlap_fraction = ds.overlap_fraction;
  out.sample_rate_hz = ds.sample_rate_hz;
  out.num_classes = ds.num_classes;
  for (std::size_t i : chosen) {
    out.windows.push_back(ds.windows[i]);
    out.labels.push_back(ds.labels[i]);
    out.subject_ids.push_back(ds.subject_ids[i]);
  }
  return out;
}

WindowDataset drop_unlabeled(const WindowDataset& ds) {
  WindowDataset out;
  out.window_seconds = ds.window_seconds;
  out.overlap_fraction = ds.overlap_fraction;
  out.sample_rate_hz = ds.sample_rate_hz;
  out.num_classes = ds.num_classes;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.labels[i] == kUnlabeled) continue;
    out.windows.push_back(ds.windows[i]);
    out.labels.push_back(ds.labels[i]);
    out.subject_ids.push_back(ds.subject_ids[i]);
  }
  return out;
}

}  // namespace cpcseq::data
