#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace cpcseq::data {

inline constexpr int kUnlabeled = -1;

// One subject's continuous multichannel stream with per-timestep labels.
struct Recording {
  std::string subject_id;
  double sample_rate_hz = 0.0;
  Eigen::MatrixXd samples;  // [num_timesteps x num_channels]
  std::vector<int> labels;  // class index or kUnlabeled, one per timestep

  long num_timesteps() const { return samples.rows(); }
};

struct RecordingSet {
  std::vector<std::string> channels;
  std::vector<Recording> recordings;
  int num_classes = 0;  // max label + 1 over all recordings

  std::vector<std::string> subject_ids() const;
};

// Canonical recording file: UTF-8 CSV with header
//   subject,timestamp,<channel...>,label
// Timestamps are seconds, monotonic per subject; label is an integer class
// index or -1 for unlabeled. `path` may be a single file or a directory of
// .csv files. Any malformed row aborts the load with the offending row named.
RecordingSet load_recordings(const std::string& path);

void save_recordings_csv(const RecordingSet& rs, const std::string& path);

}  // namespace cpcseq::data
