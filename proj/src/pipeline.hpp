#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "recording.hpp"

namespace cpcseq::data {

// Linear interpolation of every channel onto a uniform grid at target_hz,
// assuming the source grid is uniform at the recording's sample rate. Labels
// follow the nearest source timestep.
RecordingSet resample(const RecordingSet& rs, double target_hz);

enum class SplitPolicy { Fractional, FixedList };

struct SplitAssignment {
  std::vector<std::string> train, val, test;
  long seed = 0;
  SplitPolicy policy = SplitPolicy::Fractional;
};

struct FixedSplitLists {
  std::vector<std::string> train, val, test;
};

// Fractional policy: |test| = round(0.20 |all|), |val| = round(0.20 |rest|),
// round-half-up, shuffled by seed. FixedList reproduces the given lists
// (defaulting to subjects 1-10 / 11-12 / 13-14).
SplitAssignment split_by_subject(const RecordingSet& rs, SplitPolicy policy, long seed,
                                 const std::optional<FixedSplitLists>& lists = std::nullopt);

RecordingSet select_subjects(const RecordingSet& rs, const std::vector<std::string>& subjects);

struct NormalizationStats {
  Eigen::VectorXd mean;    // per channel
  Eigen::VectorXd stddev;  // population std, unclamped
};

inline constexpr double kStdEpsilon = 1e-8;

// Per-channel moments over all concatenated timesteps of the (train) split.
NormalizationStats fit_normalization(const RecordingSet& train);

// x' = (x - mean) / max(std, kStdEpsilon), channel-wise.
RecordingSet apply_normalization(const RecordingSet& rs, const NormalizationStats& stats);

struct WindowDataset {
  std::vector<Eigen::MatrixXd> windows;  // each [T x C]
  std::vector<int> labels;               // class index or kUnlabeled
  std::vector<std::string> subject_ids;  // one per window
  double window_seconds = 1.0;
  double overlap_fraction = 0.5;
  double sample_rate_hz = 0.0;
  int num_classes = 0;

  std::size_t size() const { return windows.size(); }
  int window_len() const { return windows.empty() ? 0 : static_cast<int>(windows[0].rows()); }
  int num_channels() const { return windows.empty() ? 0 : static_cast<int>(windows[0].cols()); }
};

// Sliding-window segmentation with stride T - floor(T * overlap). Window
// label is the majority timestep label, ties resolved by the final timestep.
// Recordings shorter than one window contribute nothing and emit a warning.
WindowDataset segment_windows(const RecordingSet& rs, double window_seconds,
                              double overlap_fraction, std::vector<std::string>* warnings = nullptr);

// Samples min(per_class, available) labeled windows per class without
// replacement; classes with no windows are skipped with a warning.
WindowDataset sample_labeled_subset(const WindowDataset& ds, int per_class, long seed,
                                    std::vector<std::string>* warnings = nullptr);

// Drops windows whose label is kUnlabeled.
WindowDataset drop_unlabeled(const WindowDataset& ds);

}  // namespace cpcseq::data
