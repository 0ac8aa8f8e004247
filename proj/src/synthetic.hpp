#pragma once

#include <vector>

#include "recording.hpp"

namespace cpcseq::data {

// Desk-scale stand-in for real HAR recordings: each class is a periodic
// multichannel regime (own base frequency, per-channel amplitude profile and
// phase offsets, plus a weaker second harmonic); subjects add phase and
// amplitude jitter; labels follow a random regime-switching schedule with
// dwell times of at least 2 s.
struct SyntheticConfig {
  int num_subjects = 8;
  int num_classes = 6;
  int num_channels = 6;
  double duration_s = 60.0;
  double rate_hz = 30.0;
  double noise_std = 0.25;
  long seed = 1;
  // Base frequency per class; when empty, spread geometrically over
  // [0.8, 6.0] Hz.
  std::vector<double> base_freqs;
};

RecordingSet generate_synthetic(const SyntheticConfig& cfg);

}  // namespace cpcseq::data
