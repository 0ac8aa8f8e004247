#include "synthetic.hpp"

#include <cmath>
#include <numbers>

#include "errors.hpp"
#include "rng.hpp"

namespace cpcseq::data {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

RecordingSet generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.num_classes < 2) throw DataError("generate_synthetic: need at least 2 classes");
  if (cfg.num_subjects < 1) throw DataError("generate_synthetic: need at least 1 subject");
  if (cfg.num_channels < 1) throw DataError("generate_synthetic: need at least 1 channel");
  if (cfg.rate_hz <= 0.0) throw DataError("generate_synthetic: rate_hz must be positive");
  if (cfg.duration_s <= 0.0) throw DataError("generate_synthetic: duration_s must be positive");
  if (cfg.noise_std < 0.0) throw DataError("generate_synthetic: noise_std must be non-negative");
  if (!cfg.base_freqs.empty() &&
      cfg.base_freqs.size() != static_cast<std::size_t>(cfg.num_classes))
    throw DataError("generate_synthetic: base_freqs size must equal num_classes");

  std::vector<double> freqs = cfg.base_freqs;
  if (freqs.empty()) {
    const double lo = 0.8, hi = 6.0;
    for (int c = 0; c < cfg.num_classes; ++c) {
      const double f = (cfg.num_classes == 1)
                           ? lo
                           : lo * std::pow(hi / lo, static_cast<double>(c) /
                                                        static_cast<double>(cfg.num_classes - 1));
      freqs.push_back(f);
    }
  }

  Rng rng(static_cast<std::uint64_t>(cfg.seed));

  // Per-class regime: amplitude profile, phase offsets, harmonic weight.
  std::vector<Eigen::VectorXd> amp(static_cast<std::size_t>(cfg.num_classes));
  std::vector<Eigen::VectorXd> phase(static_cast<std::size_t>(cfg.num_classes));
  std::vector<double> harmonic(static_cast<std::size_t>(cfg.num_classes));
  for (int c = 0; c < cfg.num_classes; ++c) {
    amp[c].resize(cfg.num_channels);
    phase[c].resize(cfg.num_channels);
    for (int ch = 0; ch < cfg.num_channels; ++ch) {
      amp[c](ch) = rng.uniform(0.6, 1.6);
      phase[c](ch) = rng.uniform(0.0, kTwoPi);
    }
    harmonic[c] = rng.uniform(0.15, 0.45);
  }

  RecordingSet rs;
  for (int ch = 0; ch < cfg.num_channels; ++ch) rs.channels.push_back("ch" + std::to_string(ch));
  rs.num_classes = cfg.num_classes;

  const long n = static_cast<long>(std::llround(cfg.duration_s * cfg.rate_hz));
  for (int s = 0; s < cfg.num_subjects; ++s) {
    Recording rec;
    rec.subject_id = "s" + std::to_string(s);
    rec.sample_rate_hz = cfg.rate_hz;
    rec.samples.resize(n, cfg.num_channels);
    rec.labels.resize(static_cast<std::size_t>(n));

    Eigen::VectorXd subj_phase(cfg.num_channels), subj_amp(cfg.num_channels);
    for (int ch = 0; ch < cfg.num_channels; ++ch) {
      subj_phase(ch) = rng.uniform(0.0, kTwoPi);
      subj_amp(ch) = rng.uniform(0.85, 1.15);
    }

    // Regime-switching schedule: dwell uniform in [2 s, 6 s], next class
    // drawn uniformly among the others.
    long i = 0;
    const long min_dwell = static_cast<long>(std::llround(2.0 * cfg.rate_hz));
    int cls = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(cfg.num_classes)));
    while (i < n) {
      const double dwell_s = rng.uniform(2.0, 6.0);
      long dwell = static_cast<long>(std::llround(dwell_s * cfg.rate_hz));
      dwell = std::min(dwell, n - i);
      if (n - i - dwell < min_dwell) dwell = n - i;  // avoid a trailing stub segment
      for (long j = i; j < i + dwell; ++j) {
        const double t = static_cast<double>(j) / cfg.rate_hz;
        rec.labels[static_cast<std::size_t>(j)] = cls;
        for (int ch = 0; ch < cfg.num_channels; ++ch) {
          const double arg = kTwoPi * freqs[cls] * t + phase[cls](ch) + subj_phase(ch);
          double v = amp[cls](ch) * subj_amp(ch) *
                     (std::sin(arg) + harmonic[cls] * std::sin(2.0 * arg + 0.7));
          if (cfg.noise_std > 0.0) v += cfg.noise_std * rng.normal();
          rec.samples(j, ch) = v;
        }
      }
      i += dwell;
      if (cfg.num_classes > 1) {
        int next = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(cfg.num_classes - 1)));
        if (next >= cls) ++next;
        cls = next;
      }
    }
    rs.recordings.push_back(std::move(rec));
  }
  return rs;
}

}  // namespace cpcseq::data
