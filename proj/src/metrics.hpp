#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace cpcseq::eval {

struct ClassMetrics {
  int cls = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long support = 0;
};

// Macro-averaged F1 over all num_classes classes; classes absent from the
// data contribute 0 to the average.
struct MetricsReport {
  double mean_f1 = 0.0;
  std::vector<ClassMetrics> per_class;
  std::vector<std::vector<long>> confusion;  // [true][pred]
  std::vector<double> pretext_step_accuracy;

  nlohmann::json to_json() const;
};

MetricsReport compute_metrics(const std::vector<int>& truth, const std::vector<int>& predicted,
                              int num_classes);

}  // namespace cpcseq::eval
