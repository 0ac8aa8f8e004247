#include "metrics.hpp"

#include "errors.hpp"

namespace cpcseq::eval {

MetricsReport compute_metrics(const std::vector<int>& truth, const std::vector<int>& predicted,
                              int num_classes) {
  if (truth.empty()) throw DataError("compute_metrics: empty label vectors");
  if (truth.size() != predicted.size())
    throw DataError("compute_metrics: label vectors differ in length");
  if (num_classes < 1) throw DataError("compute_metrics: num_classes must be positive");

  MetricsReport rep;
  rep.confusion.assign(static_cast<std::size_t>(num_classes),
                       std::vector<long>(static_cast<std::size_t>(num_classes), 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes)
      throw DataError("compute_metrics: label out of range at index " + std::to_string(i));
    ++rep.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }

  double f1_sum = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    long tp = rep.confusion[c][c];
    long fp = 0, fn = 0;
    for (int o = 0; o < num_classes; ++o) {
      if (o == c) continue;
      fp += rep.confusion[o][c];
      fn += rep.confusion[c][o];
    }
    ClassMetrics m;
    m.cls = c;
    m.support = tp + fn;
    m.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    m.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    f1_sum += m.f1;
    rep.per_class.push_back(m);
  }
  rep.mean_f1 = f1_sum / static_cast<double>(num_classes);
  return rep;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["mean_f1"] = mean_f1;
  j["per_class"] = nlohmann::json::array();
  for (const auto& m : per_class) {
    j["per_class"].push_back({{"class", m.cls},
                              {"precision", m.precision},
                              {"recall", m.recall},
                              {"f1", m.f1},
                              {"support", m.support}});
  }
  j["confusion"] = confusion;
  if (!pretext_step_accuracy.empty()) j["pretext_step_accuracy"] = pretext_step_accuracy;
  return j;
}

}  // namespace cpcseq::eval
