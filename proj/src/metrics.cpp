#include "wdr/metrics.hpp"

#include <cmath>

namespace wdr {

double brier_score(std::span<const double> cif_predictions,
                   const Dataset& test_data, int j, double t) {
  const std::size_t n = test_data.size();
  if (cif_predictions.size() != n)
    throw MetricError("brier_score: prediction/data length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Observation& obs = test_data.observations[i];
    const bool indicator = obs.time.is_observed() && obs.time.value <= t &&
                           obs.event.is_known() && *obs.event.type == j;
    const double d = (indicator ? 1.0 : 0.0) - cif_predictions[i];
    acc += d * d;
  }
  return acc / static_cast<double>(n);
}

double c_index(std::span<const double> scores, const Dataset& test_data,
               int j, double t) {
  const std::size_t n = test_data.size();
  if (scores.size() != n)
    throw MetricError("c_index: score/data length mismatch");
  double comparable = 0.0;
  double concordant = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Observation& a = test_data.observations[i];
    if (!a.time.is_observed() || !a.event.is_known() || *a.event.type != j ||
        a.time.value > t)
      continue;  // i must be a case of event j by time t
    for (std::size_t i2 = 0; i2 < n; ++i2) {
      if (i2 == i) continue;
      const Observation& b = test_data.observations[i2];
      if (!b.time.is_observed()) continue;
      const bool other_event = b.event.is_known() && *b.event.type != j;
      const bool later = a.time.value < b.time.value;
      if (!later && !other_event) continue;
      comparable += 1.0;
      if (scores[i] > scores[i2])
        concordant += 1.0;
      else if (scores[i] == scores[i2])
        concordant += 0.5;
    }
  }
  if (comparable == 0.0)
    throw MetricError("c_index: no comparable pairs at t=" + std::to_string(t));
  return concordant / comparable;
}

std::pair<double, double> classification_metrics(
    std::span<const double> probabilities, std::span<const int> labels) {
  const std::size_t n = labels.size();
  if (probabilities.size() != n)
    throw MetricError("classification_metrics: length mismatch");
  std::size_t pos = 0, correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == 1) ++pos;
    const int pred = probabilities[i] > 0.5 ? 1 : 0;
    if (pred == labels[i]) ++correct;
  }
  if (pos == 0 || pos == n)
    throw MetricError("classification_metrics: AUC undefined for one class");
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t i2 = 0; i2 < n; ++i2) {
      if (labels[i2] == 1) continue;
      if (probabilities[i] > probabilities[i2])
        rank_sum += 1.0;
      else if (probabilities[i] == probabilities[i2])
        rank_sum += 0.5;
    }
  }
  const double auc = rank_sum / (double(pos) * double(n - pos));
  return {double(correct) / double(n), auc};
}

}  // namespace wdr
