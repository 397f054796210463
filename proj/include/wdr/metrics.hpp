#pragma once

#include <span>
#include <utility>

#include "wdr/data.hpp"

namespace wdr {

struct MetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Brier score for event j at horizon t:
/// (1/n) sum_i [1(t_i <= t, y_i = j) - prediction_i]^2.
double brier_score(std::span<const double> cif_predictions,
                   const Dataset& test_data, int j, double t);

/// Cause-specific concordance: over pairs where i is a case of event j by
/// time t and i' either outlives i or has a different event type, the
/// fraction with Score(i) > Score(i'); ties in score count 1/2. Throws
/// MetricError when no pair qualifies.
double c_index(std::span<const double> scores, const Dataset& test_data,
               int j, double t);

/// Accuracy at threshold 0.5 and rank-statistic AUC (score ties 1/2) for
/// binary labels.
std::pair<double, double> classification_metrics(
    std::span<const double> probabilities, std::span<const int> labels);

}  // namespace wdr
