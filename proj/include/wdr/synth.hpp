#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wdr/data.hpp"
#include "wdr/rng.hpp"

namespace wdr {

/// Covariate-to-rate map applied to x'beta_j for one risk.
enum class RateMap { Exp, Cosh, AbsSinh, Custom };

struct ScenarioSpec {
  int J = 2;
  std::vector<RateMap> rate_maps;                       // per risk
  std::vector<std::function<double(double)>> custom;    // used when Custom
  double a = 2.0;
  std::vector<std::vector<double>> beta;                // per risk, length dim
  int dim = 3;
  double censor_time = 2.1;
  std::size_t n = 2000;

  /// Table-style generating processes; the coefficient vectors are not
  /// published, so fixed documented defaults are used.
  static ScenarioSpec scenario(int which);

  double rate(int j, std::span<const double> x) const;
  std::string to_json() const;
};

/// True latent state emitted alongside each generated dataset.
struct GroundTruth {
  std::vector<std::vector<double>> latent_times;  // n x J
  std::vector<int> true_event;                    // 1-based argmin, pre-censoring
};

struct SyntheticData {
  Dataset dataset;
  GroundTruth truth;
};

SyntheticData generate(const ScenarioSpec& scenario, RngStream& rng);

struct PaperProtocol {
  Dataset full;
  std::vector<std::pair<Dataset, Dataset>> partitions;  // train/test
  std::vector<double> evaluation_times;
};

/// 2000 rows, n_partitions random 1800/200 splits with censored rows kept
/// out of the test sets, plus the per-scenario evaluation grid.
PaperProtocol replicate_paper_protocol(const ScenarioSpec& scenario,
                                       int n_partitions, RngStream& rng);

}  // namespace wdr
