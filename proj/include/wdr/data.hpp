#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wdr/rng.hpp"

namespace wdr {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Event-time status of one subject.
struct TimeStatus {
  enum class Kind { Observed, RightCensored, Missing };
  Kind kind = Kind::Missing;
  double value = 0.0;  // event time or censoring time; unused when Missing

  static TimeStatus observed(double t);
  static TimeStatus right_censored(double t);
  static TimeStatus missing() { return {}; }
  bool is_observed() const { return kind == Kind::Observed; }
  bool is_censored() const { return kind == Kind::RightCensored; }
  bool is_missing() const { return kind == Kind::Missing; }
};

/// Event-type status: known type in 1..J, or missing.
struct EventStatus {
  std::optional<int> type;  // 1-based

  static EventStatus known(int j) { return {j}; }
  static EventStatus missing() { return {}; }
  bool is_known() const { return type.has_value(); }
};

struct Observation {
  std::vector<double> x;
  TimeStatus time;
  EventStatus event;

  bool both_missing() const { return time.is_missing() && !event.is_known(); }
};

struct Dataset {
  std::vector<Observation> observations;
  int n_risks = 0;  // J
  std::vector<std::string> feature_names;
  bool includes_intercept = false;

  std::size_t size() const { return observations.size(); }
  std::size_t n_features() const { return feature_names.size(); }

  /// Prepend a column of ones (no-op if already present).
  void add_intercept();
};

struct CsvSchema {
  int n_risks = 0;
};

/// Read the standard CSV layout: header row; `time` (positive real or
/// empty) and `status` (0 = right-censored, 1..J = event type, empty =
/// missing type) columns anywhere; every other column a numeric covariate.
Dataset load_csv(const std::string& path, const CsvSchema& schema);

/// Inverse of load_csv; round-trips bit-exactly.
void save_csv(const Dataset& dataset, const std::string& path);

/// Dummy-code a categorical column: one 0/1 column per non-baseline level
/// (levels in sorted order), baseline rows all-zero.
struct OneHotResult {
  std::vector<std::string> level_names;          // non-baseline, sorted
  std::vector<std::vector<double>> columns;      // one per level
};
OneHotResult one_hot_encode(const std::vector<std::string>& raw,
                            const std::string& baseline);

/// Disjoint random partition with |test| = n_test. When
/// exclude_censored_from_test is set, only uncensored rows are eligible for
/// the test set.
std::pair<Dataset, Dataset> train_test_split(const Dataset& dataset,
                                             std::size_t n_test,
                                             RngStream& rng,
                                             bool exclude_censored_from_test);

}  // namespace wdr
