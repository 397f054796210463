#include "wdr/data.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace wdr {

TimeStatus TimeStatus::observed(double t) {
  if (!(t > 0.0)) throw ParseError("observed time must be strictly positive");
  return {Kind::Observed, t};
}

TimeStatus TimeStatus::right_censored(double t) {
  if (!(t > 0.0)) throw ParseError("censoring time must be strictly positive");
  return {Kind::RightCensored, t};
}

void Dataset::add_intercept() {
  if (includes_intercept) return;
  for (auto& obs : observations) obs.x.insert(obs.x.begin(), 1.0);
  feature_names.insert(feature_names.begin(), "(intercept)");
  includes_intercept = true;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e;
}

std::string row_msg(std::size_t row, const std::string& what) {
  return "row " + std::to_string(row) + ": " + what;
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split_csv_line(line);
  int time_col = -1, status_col = -1;
  Dataset ds;
  ds.n_risks = schema.n_risks;
  std::vector<int> cov_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "time")
      time_col = static_cast<int>(c);
    else if (header[c] == "status")
      status_col = static_cast<int>(c);
    else {
      cov_cols.push_back(static_cast<int>(c));
      ds.feature_names.push_back(header[c]);
    }
  }
  if (time_col < 0 || status_col < 0)
    throw ParseError(path + ": header must contain `time` and `status` columns");

  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError(row_msg(row, "expected " + std::to_string(header.size()) +
                                        " cells, got " + std::to_string(cells.size())));
    Observation obs;
    // time
    const std::string& tc = cells[time_col];
    std::optional<double> time;
    if (!tc.empty()) {
      double t;
      if (!parse_double(tc, t)) throw ParseError(row_msg(row, "bad time `" + tc + "`"));
      if (!(t > 0.0)) throw ParseError(row_msg(row, "time must be positive"));
      time = t;
    }
    // status
    const std::string& sc = cells[status_col];
    std::optional<int> status;
    if (!sc.empty()) {
      double sv;
      if (!parse_double(sc, sv) || sv != static_cast<int>(sv))
        throw ParseError(row_msg(row, "bad status `" + sc + "`"));
      const int s = static_cast<int>(sv);
      if (s < 0 || s > schema.n_risks)
        throw ParseError(row_msg(row, "status outside 0.." +
                                          std::to_string(schema.n_risks)));
      status = s;
    }
    if (time && status) {
      if (*status == 0) {
        obs.time = TimeStatus::right_censored(*time);
        obs.event = EventStatus::missing();
      } else {
        obs.time = TimeStatus::observed(*time);
        obs.event = EventStatus::known(*status);
      }
    } else if (!time && status && *status >= 1) {
      obs.time = TimeStatus::missing();
      obs.event = EventStatus::known(*status);
    } else if (time && !status) {
      obs.time = TimeStatus::observed(*time);
      obs.event = EventStatus::missing();
    } else {
      // Empty time with empty or zero status: nothing observed.
      obs.time = TimeStatus::missing();
      obs.event = EventStatus::missing();
    }
    obs.x.reserve(cov_cols.size());
    for (int c : cov_cols) {
      double v;
      if (!parse_double(cells[c], v))
        throw ParseError(row_msg(row, "bad covariate `" + cells[c] + "` in column " +
                                          ds.feature_names[obs.x.size()]));
      obs.x.push_back(v);
    }
    ds.observations.push_back(std::move(obs));
  }
  return ds;
}

void save_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << "time,status";
  for (const auto& name : dataset.feature_names) out << ',' << name;
  out << '\n';
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const auto& obs : dataset.observations) {
    if (!obs.time.is_missing()) out << fmt(obs.time.value);
    out << ',';
    if (obs.event.is_known())
      out << *obs.event.type;
    else if (obs.time.is_censored())
      out << 0;
    for (double v : obs.x) out << ',' << fmt(v);
    out << '\n';
  }
}

OneHotResult one_hot_encode(const std::vector<std::string>& raw,
                            const std::string& baseline) {
  std::map<std::string, int> levels;
  bool saw_baseline = false;
  for (const auto& v : raw) {
    if (v == baseline)
      saw_baseline = true;
    else
      levels.emplace(v, 0);
  }
  if (!saw_baseline)
    throw ParseError("one_hot_encode: baseline `" + baseline + "` not present");
  OneHotResult res;
  int idx = 0;
  for (auto& [name, col] : levels) {
    col = idx++;
    res.level_names.push_back(name);
  }
  res.columns.assign(levels.size(), std::vector<double>(raw.size(), 0.0));
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto it = levels.find(raw[i]);
    if (it != levels.end()) res.columns[it->second][i] = 1.0;
  }
  return res;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& dataset,
                                             std::size_t n_test,
                                             RngStream& rng,
                                             bool exclude_censored_from_test) {
  const std::size_t n = dataset.size();
  if (n_test >= n)
    throw ParseError("train_test_split: n_test must be smaller than n");
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < n; ++i) {
    if (!exclude_censored_from_test || dataset.observations[i].time.is_observed())
      eligible.push_back(i);
  }
  if (eligible.size() < n_test)
    throw ParseError("train_test_split: too few eligible rows for the test set");
  // Fisher-Yates over the eligible pool; first n_test go to test.
  for (std::size_t i = 0; i < n_test; ++i) {
    const std::size_t j =
        i + static_cast<std::size_t>(rng.uniform() * double(eligible.size() - i));
    std::swap(eligible[i], eligible[std::min(j, eligible.size() - 1)]);
  }
  std::vector<bool> in_test(n, false);
  for (std::size_t i = 0; i < n_test; ++i) in_test[eligible[i]] = true;

  Dataset train, test;
  train.n_risks = test.n_risks = dataset.n_risks;
  train.feature_names = test.feature_names = dataset.feature_names;
  train.includes_intercept = test.includes_intercept = dataset.includes_intercept;
  for (std::size_t i = 0; i < n; ++i)
    (in_test[i] ? test : train).observations.push_back(dataset.observations[i]);
  return {std::move(train), std::move(test)};
}

}  // namespace wdr
