#include "wdr/synth.hpp"

#include <cmath>
#include <json.hpp>

#include "wdr/distributions.hpp"

namespace wdr {

ScenarioSpec ScenarioSpec::scenario(int which) {
  ScenarioSpec s;
  s.beta = {{1.0, -1.0, 0.5}, {-0.5, 1.0, -1.0}};
  if (which == 1) {
    s.rate_maps = {RateMap::Exp, RateMap::Exp};
    s.censor_time = 2.1;
  } else if (which == 2) {
    s.rate_maps = {RateMap::Cosh, RateMap::AbsSinh};
    s.censor_time = 1.3;
  } else {
    throw ParameterError("ScenarioSpec: scenario must be 1 or 2");
  }
  return s;
}

double ScenarioSpec::rate(int j, std::span<const double> x) const {
  double z = 0.0;
  for (std::size_t g = 0; g < x.size(); ++g) z += x[g] * beta[j][g];
  switch (rate_maps[j]) {
    case RateMap::Exp:
      return std::exp(z);
    case RateMap::Cosh:
      return std::cosh(z);
    case RateMap::AbsSinh:
      return std::fabs(std::sinh(z));
    case RateMap::Custom:
      return custom[j](z);
  }
  return 0.0;
}

std::string ScenarioSpec::to_json() const {
  nlohmann::json doc;
  doc["J"] = J;
  std::vector<std::string> maps;
  for (RateMap m : rate_maps) {
    switch (m) {
      case RateMap::Exp: maps.emplace_back("exp"); break;
      case RateMap::Cosh: maps.emplace_back("cosh"); break;
      case RateMap::AbsSinh: maps.emplace_back("abs_sinh"); break;
      case RateMap::Custom: maps.emplace_back("custom"); break;
    }
  }
  doc["rate_maps"] = maps;
  doc["a"] = a;
  doc["beta"] = beta;
  doc["dim"] = dim;
  doc["censor_time"] = censor_time;
  doc["n"] = n;
  return doc.dump();
}

SyntheticData generate(const ScenarioSpec& scenario, RngStream& rng) {
  if (!(scenario.censor_time > 0.0))
    throw ParameterError("generate: censor_time must be positive");
  SyntheticData out;
  out.dataset.n_risks = scenario.J;
  for (int g = 0; g < scenario.dim; ++g)
    out.dataset.feature_names.push_back("x" + std::to_string(g + 1));
  out.truth.latent_times.reserve(scenario.n);
  out.truth.true_event.reserve(scenario.n);
  for (std::size_t i = 0; i < scenario.n; ++i) {
    Observation obs;
    obs.x.resize(scenario.dim);
    for (int g = 0; g < scenario.dim; ++g) obs.x[g] = rng.uniform();
    std::vector<double> latent(scenario.J);
    int winner = 0;
    for (int j = 0; j < scenario.J; ++j) {
      latent[j] = sample_weibull(scenario.a, scenario.rate(j, obs.x), rng);
      if (latent[j] < latent[winner]) winner = j;
    }
    if (latent[winner] < scenario.censor_time) {
      obs.time = TimeStatus::observed(latent[winner]);
      obs.event = EventStatus::known(winner + 1);
    } else {
      obs.time = TimeStatus::right_censored(scenario.censor_time);
      obs.event = EventStatus::missing();
    }
    out.truth.latent_times.push_back(std::move(latent));
    out.truth.true_event.push_back(winner + 1);
    out.dataset.observations.push_back(std::move(obs));
  }
  return out;
}

PaperProtocol replicate_paper_protocol(const ScenarioSpec& scenario,
                                       int n_partitions, RngStream& rng) {
  if (scenario.n != 2000)
    throw ParameterError("replicate_paper_protocol: n must be 2000");
  PaperProtocol out;
  out.full = generate(scenario, rng).dataset;
  for (int p = 0; p < n_partitions; ++p)
    out.partitions.push_back(train_test_split(out.full, 200, rng, true));
  const bool long_grid = scenario.censor_time > 2.0;
  out.evaluation_times = long_grid
                             ? std::vector<double>{0.4, 0.8, 1.2, 1.6, 2.0}
                             : std::vector<double>{0.4, 0.6, 0.8, 1.0, 1.2};
  return out;
}

}  // namespace wdr
