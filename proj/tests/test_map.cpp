#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "test_util.hpp"
#include "wdr/distributions.hpp"
#include "wdr/map.hpp"

using namespace wdr;
using namespace testutil;

namespace {

Observation obs_observed(std::vector<double> x, double t, int type) {
  Observation o;
  o.x = std::move(x);
  o.time = TimeStatus::observed(t);
  o.event = EventStatus::known(type);
  return o;
}

Observation obs_censored(std::vector<double> x, double t) {
  Observation o;
  o.x = std::move(x);
  o.time = TimeStatus::right_censored(t);
  o.event = EventStatus::missing();
  return o;
}

// Mixed dataset: J = 2, P = 2, every observation kind except both-missing.
Dataset mixed_dataset() {
  Dataset ds;
  ds.n_risks = 2;
  ds.feature_names = {"x1", "x2"};
  ds.observations.push_back(obs_observed({1.0, 0.4}, 0.9, 1));
  ds.observations.push_back(obs_observed({1.0, -1.2}, 2.1, 2));
  ds.observations.push_back(obs_censored({1.0, 0.1}, 1.5));
  Observation tm;  // observed time, unknown type
  tm.x = {1.0, 0.7};
  tm.time = TimeStatus::observed(0.6);
  tm.event = EventStatus::missing();
  ds.observations.push_back(tm);
  Observation ym;  // known type, missing time
  ym.x = {1.0, -0.3};
  ym.time = TimeStatus::missing();
  ym.event = EventStatus::known(2);
  ds.observations.push_back(ym);
  return ds;
}

MapParams typical_params(int J, int K, int P, std::uint64_t seed) {
  MapParams p = MapParams::init(J, K, P);
  RngStream rng(seed);
  p.log_a = 0.3;
  for (int g = 0; g < P; ++g)
    for (int c = 0; c < J * K; ++c) p.beta(g, c) = 0.6 * rng.normal();
  for (int j = 0; j < J; ++j)
    for (int k = 0; k < K; ++k) p.log_r(j, k) = 0.4 * rng.normal();
  return p;
}

}  // namespace

TEST_CASE("digamma matches reference values") {
  CHECK(digamma(1.0) == doctest::Approx(-0.5772156649015329).epsilon(1e-12));
  CHECK(digamma(0.5) == doctest::Approx(-1.9635100260214235).epsilon(1e-12));
  CHECK(digamma(5.0) == doctest::Approx(1.5061176684318003).epsilon(1e-12));
  CHECK(digamma(0.01) == doctest::Approx(-100.56088545786867).epsilon(1e-12));
  CHECK_THROWS_AS(digamma(0.0), ParameterError);
}

TEST_CASE("map params: init, json round trip, model-state view") {
  MapParams p = typical_params(2, 3, 2, 1);
  const MapParams q = MapParams::from_json(p.to_json());
  CHECK(q.log_a == doctest::Approx(p.log_a).epsilon(1e-14));
  for (int g = 0; g < 2; ++g)
    for (int c = 0; c < 6; ++c)
      CHECK(q.beta(g, c) == doctest::Approx(p.beta(g, c)).epsilon(1e-14));

  const ModelState s = p.to_model_state();
  CHECK(s.a == p.a());
  CHECK(s.r(1, 2) == doctest::Approx(p.r(1, 2)).epsilon(1e-14));
  CHECK(s.active == std::vector<std::uint8_t>(6, 1));

  const MapParams z = MapParams::init(2, 3, 2);
  CHECK(z.log_a == 0.0);
  CHECK(z.beta.isZero());
  CHECK(z.r(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("frozen-draw gradients match finite differences") {
  const Dataset ds = mixed_dataset();
  MapConfig cfg;
  cfg.K = 2;
  cfg.M = 6;
  MapParams p = typical_params(2, cfg.K, 2, 7);

  RngStream rng(11);
  std::vector<std::size_t> batch = {0, 1, 2, 3, 4};
  std::vector<Eigen::MatrixXd> draws;
  for (std::size_t b = 0; b < batch.size(); ++b)
    draws.push_back(sample_lambda_tilde(p, cfg.M, rng));

  auto lp = [&](const MapParams& q) {
    return log_posterior_with_draws(q, ds, batch, ds.size(), cfg, draws);
  };
  const MapGradient g = grad_a_beta_with_draws(p, ds, batch, ds.size(), cfg, draws);

  const double h = 1e-6;
  {
    MapParams up = p, dn = p;
    up.log_a += h;
    dn.log_a -= h;
    const double fd = (lp(up) - lp(dn)) / (2.0 * h);
    CHECK(g.d_log_a == doctest::Approx(fd).epsilon(1e-5));
  }
  for (int gi = 0; gi < p.P(); ++gi)
    for (int c = 0; c < p.J() * p.K(); ++c) {
      MapParams up = p, dn = p;
      up.beta(gi, c) += h;
      dn.beta(gi, c) -= h;
      const double fd = (lp(up) - lp(dn)) / (2.0 * h);
      CHECK(g.d_beta(gi, c) == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
    }
  CHECK(g.d_log_r.isZero());
}

TEST_CASE("monte-carlo likelihood converges to the closed-form marginal") {
  // J = K = P = 1: with lambda~ ~ Gamma(r, 1) the marginal likelihood is
  // exact: observed rows give a t^{a-1} e^z r (1 + t^a e^z)^{-(r+1)},
  // censored rows give (1 + T^a e^z)^{-r}.
  MapParams p = MapParams::init(1, 1, 1);
  p.log_a = std::log(1.8);
  p.beta(0, 0) = 0.5;
  p.log_r(0, 0) = std::log(0.7);
  const double a = 1.8, r = 0.7;

  Dataset ds;
  ds.n_risks = 1;
  ds.feature_names = {"x"};
  ds.observations.push_back(obs_observed({1.0}, 1.3, 1));
  ds.observations.push_back(obs_observed({-0.5}, 0.4, 1));
  ds.observations.push_back(obs_censored({0.8}, 2.0));

  auto closed_form = [&](const Observation& o) {
    const double z = o.x[0] * 0.5;
    const double c = std::pow(o.time.value, a) * std::exp(z);
    if (o.time.is_observed())
      return std::log(a) + (a - 1.0) * std::log(o.time.value) + z +
             std::log(r) - (r + 1.0) * std::log1p(c);
    return -r * std::log1p(c);
  };

  RngStream rng(5);
  const Eigen::MatrixXd big = sample_lambda_tilde(p, 2000000, rng);
  for (const auto& o : ds.observations)
    CHECK(log_mean_likelihood(p, o, big) ==
          doctest::Approx(closed_form(o)).epsilon(0.002));
}

TEST_CASE("score-function r-gradient matches the exact marginal gradient") {
  // Same closed-form setting; d/dr of the marginal log likelihood is
  // 1/r - log(1 + c) for observed rows and -log(1 + c) for censored rows.
  MapParams p = MapParams::init(1, 1, 1);
  p.log_a = std::log(1.8);
  p.beta(0, 0) = 0.5;
  p.log_r(0, 0) = std::log(0.7);
  const double a = 1.8, r = 0.7;

  Dataset ds;
  ds.n_risks = 1;
  ds.feature_names = {"x"};
  ds.observations.push_back(obs_observed({1.0}, 1.3, 1));
  ds.observations.push_back(obs_observed({-0.5}, 0.4, 1));
  ds.observations.push_back(obs_censored({0.8}, 2.0));

  double exact = 0.0;
  for (const auto& o : ds.observations) {
    const double c = std::pow(o.time.value, a) * std::exp(o.x[0] * 0.5);
    exact += (o.time.is_observed() ? 1.0 / r : 0.0) - std::log1p(c);
  }
  // GammaUnit prior on the log scale adds (1/K - 1) - r = -r.
  const double expect_log_r = exact * r + (1.0 - 1.0) - r;

  MapConfig cfg;
  cfg.K = 1;
  cfg.M = 400000;
  std::vector<std::size_t> batch = {0, 1, 2};
  RngStream rng(9);
  const MapGradient g =
      grad_log_posterior(p, ds, batch, ds.size(), cfg, rng);
  CHECK(g.d_log_r(0, 0) == doctest::Approx(expect_log_r).epsilon(0.05));
}

TEST_CASE("likelihood terms: case table and guards") {
  MapParams p = typical_params(2, 2, 2, 3);
  RngStream rng(4);
  const Eigen::MatrixXd draws = sample_lambda_tilde(p, 8, rng);

  Observation bad;
  bad.x = {0.0, 0.0};
  CHECK_THROWS_AS(per_observation_likelihood_terms(p, bad, draws),
                  ParameterError);

  // Known type with missing time: only the ratio term, always <= 0.
  Observation ym;
  ym.x = {1.0, 0.2};
  ym.time = TimeStatus::missing();
  ym.event = EventStatus::known(1);
  const auto terms = per_observation_likelihood_terms(p, ym, draws);
  for (double v : terms.log_pt) CHECK(v == 0.0);
  for (double v : terms.log_py) {
    CHECK(v <= 0.0);
    CHECK(std::isfinite(v));
  }

  // Censored row: exp term only, p_y = 1.
  const auto ct =
      per_observation_likelihood_terms(p, obs_censored({1.0, -0.4}, 1.2), draws);
  for (double v : ct.log_py) CHECK(v == 0.0);
  for (double v : ct.log_pt) CHECK(v <= 0.0);

  // Underflowed likelihood reports -inf instead of NaN.
  const Observation far = obs_observed({1.0, 0.0}, 1e300, 1);
  CHECK(log_mean_likelihood(p, far, draws) ==
        -std::numeric_limits<double>::infinity());
}

TEST_CASE("fit_map: determinism, guards, and monotone-ish objective") {
  Dataset ds;
  ds.n_risks = 1;
  ds.feature_names = {"(intercept)", "x"};
  RngStream gen(31);
  for (int i = 0; i < 200; ++i) {
    const double x = gen.normal();
    const double t = sample_weibull(2.0, std::exp(0.5 - 0.8 * x), gen);
    ds.observations.push_back(obs_observed({1.0, x}, t, 1));
  }

  MapConfig cfg;
  cfg.K = 1;
  cfg.M = 10;
  cfg.minibatch_size = 50;
  cfg.n_epochs = 30;
  cfg.seed = 77;
  const MapFit f1 = fit_map(ds, cfg);
  const MapFit f2 = fit_map(ds, cfg);
  CHECK(f1.params.log_a == f2.params.log_a);
  CHECK(f1.params.beta == f2.params.beta);
  CHECK(f1.epoch_log_posterior == f2.epoch_log_posterior);
  CHECK(f1.epoch_log_posterior.size() == 30);
  // Optimization made clear progress from the flat start.
  CHECK(f1.epoch_log_posterior.back() >
        f1.epoch_log_posterior.front() + 10.0);

  MapConfig bad = cfg;
  bad.M = 1;
  CHECK_THROWS_AS(fit_map(ds, bad), ParameterError);
  Dataset empty;
  CHECK_THROWS_AS(fit_map(empty, cfg), ParameterError);
  Dataset with_missing = ds;
  Observation bm;
  bm.x = {1.0, 0.0};
  with_missing.observations.push_back(bm);
  CHECK_THROWS_AS(fit_map(with_missing, cfg), ParameterError);
}

TEST_CASE("fit_map approaches the exact penalized-likelihood optimum") {
  // K = 1 toy with true a = 2, beta = (0.4, -0.9), gamma-mixed rates. The
  // exact marginal log posterior has a closed form here; its maximum for
  // this exact dataset, found by an external optimizer, is -295.479422 at
  // (a, b0, b1, r) = (1.8891, 0.1328, -0.9070, 1.2762). The Monte-Carlo
  // objective is an M-sample lower bound, so the fit lands within a small
  // gap of that optimum rather than on it.
  Dataset ds;
  ds.n_risks = 1;
  ds.feature_names = {"(intercept)", "x"};
  RngStream gen(41);
  for (int i = 0; i < 300; ++i) {
    const double x = gen.normal();
    const double lam = sample_gamma(1.0, std::exp(0.4 - 0.9 * x), gen);
    const double t = sample_weibull(2.0, lam, gen);
    ds.observations.push_back(obs_observed({1.0, x}, t, 1));
  }

  MapConfig cfg;
  cfg.K = 1;
  cfg.M = 400;
  cfg.minibatch_size = 300;
  cfg.n_epochs = 400;
  cfg.learning_rate = 0.02;
  cfg.adaptive = true;
  cfg.seed = 5;
  const MapFit fit = fit_map(ds, cfg);
  const double a = fit.params.a();
  const double b0 = fit.params.beta(0, 0);
  const double b1 = fit.params.beta(1, 0);
  const double r = fit.params.r(0, 0);

  double lp = 0.0;
  for (const auto& o : ds.observations) {
    const double z = b0 + b1 * o.x[1];
    const double t = o.time.value;
    const double c = std::pow(t, a) * std::exp(z);
    lp += std::log(a) + (a - 1.0) * std::log(t) + z + std::log(r) -
          (r + 1.0) * std::log1p(c);
  }
  lp += -r - 2.0 * std::log1p(b0 * b0 / 3.0) - 2.0 * std::log1p(b1 * b1 / 3.0);

  CHECK(lp > -295.479422 - 3.0);  // within a small gap of the true maximum
  CHECK(lp <= -295.479422 + 1e-6);  // never above it
  CHECK(a > 1.4);
  CHECK(a < 2.4);
  CHECK(b1 < -0.5);
  CHECK(r > 0.6);
  CHECK(r < 3.0);
}
