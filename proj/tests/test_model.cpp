#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "test_util.hpp"
#include "wdr/model.hpp"

using namespace wdr;

namespace {

// Small frozen state used by several tests: J = 2, K = 3, P = 2.
ModelState make_state() {
  ModelState s;
  s.a = 1.6;
  s.r.resize(2, 3);
  s.r << 0.4, 1.2, 0.05, 2.0, 0.7, 0.3;
  s.beta.resize(2, 6);
  s.beta << 0.5, -0.3, 1.1, -1.0, 0.2, 0.0, -0.8, 0.6, 0.0, 0.4, -0.5, 1.3;
  s.alpha = Eigen::MatrixXd::Ones(2, 6);
  s.gamma0 = Eigen::VectorXd::Ones(2);
  s.c0 = Eigen::VectorXd::Ones(2);
  s.active.assign(6, 1);
  return s;
}

}  // namespace

TEST_CASE("softplus is accurate and overflow-safe") {
  for (double x : {-30.0, -5.0, -0.1, 0.0, 0.1, 5.0, 30.0})
    CHECK(softplus(x) == doctest::Approx(std::log1p(std::exp(x))).epsilon(1e-14));
  CHECK(softplus(800.0) == 800.0);
  CHECK(softplus(-800.0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-300));
  CHECK(std::isfinite(softplus(700.0)));
  double prev = softplus(-40.0);
  for (double x = -39.0; x <= 40.0; x += 1.0) {
    CHECK(softplus(x) > prev);
    prev = softplus(x);
  }
}

TEST_CASE("prior sampling has the right shape and is reproducible") {
  HyperParams hp;
  hp.J = 3;
  hp.K = 4;
  RngStream rng(21);
  const ModelState s = sample_from_prior(hp, 5, rng);
  CHECK(s.J() == 3);
  CHECK(s.K() == 4);
  CHECK(s.P() == 5);
  CHECK(s.beta.cols() == 12);
  CHECK(s.active.size() == 12);
  CHECK(s.a > 0.0);
  CHECK((s.r.array() > 0.0).all());
  CHECK((s.alpha.array() > 0.0).all());
  CHECK((s.gamma0.array() > 0.0).all());
  CHECK((s.c0.array() > 0.0).all());

  RngStream rng2(21);
  const ModelState s2 = sample_from_prior(hp, 5, rng2);
  CHECK(s2.a == s.a);
  CHECK(s2.beta == s.beta);
}

TEST_CASE("model state json round trip is bit exact") {
  const ModelState s = make_state();
  const ModelState s2 = ModelState::from_json(s.to_json());
  CHECK(s2.a == s.a);
  CHECK(s2.r == s.r);
  CHECK(s2.beta == s.beta);
  CHECK(s2.alpha == s.alpha);
  CHECK(s2.gamma0 == s.gamma0);
  CHECK(s2.c0 == s.c0);
  CHECK(s2.active == s.active);
}

TEST_CASE("augmented log likelihood matches a brute-force evaluation") {
  const ModelState s = make_state();
  Dataset ds;
  ds.n_risks = 2;
  ds.feature_names = {"x1", "x2"};
  const std::vector<std::vector<double>> xs = {
      {1.0, -0.5}, {0.3, 0.8}, {-1.2, 0.1}, {0.0, 2.0}};
  for (const auto& x : xs) {
    Observation o;
    o.x = x;
    o.time = TimeStatus::observed(1.0);
    o.event = EventStatus::known(1);
    ds.observations.push_back(o);
  }

  AugmentedState aug;
  const int n = 4, JK = 6;
  aug.t_imputed.resize(n);
  aug.t_imputed << 0.7, 1.9, 0.2, 3.4;
  aug.log_t = aug.t_imputed.array().log();
  aug.y = {0, 1, 0, 1};
  aug.kappa = {2, 0, 1, 1};
  aug.lambda.resize(n, JK);
  RngStream rng(3);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < JK; ++c) aug.lambda(i, c) = 0.1 + rng.uniform();

  double expect = 0.0;
  for (int i = 0; i < n; ++i) {
    const int cell = aug.y[i] * 3 + aug.kappa[i];
    double total = 0.0;
    for (int c = 0; c < JK; ++c) total += aug.lambda(i, c);
    expect += std::log(aug.lambda(i, cell)) + std::log(s.a) +
              (s.a - 1.0) * std::log(aug.t_imputed(i)) -
              std::pow(aug.t_imputed(i), s.a) * total;
  }
  CHECK(log_joint_likelihood(s, aug, ds) == doctest::Approx(expect).epsilon(1e-12));

  // Inactive cells drop out of the rate total.
  ModelState s2 = s;
  s2.active[5] = 0;
  AugmentedState aug2 = aug;
  double expect2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const int cell = aug.y[i] * 3 + aug.kappa[i];
    double total = 0.0;
    for (int c = 0; c < 5; ++c) total += aug.lambda(i, c);
    expect2 += std::log(aug.lambda(i, cell)) + std::log(s.a) +
               (s.a - 1.0) * std::log(aug.t_imputed(i)) -
               std::pow(aug.t_imputed(i), s.a) * total;
  }
  CHECK(log_joint_likelihood(s2, aug2, ds) == doctest::Approx(expect2).epsilon(1e-12));
}

TEST_CASE("survival function: plug-in value, boundaries, monotonicity") {
  const ModelState s = make_state();
  const std::vector<double> x = {0.4, -1.1};

  for (int j : {0, 1}) {
    CHECK(survival_function(x, 0.0, s, j) == doctest::Approx(1.0));
    double expect = 0.0;
    const double t = 1.3;
    for (int k = 0; k < 3; ++k) {
      const double z = s.beta.col(s.cell(j, k)).dot(
          Eigen::Map<const Eigen::VectorXd>(x.data(), 2));
      expect -= s.r(j, k) * std::log1p(std::pow(t, s.a) * std::exp(z));
    }
    CHECK(survival_function(x, t, s, j) == doctest::Approx(std::exp(expect)).epsilon(1e-12));

    double prev = 1.0;
    for (double tt = 0.1; tt <= 10.0; tt += 0.1) {
      const double sv = survival_function(x, tt, s, j);
      CHECK(sv <= prev + 1e-15);
      CHECK(sv >= 0.0);
      prev = sv;
    }
  }
}

TEST_CASE("hazard is the negative log-survival derivative") {
  const ModelState s = make_state();
  const std::vector<double> x = {0.4, -1.1};
  for (int j : {0, 1}) {
    for (double t : {0.3, 1.0, 2.7}) {
      const double h = 1e-6 * t;
      const double fd = (std::log(survival_function(x, t - h, s, j)) -
                         std::log(survival_function(x, t + h, s, j))) /
                        (2.0 * h);
      CHECK(hazard_function(x, t, s, j) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("survival equals exp of minus integrated hazard") {
  const ModelState s = make_state();
  const std::vector<double> x = {-0.2, 0.9};
  // Composite Simpson on [0, 2] with a fine grid.
  const int nseg = 20000;
  const double t1 = 2.0, h = t1 / nseg;
  double integral = hazard_function(x, 0.0, s, 0) + hazard_function(x, t1, s, 0);
  for (int i = 1; i < nseg; ++i)
    integral += (i % 2 == 1 ? 4.0 : 2.0) * hazard_function(x, i * h, s, 0);
  integral *= h / 3.0;
  CHECK(std::exp(-integral) ==
        doctest::Approx(survival_function(x, t1, s, 0)).epsilon(1e-6));
}

TEST_CASE("shape at most one gives a non-increasing hazard") {
  ModelState s = make_state();
  s.a = 0.8;
  const std::vector<double> x = {0.1, 0.2};
  double prev = std::numeric_limits<double>::infinity();
  for (double t = 0.01; t <= 5.0; t += 0.01) {
    const double h = hazard_function(x, t, s, 0);
    CHECK(h <= prev * (1.0 + 1e-12));
    prev = h;
  }
  // a = 1 at t = 0 still yields the finite limit sum_k r e^z.
  s.a = 1.0;
  double expect = 0.0;
  for (int k = 0; k < 3; ++k)
    expect += s.r(0, k) * std::exp(s.beta.col(s.cell(0, k))
                                       .dot(Eigen::Map<const Eigen::VectorXd>(
                                           x.data(), 2)));
  CHECK(hazard_function(x, 0.0, s, 0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("extreme linear predictors stay finite") {
  ModelState s = make_state();
  s.beta.setConstant(350.0);  // x'beta = 700 with x = (1, 1)
  const std::vector<double> xp = {1.0, 1.0};
  const double sv = survival_function(xp, 1.0, s, 0);
  CHECK(std::isfinite(sv));
  CHECK(sv >= 0.0);
  CHECK(sv <= 1.0);
  CHECK(std::isfinite(hazard_function(xp, 1.0, s, 0)));

  s.beta.setConstant(-350.0);
  const double sv2 = survival_function(xp, 1.0, s, 0);
  CHECK(sv2 == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(hazard_function(xp, 1.0, s, 0) >= 0.0);
}
