#include "wdr/map.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>

#include "wdr/distributions.hpp"

namespace wdr {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double logsumexp(std::span<const double> v) {
  double mx = -kInf;
  for (double x : v) mx = std::max(mx, x);
  if (mx == -kInf) return -kInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}
}  // namespace

double digamma(double x) {
  if (!(x > 0.0)) throw ParameterError("digamma: x must be positive");
  double result = 0.0;
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 -
                    inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)));
  return result;
}

MapParams MapParams::init(int J, int K, int P) {
  MapParams p;
  p.log_a = 0.0;
  p.beta = Eigen::MatrixXd::Zero(P, J * K);
  p.log_r = Eigen::MatrixXd::Constant(J, K, -std::log(double(K)));
  return p;
}

std::string MapParams::to_json() const {
  nlohmann::json doc;
  doc["a"] = a();
  nlohmann::json rj = nlohmann::json::array();
  for (int j = 0; j < J(); ++j) {
    nlohmann::json row = nlohmann::json::array();
    for (int k = 0; k < K(); ++k) row.push_back(r(j, k));
    rj.push_back(std::move(row));
  }
  doc["r"] = rj;
  nlohmann::json bj = nlohmann::json::array();
  for (int g = 0; g < P(); ++g) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < J() * K(); ++c) row.push_back(beta(g, c));
    bj.push_back(std::move(row));
  }
  doc["beta"] = bj;
  return doc.dump();
}

MapParams MapParams::from_json(const std::string& text) {
  const ModelState s = ModelState::from_json(text);
  MapParams p;
  p.log_a = std::log(s.a);
  p.beta = s.beta;
  p.log_r = s.r.array().log();
  return p;
}

ModelState MapParams::to_model_state() const {
  ModelState s;
  s.a = a();
  s.r = log_r.array().exp();
  s.beta = beta;
  s.alpha = Eigen::MatrixXd::Ones(beta.rows(), beta.cols());
  s.gamma0 = Eigen::VectorXd::Ones(log_r.rows());
  s.c0 = Eigen::VectorXd::Ones(log_r.rows());
  s.active.assign(static_cast<std::size_t>(log_r.size()), 1);
  return s;
}

double MapGradient::squared_norm() const {
  return d_log_a * d_log_a + d_beta.squaredNorm() + d_log_r.squaredNorm();
}

Eigen::MatrixXd sample_lambda_tilde(const MapParams& params, int M,
                                    RngStream& rng) {
  const int JK = params.J() * params.K();
  Eigen::MatrixXd draws(M, JK);
  for (int m = 0; m < M; ++m)
    for (int c = 0; c < JK; ++c)
      draws(m, c) = sample_gamma(params.r(c / params.K(), c % params.K()),
                                 1.0, rng);
  return draws;
}

LikelihoodTerms per_observation_likelihood_terms(
    const MapParams& params, const Observation& obs,
    const Eigen::MatrixXd& lambda_tilde_draws) {
  if (obs.both_missing())
    throw ParameterError("MAP likelihood undefined for both-missing rows");
  const int K = params.K();
  const int JK = params.J() * K;
  const int M = static_cast<int>(lambda_tilde_draws.rows());
  const double a = params.a();
  Eigen::VectorXd expz(JK);
  for (int c = 0; c < JK; ++c) {
    double z = 0.0;
    for (std::size_t g = 0; g < obs.x.size(); ++g)
      z += obs.x[g] * params.beta(static_cast<int>(g), c);
    expz(c) = std::exp(z);
  }
  LikelihoodTerms terms;
  terms.log_pt.resize(M);
  terms.log_py.resize(M);
  for (int m = 0; m < M; ++m) {
    double S = 0.0;
    for (int c = 0; c < JK; ++c) S += lambda_tilde_draws(m, c) * expz(c);
    if (obs.time.is_observed()) {
      const double t = obs.time.value;
      terms.log_pt[m] = std::log(a) + (a - 1.0) * std::log(t) + std::log(S) -
                        std::pow(t, a) * S;
    } else if (obs.time.is_censored()) {
      terms.log_pt[m] = -std::pow(obs.time.value, a) * S;
    } else {
      terms.log_pt[m] = 0.0;
    }
    if (obs.event.is_known()) {
      const int j = *obs.event.type - 1;
      double Sy = 0.0;
      for (int k = 0; k < K; ++k)
        Sy += lambda_tilde_draws(m, j * K + k) * expz(j * K + k);
      terms.log_py[m] = std::log(Sy) - std::log(S);
    } else {
      terms.log_py[m] = 0.0;
    }
  }
  return terms;
}

double log_mean_likelihood(const MapParams& params, const Observation& obs,
                           const Eigen::MatrixXd& lambda_tilde_draws) {
  const auto terms = per_observation_likelihood_terms(params, obs,
                                                      lambda_tilde_draws);
  const int M = static_cast<int>(terms.log_pt.size());
  std::vector<double> lp(M);
  for (int m = 0; m < M; ++m) lp[m] = terms.log_pt[m] + terms.log_py[m];
  const double lse = logsumexp(lp);
  return lse == -kInf ? -kInf : lse - std::log(double(M));
}

double log_prior(const MapParams& params, const MapConfig& config) {
  double lp = 0.0;
  const double nu = config.student_t_dof;
  for (int c = 0; c < params.J() * params.K(); ++c)
    for (int g = 0; g < params.P(); ++g) {
      const double b = params.beta(g, c);
      lp += -0.5 * (nu + 1.0) * std::log1p(b * b / nu);
    }
  const int K = params.K();
  switch (config.r_prior) {
    case RPrior::GammaShrink:
      for (int j = 0; j < params.J(); ++j)
        for (int k = 0; k < K; ++k)
          lp += (0.01 / K - 1.0) * params.log_r(j, k) - 0.01 * params.r(j, k);
      break;
    case RPrior::GammaUnit:
      for (int j = 0; j < params.J(); ++j)
        for (int k = 0; k < K; ++k)
          lp += (1.0 / K - 1.0) * params.log_r(j, k) - params.r(j, k);
      break;
    case RPrior::L2: {
      double s = 0.0;
      for (int j = 0; j < params.J(); ++j)
        for (int k = 0; k < K; ++k) s += params.r(j, k) * params.r(j, k);
      lp += -config.l2_weight * std::sqrt(s);
      break;
    }
  }
  return lp;
}

double log_posterior_with_draws(const MapParams& params, const Dataset& data,
                                std::span<const std::size_t> batch,
                                std::size_t total_n, const MapConfig& config,
                                std::span<const Eigen::MatrixXd> draws) {
  double data_term = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const double lml =
        log_mean_likelihood(params, data.observations[batch[b]], draws[b]);
    if (lml == -kInf) continue;  // every draw underflowed; skip the row
    data_term += lml;
  }
  const double scale = double(total_n) / double(batch.size());
  return scale * data_term + log_prior(params, config);
}

double log_posterior_estimate(const MapParams& params, const Dataset& data,
                              std::span<const std::size_t> batch,
                              std::size_t total_n, const MapConfig& config,
                              RngStream& rng) {
  std::vector<Eigen::MatrixXd> draws;
  draws.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b)
    draws.push_back(sample_lambda_tilde(params, config.M, rng));
  return log_posterior_with_draws(params, data, batch, total_n, config, draws);
}

void accumulate_observation_gradient(const MapParams& params,
                                     const Observation& obs,
                                     const Eigen::MatrixXd& lambda_tilde_draws,
                                     MapGradient& grad) {
  const int K = params.K();
  const int JK = params.J() * K;
  const int M = static_cast<int>(lambda_tilde_draws.rows());
  const double a = params.a();
  Eigen::VectorXd expz(JK);
  for (int c = 0; c < JK; ++c) {
    double z = 0.0;
    for (std::size_t g = 0; g < obs.x.size(); ++g)
      z += obs.x[g] * params.beta(static_cast<int>(g), c);
    expz(c) = std::exp(z);
  }
  const auto terms =
      per_observation_likelihood_terms(params, obs, lambda_tilde_draws);
  std::vector<double> lp(M);
  for (int m = 0; m < M; ++m) lp[m] = terms.log_pt[m] + terms.log_py[m];
  const double lse = logsumexp(lp);
  if (lse == -kInf) return;  // skipped observation

  const int y = obs.event.is_known() ? *obs.event.type - 1 : -1;
  for (int m = 0; m < M; ++m) {
    const double w = std::exp(lp[m] - lse);  // self-normalized weight
    if (w == 0.0) continue;
    // Per-draw rates and sums.
    double S = 0.0, Sy = 0.0;
    for (int c = 0; c < JK; ++c) {
      const double rate = lambda_tilde_draws(m, c) * expz(c);
      S += rate;
      if (y >= 0 && c / K == y) Sy += rate;
    }
    // d/da of log(p_t p_y).
    double da = 0.0;
    if (obs.time.is_observed()) {
      const double t = obs.time.value;
      da = 1.0 / a + std::log(t) - std::pow(t, a) * std::log(t) * S;
    } else if (obs.time.is_censored()) {
      const double T = obs.time.value;
      da = -std::pow(T, a) * std::log(T) * S;
    }
    grad.d_log_a += w * da * a;  // chain rule through log a
    // d/dbeta_c: each case contributes a scalar multiple of rate * x.
    double horizon_term = 0.0;  // coefficient of rate from the exp term
    double logS_term = 0.0;     // coefficient of rate/S from log S terms
    if (obs.time.is_observed()) {
      horizon_term = -std::pow(obs.time.value, a);
      logS_term = 1.0;
    } else if (obs.time.is_censored()) {
      horizon_term = -std::pow(obs.time.value, a);
    }
    if (y >= 0) logS_term -= 1.0;  // log p_y subtracts log S
    for (int c = 0; c < JK; ++c) {
      const double rate = lambda_tilde_draws(m, c) * expz(c);
      double coef = horizon_term * rate + logS_term * rate / S;
      if (y >= 0 && c / K == y) coef += rate / Sy;
      if (coef == 0.0) continue;
      const double wc = w * coef;
      for (std::size_t g = 0; g < obs.x.size(); ++g)
        grad.d_beta(static_cast<int>(g), c) += wc * obs.x[g];
    }
    // Score of the sampling density: d/dr log Gamma(lambda~; r, 1).
    for (int c = 0; c < JK; ++c) {
      const int j = c / K, k = c % K;
      const double score =
          std::log(lambda_tilde_draws(m, c)) - digamma(params.r(j, k));
      grad.d_log_r(j, k) += w * score * params.r(j, k);
    }
  }
}

namespace {

void add_prior_gradient(const MapParams& params, const MapConfig& config,
                        MapGradient& grad) {
  const double nu = config.student_t_dof;
  for (int c = 0; c < params.J() * params.K(); ++c)
    for (int g = 0; g < params.P(); ++g) {
      const double b = params.beta(g, c);
      grad.d_beta(g, c) += -(nu + 1.0) * b / (nu + b * b);
    }
  const int K = params.K();
  switch (config.r_prior) {
    case RPrior::GammaShrink:
      for (int j = 0; j < params.J(); ++j)
        for (int k = 0; k < K; ++k)
          grad.d_log_r(j, k) += (0.01 / K - 1.0) - 0.01 * params.r(j, k);
      break;
    case RPrior::GammaUnit:
      for (int j = 0; j < params.J(); ++j)
        for (int k = 0; k < K; ++k)
          grad.d_log_r(j, k) += (1.0 / K - 1.0) - params.r(j, k);
      break;
    case RPrior::L2: {
      double norm = 0.0;
      for (int j = 0; j < params.J(); ++j)
        for (int k = 0; k < K; ++k) norm += params.r(j, k) * params.r(j, k);
      norm = std::sqrt(norm);
      if (norm > 0.0)
        for (int j = 0; j < params.J(); ++j)
          for (int k = 0; k < K; ++k)
            grad.d_log_r(j, k) += -config.l2_weight * params.r(j, k) *
                                  params.r(j, k) / norm;
      break;
    }
  }
}

MapGradient zero_gradient(const MapParams& params) {
  MapGradient g;
  g.d_beta = Eigen::MatrixXd::Zero(params.P(), params.J() * params.K());
  g.d_log_r = Eigen::MatrixXd::Zero(params.J(), params.K());
  return g;
}

}  // namespace

MapGradient grad_a_beta_with_draws(const MapParams& params, const Dataset& data,
                                   std::span<const std::size_t> batch,
                                   std::size_t total_n, const MapConfig& config,
                                   std::span<const Eigen::MatrixXd> draws) {
  MapGradient grad = zero_gradient(params);
  for (std::size_t b = 0; b < batch.size(); ++b)
    accumulate_observation_gradient(params, data.observations[batch[b]],
                                    draws[b], grad);
  const double scale = double(total_n) / double(batch.size());
  grad.d_log_a *= scale;
  grad.d_beta *= scale;
  add_prior_gradient(params, config, grad);
  grad.d_log_r.setZero();  // the r-score is not a frozen-draw gradient
  return grad;
}

MapGradient grad_log_posterior(const MapParams& params, const Dataset& data,
                               std::span<const std::size_t> batch,
                               std::size_t total_n, const MapConfig& config,
                               RngStream& rng) {
  MapGradient grad = zero_gradient(params);
  for (std::size_t idx : batch) {
    const Eigen::MatrixXd draws = sample_lambda_tilde(params, config.M, rng);
    accumulate_observation_gradient(params, data.observations[idx], draws,
                                    grad);
  }
  const double scale = double(total_n) / double(batch.size());
  grad.d_log_a *= scale;
  grad.d_beta *= scale;
  grad.d_log_r *= scale;
  add_prior_gradient(params, config, grad);
  return grad;
}

MapFit fit_map(const Dataset& dataset, const MapConfig& config) {
  const std::size_t n = dataset.size();
  if (n == 0) throw ParameterError("fit_map: empty dataset");
  for (std::size_t i = 0; i < n; ++i)
    if (dataset.observations[i].both_missing())
      throw ParameterError("fit_map: row " + std::to_string(i) +
                           " has neither event time nor event type");
  if (config.M < 2) throw ParameterError("fit_map: M must be >= 2");
  if (config.minibatch_size < 1)
    throw ParameterError("fit_map: minibatch_size must be >= 1");

  const int P = static_cast<int>(dataset.n_features());
  MapParams params = MapParams::init(dataset.n_risks, config.K, P);
  RngStream rng(config.seed, 0);
  RngStream eval_rng = rng.substream(1);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  MapFit fit;
  // Adam-style first/second moments over the flattened coordinates.
  const int n_coords = 1 + static_cast<int>(params.beta.size() + params.log_r.size());
  Eigen::VectorXd mom1 = Eigen::VectorXd::Zero(n_coords);
  Eigen::VectorXd mom2 = Eigen::VectorXd::Zero(n_coords);
  long step_count = 0;
  for (int epoch = 1; epoch <= config.n_epochs; ++epoch) {
    const double lr = config.learning_rate / std::sqrt(double(epoch));
    // Fisher-Yates shuffle, deterministic in the stream.
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const std::size_t j =
          i + static_cast<std::size_t>(rng.uniform() * double(n - i));
      std::swap(order[i], order[std::min(j, n - 1)]);
    }
    for (std::size_t start = 0; start < n;
         start += static_cast<std::size_t>(config.minibatch_size)) {
      const std::size_t stop =
          std::min(n, start + static_cast<std::size_t>(config.minibatch_size));
      std::span<const std::size_t> batch(order.data() + start, stop - start);
      MapGradient grad =
          grad_log_posterior(params, dataset, batch, n, config, rng);
      const double norm = std::sqrt(grad.squared_norm());
      const double clip =
          norm > config.grad_clip ? config.grad_clip / norm : 1.0;
      if (!config.adaptive) {
        params.log_a += lr * clip * grad.d_log_a;
        params.beta += lr * clip * grad.d_beta;
        params.log_r += lr * clip * grad.d_log_r;
      } else {
        Eigen::VectorXd flat(n_coords);
        flat(0) = clip * grad.d_log_a;
        int at = 1;
        for (int c = 0; c < grad.d_beta.cols(); ++c)
          for (int g = 0; g < grad.d_beta.rows(); ++g)
            flat(at++) = clip * grad.d_beta(g, c);
        for (int k = 0; k < grad.d_log_r.cols(); ++k)
          for (int j = 0; j < grad.d_log_r.rows(); ++j)
            flat(at++) = clip * grad.d_log_r(j, k);
        ++step_count;
        mom1 = 0.9 * mom1 + 0.1 * flat;
        mom2 = 0.999 * mom2.array() + 0.001 * flat.array().square();
        const double bc1 = 1.0 - std::pow(0.9, double(step_count));
        const double bc2 = 1.0 - std::pow(0.999, double(step_count));
        const Eigen::VectorXd step =
            (mom1 / bc1).array() / ((mom2 / bc2).array().sqrt() + 1e-8);
        params.log_a += lr * step(0);
        at = 1;
        for (int c = 0; c < params.beta.cols(); ++c)
          for (int g = 0; g < params.beta.rows(); ++g)
            params.beta(g, c) += lr * step(at++);
        for (int k = 0; k < params.log_r.cols(); ++k)
          for (int j = 0; j < params.log_r.rows(); ++j)
            params.log_r(j, k) += lr * step(at++);
      }
    }
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    const double lp =
        log_posterior_estimate(params, dataset, all, n, config, eval_rng);
    if (std::isnan(lp))
      throw NumericError("fit_map: log posterior diverged at epoch " +
                         std::to_string(epoch));
    fit.epoch_log_posterior.push_back(lp);
  }
  fit.params = std::move(params);
  return fit;
}

}  // namespace wdr
