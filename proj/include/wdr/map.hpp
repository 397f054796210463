#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "wdr/data.hpp"
#include "wdr/model.hpp"
#include "wdr/rng.hpp"

namespace wdr {

enum class RPrior {
  GammaShrink,  // Gamma(0.01/K, 1/0.01)
  GammaUnit,    // Gamma(1/K, 1)
  L2,           // -l2_weight * ||r||_2
};

struct MapConfig {
  int M = 10;                 // Monte-Carlo rate draws per observation
  double learning_rate = 0.05;
  int minibatch_size = 100;
  int n_epochs = 200;
  int K = 10;
  RPrior r_prior = RPrior::GammaUnit;
  double l2_weight = 0.001;
  double student_t_dof = 3.0;
  double grad_clip = 100.0;
  /// Per-coordinate adaptive scaling (Adam-style moments) on top of the
  /// 1/sqrt(epoch) schedule; plain SGD when false.
  bool adaptive = false;
  std::uint64_t seed = 1;
};

/// Point-estimate parameters; a and r live on the log scale so ascent is
/// unconstrained.
struct MapParams {
  double log_a = 0.0;
  Eigen::MatrixXd beta;    // P x (J*K)
  Eigen::MatrixXd log_r;   // J x K

  int J() const { return static_cast<int>(log_r.rows()); }
  int K() const { return static_cast<int>(log_r.cols()); }
  int P() const { return static_cast<int>(beta.rows()); }
  double a() const { return std::exp(log_a); }
  double r(int j, int k) const { return std::exp(log_r(j, k)); }

  static MapParams init(int J, int K, int P);
  /// Same JSON schema as ModelState (ARD/concentration fields absent).
  std::string to_json() const;
  static MapParams from_json(const std::string& text);
  ModelState to_model_state() const;
};

/// Gradient in the optimizer's coordinates (log a, beta, log r).
struct MapGradient {
  double d_log_a = 0.0;
  Eigen::MatrixXd d_beta;
  Eigen::MatrixXd d_log_r;
  double squared_norm() const;
};

/// M x (J*K) matrix of rate draws lambda~ ~ Gamma(r_jk, 1) shared between
/// likelihood and gradient evaluations (common random numbers).
Eigen::MatrixXd sample_lambda_tilde(const MapParams& params, int M,
                                    RngStream& rng);

/// Per-draw log p_t and log p_y for one observation (case table of the
/// marginalized likelihood). Throws on both-missing rows.
struct LikelihoodTerms {
  std::vector<double> log_pt;
  std::vector<double> log_py;
};
LikelihoodTerms per_observation_likelihood_terms(
    const MapParams& params, const Observation& obs,
    const Eigen::MatrixXd& lambda_tilde_draws);

/// log[(1/M) sum_m p_t p_y] for one observation; -inf when every draw
/// underflows.
double log_mean_likelihood(const MapParams& params, const Observation& obs,
                           const Eigen::MatrixXd& lambda_tilde_draws);

double log_prior(const MapParams& params, const MapConfig& config);

/// Minibatch estimate of the log posterior: data term scaled by
/// total_n / |batch| plus the full prior.
double log_posterior_estimate(const MapParams& params, const Dataset& data,
                              std::span<const std::size_t> batch,
                              std::size_t total_n, const MapConfig& config,
                              RngStream& rng);

/// Same estimate with caller-supplied draws (one matrix per batch row).
double log_posterior_with_draws(const MapParams& params, const Dataset& data,
                                std::span<const std::size_t> batch,
                                std::size_t total_n, const MapConfig& config,
                                std::span<const Eigen::MatrixXd> draws);

/// Self-normalized score-function gradient of the data term for one
/// observation, accumulated into `grad` (natural a/beta derivatives are
/// converted through the log reparameterization). The weights w_m are
/// softmax of the per-draw log likelihoods.
void accumulate_observation_gradient(const MapParams& params,
                                     const Observation& obs,
                                     const Eigen::MatrixXd& lambda_tilde_draws,
                                     MapGradient& grad);

/// Gradient over (log a, beta) only, with frozen draws; matches finite
/// differences of log_posterior_with_draws.
MapGradient grad_a_beta_with_draws(const MapParams& params, const Dataset& data,
                                   std::span<const std::size_t> batch,
                                   std::size_t total_n, const MapConfig& config,
                                   std::span<const Eigen::MatrixXd> draws);

/// Full minibatch gradient (fresh draws, prior included).
MapGradient grad_log_posterior(const MapParams& params, const Dataset& data,
                               std::span<const std::size_t> batch,
                               std::size_t total_n, const MapConfig& config,
                               RngStream& rng);

struct MapFit {
  MapParams params;
  std::vector<double> epoch_log_posterior;
};

/// Stochastic gradient ascent with 1/sqrt(epoch) decay and L2 gradient
/// clipping; deterministic given config.seed.
MapFit fit_map(const Dataset& dataset, const MapConfig& config);

double digamma(double x);

}  // namespace wdr
