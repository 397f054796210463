#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <stdexcept>

#include "wdr/rng.hpp"

namespace wdr {

struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Weibull(a, lambda) with CDF F(t) = 1 - exp(-lambda * t^a), sampled by
/// inverse CDF.
double sample_weibull(double a, double lambda, RngStream& rng);

/// Weibull(a, lambda) restricted to (lower, upper); upper may be +inf.
/// Works with t^a differences directly so large lower bounds do not
/// underflow the conditioning mass.
double sample_truncated_weibull(double a, double lambda, double lower,
                                double upper, RngStream& rng);

/// Gamma(shape, scale) with mean shape*scale. Correct for shape < 1 via the
/// boosting identity Gamma(s) = Gamma(s+1) * U^{1/s}; draws that underflow
/// are clamped to the smallest positive normal double.
double sample_gamma(double shape, double scale, RngStream& rng);

/// Index j with probability exp(log_weights[j]) / sum_k exp(log_weights[k]),
/// normalized by log-sum-exp. Requires at least one finite weight.
int sample_categorical(std::span<const double> log_weights, RngStream& rng);

/// Chinese restaurant table count: l = sum_{i=1..n} Bernoulli(r / (r+i-1)).
int sample_crt(int n, double r, RngStream& rng);

/// Approximate Polya-Gamma PG(b, c) draw: the first `kPgExactTerms` terms of
/// the infinite gamma series are sampled exactly and the residual tail is
/// replaced by one gamma draw matching the tail's first two moments.
inline constexpr int kPgExactTerms = 5;
double sample_polya_gamma(double b, double c, RngStream& rng);

/// Closed-form PG(b, c) mean b/(2c) tanh(c/2) (limit b/4 at c = 0).
double polya_gamma_mean(double b, double c);
/// Closed-form PG(b, c) variance.
double polya_gamma_variance(double b, double c);

/// One stepping-out-and-shrinkage slice sampling transition on (0, inf),
/// initial width 1.0. The target must be unimodal; log_density must be
/// finite at x0.
double slice_sample_unimodal(const std::function<double(double)>& log_density,
                             double x0, RngStream& rng, double width = 1.0);

/// Draw from N(P^{-1} h, P^{-1}) given the precision matrix P and linear
/// term h, via Cholesky factorization (no explicit inverse).
Eigen::VectorXd sample_mvn_from_precision(const Eigen::VectorXd& h,
                                          const Eigen::MatrixXd& precision,
                                          RngStream& rng);

}  // namespace wdr
