#pragma once

#include <span>
#include <vector>

#include "wdr/model.hpp"
#include "wdr/rng.hpp"

namespace wdr {

/// Monte-Carlo cumulative incidence P(t_i <= t, y_i = j) for covariates x,
/// averaged over the given parameter draws and n_mc rate simulations per
/// draw. t may be +inf.
double estimate_cif(std::span<const double> x, double t,
                    std::span<const ModelState> draws, int j, int n_mc,
                    RngStream& rng);

/// CIF at every requested (event, time) pair with shared rate simulations,
/// so sum_j of the t=inf column is exactly 1. Returns values indexed
/// [event][time].
std::vector<std::vector<double>> estimate_cif_grid(
    std::span<const double> x, std::span<const double> times,
    std::span<const ModelState> draws, int n_mc, RngStream& rng);

/// t -> inf limit of the CIF: the probability that event j wins the race.
double event_probability(std::span<const double> x,
                         std::span<const ModelState> draws, int j, int n_mc,
                         RngStream& rng);

/// All J event probabilities from shared simulations; sums to 1 exactly.
std::vector<double> event_probabilities(std::span<const double> x,
                                        std::span<const ModelState> draws,
                                        int n_mc, RngStream& rng);

/// CDF at q of t ~ Weibull(a, sum_t lambda_t), lambda_t ~ Gamma(r_t, 1/b_t),
/// by the gamma-convolution series; the truncation M is the smallest M with
/// c * sum_{m<=M} delta_m >= mass_target.
struct SeriesCdfResult {
  double value = 0.0;
  int truncation = 0;
};
SeriesCdfResult gamma_convolution_cdf(double q, double a,
                                      std::span<const double> r_list,
                                      std::span<const double> b_list,
                                      double mass_target = 0.9999,
                                      int max_terms = 10000);

/// Inverse-CDF draw from the gamma-convolution event-time law (bracket
/// doubling followed by bisection).
double sample_event_time_series(double a, std::span<const double> r_list,
                                std::span<const double> b_list,
                                RngStream& rng,
                                double mass_target = 0.9999);

}  // namespace wdr
