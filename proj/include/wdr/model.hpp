#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wdr/data.hpp"
#include "wdr/rng.hpp"

namespace wdr {

/// log(1 + e^x) without overflow.
inline double softplus(double x) {
  if (x > 33.0) return x;
  if (x < -33.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

struct HyperParams {
  double a0 = 1.0, b0 = 1.0;           // ARD precision prior
  double e0 = 0.01, f0 = 0.01;         // gamma-process concentration prior
  double e1 = 0.01, f1 = 0.01;         // gamma-process scale prior
  int K = 10;                          // gamma-process truncation
  int J = 2;                           // number of competing risks
};

/// All model parameters. Sub-event atoms are addressed by the flat cell
/// index j*K + k; `beta` and `alpha` store one column per cell.
struct ModelState {
  double a = 1.0;                  // Weibull shape
  Eigen::MatrixXd r;               // J x K gamma-process weights
  Eigen::MatrixXd beta;            // P x (J*K) coefficients
  Eigen::MatrixXd alpha;           // P x (J*K) ARD precisions
  Eigen::VectorXd gamma0;          // J concentrations
  Eigen::VectorXd c0;              // J scales
  std::vector<std::uint8_t> active;  // J*K mask

  int J() const { return static_cast<int>(r.rows()); }
  int K() const { return static_cast<int>(r.cols()); }
  int P() const { return static_cast<int>(beta.rows()); }
  int cell(int j, int k) const { return j * K() + k; }
  bool is_active(int j, int k) const { return active[cell(j, k)] != 0; }

  std::string to_json() const;
  static ModelState from_json(const std::string& text);
};

/// Per-observation latent variables of the Gibbs sampler.
struct AugmentedState {
  Eigen::VectorXd t_imputed;       // n
  Eigen::VectorXd log_t;           // n, log of t_imputed
  std::vector<int> y;              // n, 0-based imputed event type
  std::vector<int> kappa;          // n, 0-based sub-event index
  Eigen::MatrixXd lambda;          // n x (J*K) rates
  Eigen::MatrixXd omega;           // n x (J*K) Polya-Gamma draws
  std::vector<int> m;              // J*K occupancy counts
  std::vector<int> l;              // J*K CRT table counts
  Eigen::VectorXd p;               // J*K probabilities p_jk

  int cell_of(std::size_t i, int K) const { return y[i] * K + kappa[i]; }
};

ModelState sample_from_prior(const HyperParams& hyper, int P, RngStream& rng);

/// Fully factorized augmented-data log likelihood:
/// sum_i [log lambda_{i,y_i,kappa_i} + log a + (a-1) log t_i
///        - t_i^a sum_{active cells} lambda_{i,cell}].
double log_joint_likelihood(const ModelState& state,
                            const AugmentedState& augmented,
                            const Dataset& dataset);

/// S_j(t) = prod_{active k} (1 + t^a e^{x'beta_jk})^{-r_jk}.
double survival_function(std::span<const double> x, double t,
                         const ModelState& state, int j);

/// h_j(t) = sum_{active k} a r_jk t^{a-1} / (t^a + e^{-x'beta_jk}).
double hazard_function(std::span<const double> x, double t,
                       const ModelState& state, int j);

}  // namespace wdr
