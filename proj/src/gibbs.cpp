#include "wdr/gibbs.hpp"

#include <algorithm>
#include <cmath>

#include "wdr/distributions.hpp"

namespace wdr {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

GibbsSampler::GibbsSampler(const Dataset& dataset, const HyperParams& hyper,
                           RngStream rng)
    : dataset_(dataset), hyper_(hyper), rng_(rng) {
  const std::size_t n = dataset.size();
  if (n == 0) throw ParameterError("GibbsSampler: empty dataset");
  const int P = static_cast<int>(dataset.n_features());
  X_.resize(static_cast<Eigen::Index>(n), P);
  y_known_.resize(n);
  t_observed_.resize(n);
  censor_lower_.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const Observation& obs = dataset.observations[i];
    if (static_cast<int>(obs.x.size()) != P)
      throw ParameterError("GibbsSampler: inconsistent covariate length");
    for (int g = 0; g < P; ++g) X_(static_cast<Eigen::Index>(i), g) = obs.x[g];
    y_known_[i] = obs.event.is_known() ? *obs.event.type - 1 : -1;
    t_observed_[i] = obs.time.is_observed() ? 1 : 0;
    // Both-missing rows behave as right-censored at 0.
    censor_lower_(static_cast<Eigen::Index>(i)) =
        obs.time.is_missing() ? 0.0 : obs.time.value;
  }
  state_ = sample_from_prior(hyper_, P, rng_);
  init_augmented();
}

void GibbsSampler::init_augmented() {
  const std::size_t n = dataset_.size();
  const int JK = hyper_.J * hyper_.K;
  augmented_.t_imputed.resize(static_cast<Eigen::Index>(n));
  augmented_.log_t.resize(static_cast<Eigen::Index>(n));
  augmented_.y.assign(n, 0);
  augmented_.kappa.assign(n, 0);
  augmented_.lambda.resize(static_cast<Eigen::Index>(n), JK);
  augmented_.omega = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), JK);
  augmented_.m.assign(JK, 0);
  augmented_.l.assign(JK, 0);
  augmented_.p = Eigen::VectorXd::Constant(JK, 0.5);

  sync_linear_predictors();
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    augmented_.t_imputed(ii) =
        t_observed_[i] ? censor_lower_(ii) : censor_lower_(ii) + 1.0;
    augmented_.log_t(ii) = std::log(augmented_.t_imputed(ii));
  }
  // Initial rates straight from the prior conditional with n_ijk = 0.
  step_sample_lambda();
  step_subevent_assignment();
}

void GibbsSampler::set_state(ModelState state) {
  state_ = std::move(state);
  sync_linear_predictors();
}

void GibbsSampler::sync_linear_predictors() { Z_ = X_ * state_.beta; }

void GibbsSampler::step_subevent_assignment() {
  const std::size_t n = dataset_.size();
  const int K = hyper_.K;
  const int JK = hyper_.J * K;
  std::fill(augmented_.m.begin(), augmented_.m.end(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const int j_known = y_known_[i];
    const int c_lo = j_known >= 0 ? j_known * K : 0;
    const int c_hi = j_known >= 0 ? c_lo + K : JK;
    double total = 0.0;
    for (int c = c_lo; c < c_hi; ++c)
      if (state_.active[c]) total += augmented_.lambda(ii, c);
    if (!(total > 0.0))
      throw NumericError("step_subevent_assignment: all rates zero for row " +
                         std::to_string(i));
    double target = rng_.uniform() * total;
    int chosen = c_hi - 1;
    double acc = 0.0;
    for (int c = c_lo; c < c_hi; ++c) {
      if (!state_.active[c]) continue;
      acc += augmented_.lambda(ii, c);
      if (target < acc) {
        chosen = c;
        break;
      }
    }
    augmented_.y[i] = chosen / K;
    augmented_.kappa[i] = chosen % K;
    ++augmented_.m[chosen];
  }
}

void GibbsSampler::step_augment_time() {
  const std::size_t n = dataset_.size();
  const int JK = hyper_.J * hyper_.K;
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (t_observed_[i]) continue;
    double rate_sum = 0.0;
    for (int c = 0; c < JK; ++c)
      if (state_.active[c]) rate_sum += augmented_.lambda(ii, c);
    augmented_.t_imputed(ii) = sample_truncated_weibull(
        state_.a, rate_sum, censor_lower_(ii), kInf, rng_);
    augmented_.log_t(ii) = std::log(augmented_.t_imputed(ii));
  }
}

void GibbsSampler::step_sample_lambda() {
  const std::size_t n = dataset_.size();
  const int K = hyper_.K;
  const int JK = hyper_.J * K;
  const double a = state_.a;
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double u = a * augmented_.log_t(ii);
    const int cell_i = augmented_.cell_of(i, K);
    for (int c = 0; c < JK; ++c) {
      const double z = Z_(ii, c);
      const double shape = state_.r(c / K, c % K) + (c == cell_i ? 1.0 : 0.0);
      // e^z / (1 + t^a e^z) = exp(z - softplus(z + a log t)); clamp so the
      // scale survives extreme imputed times.
      const double scale = std::max(std::exp(z - softplus(z + u)),
                                    std::numeric_limits<double>::min());
      augmented_.lambda(ii, c) = sample_gamma(shape, scale, rng_);
    }
  }
  // Step 3 redraws every atom, so pruned atoms rejoin the race here.
  std::fill(state_.active.begin(), state_.active.end(), 1);
}

double GibbsSampler::shape_log_conditional(double a) const {
  const std::size_t n = dataset_.size();
  const int K = hyper_.K;
  const int JK = hyper_.J * K;
  double lp = static_cast<double>(n) * std::log(a);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double lt = augmented_.log_t(ii);
    const double u = a * lt;
    lp += (a - 1.0) * lt;
    const int cell_i = augmented_.cell_of(i, K);
    for (int c = 0; c < JK; ++c) {
      const double w = state_.r(c / K, c % K) + (c == cell_i ? 1.0 : 0.0);
      lp -= w * softplus(u + Z_(ii, c));
    }
  }
  if (a_log_prior_) lp += a_log_prior_(a);
  return lp;
}

void GibbsSampler::step_sample_shape() {
  state_.a = slice_sample_unimodal(
      [this](double a) { return a > 0.0 ? shape_log_conditional(a) : -kInf; },
      state_.a, rng_);
}

void GibbsSampler::step_sample_beta() {
  const std::size_t n = dataset_.size();
  const int K = hyper_.K;
  const int JK = hyper_.J * K;
  const int P = state_.P();
  const double a = state_.a;
  Eigen::MatrixXd precision(P, P);
  Eigen::VectorXd h(P);
  for (int c = 0; c < JK; ++c) {
    const double r = state_.r(c / K, c % K);
    precision.setZero();
    precision.diagonal() = state_.alpha.col(c);
    h.setZero();
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double ni = augmented_.cell_of(i, K) == c ? 1.0 : 0.0;
      const double lt = augmented_.log_t(ii);
      const double omega =
          sample_polya_gamma(r + ni, Z_(ii, c) + a * lt, rng_);
      augmented_.omega(ii, c) = omega;
      const auto xi = X_.row(ii).transpose();
      precision.selfadjointView<Eigen::Lower>().rankUpdate(xi, omega);
      h.noalias() -= (a * omega * lt + 0.5 * (r - ni)) * xi;
    }
    precision.triangularView<Eigen::StrictlyUpper>() =
        precision.transpose().triangularView<Eigen::StrictlyUpper>();
    state_.beta.col(c) = sample_mvn_from_precision(h, precision, rng_);
    Z_.col(c) = X_ * state_.beta.col(c);
  }
}

void GibbsSampler::step_sample_alpha() {
  const int JK = hyper_.J * hyper_.K;
  const int P = state_.P();
  for (int c = 0; c < JK; ++c) {
    for (int g = 0; g < P; ++g) {
      const double b = state_.beta(g, c);
      state_.alpha(g, c) = sample_gamma(
          hyper_.a0 + 0.5, 1.0 / (hyper_.b0 + 0.5 * b * b), rng_);
    }
  }
}

void GibbsSampler::step_sample_r_gamma0() {
  const std::size_t n = dataset_.size();
  const int K = hyper_.K;
  const double a = state_.a;
  for (int j = 0; j < hyper_.J; ++j) {
    int l_sum = 0;
    double log1mp_sum = 0.0;
    for (int k = 0; k < K; ++k) {
      const int c = j * K + k;
      // n_ijk is 0/1, so CRT(n_ijk, r) is n_ijk itself; the table count
      // reduces to the occupancy.
      const int n2_sum = augmented_.m[c];
      augmented_.l[c] = sample_crt(n2_sum, state_.gamma0(j) / K, rng_);
      l_sum += augmented_.l[c];
      double q = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        q += softplus(a * augmented_.log_t(ii) + Z_(ii, c));
      }
      state_.r(j, k) = std::min(
          sample_gamma(n2_sum + state_.gamma0(j) / K,
                       1.0 / (state_.c0(j) + q), rng_),
          1e290);
      double p = q / (state_.c0(j) + q);
      p = std::min(p, 1.0 - 1e-12);
      augmented_.p(c) = p;
      // log(1 - p) = -log1p(q / c0), exact even when p is near 1; falls
      // back to the log difference when the ratio overflows (tiny c0).
      const double ratio = q / state_.c0(j);
      log1mp_sum += std::isfinite(ratio)
                        ? -std::log1p(ratio)
                        : std::log(state_.c0(j)) - std::log(q);
    }
    state_.gamma0(j) = sample_gamma(
        hyper_.e0 + l_sum, 1.0 / (hyper_.f0 - log1mp_sum / K), rng_);
  }
}

void GibbsSampler::step_sample_c0() {
  for (int j = 0; j < hyper_.J; ++j) {
    const double r_sum = state_.r.row(j).sum();
    state_.c0(j) = sample_gamma(hyper_.e1 + state_.gamma0(j),
                                1.0 / (hyper_.f1 + r_sum), rng_);
  }
}

void GibbsSampler::step_prune() {
  const int JK = hyper_.J * hyper_.K;
  for (int c = 0; c < JK; ++c) {
    if (augmented_.m[c] == 0) {
      state_.active[c] = 0;
      augmented_.lambda.col(c).setZero();
    }
  }
}

void GibbsSampler::sweep() {
  // The rate update leads the sweep so that the collapsed parameter steps
  // (shape, coefficients, weights) never leave a stale lambda behind for the
  // next assignment: lambda is refreshed under the new parameters before it
  // is used again. This ordering makes the whole cycle exactly invariant.
  step_sample_lambda();
  step_subevent_assignment();
  step_augment_time();
  step_sample_shape();
  step_sample_beta();
  step_sample_alpha();
  step_sample_r_gamma0();
  step_sample_c0();
  step_prune();
}

double GibbsSampler::log_joint() const {
  return log_joint_likelihood(state_, augmented_, dataset_);
}

std::vector<int> PosteriorDraws::majority_active_counts() const {
  if (states.empty()) return {};
  const int J = states.front().J();
  const int K = states.front().K();
  std::vector<int> counts(J, 0);
  for (int j = 0; j < J; ++j) {
    for (int k = 0; k < K; ++k) {
      std::size_t occupied = 0;
      for (const auto& s : states)
        if (s.is_active(j, k)) ++occupied;
      if (2 * occupied > states.size()) ++counts[j];
    }
  }
  return counts;
}

PosteriorDraws run_chain(const McmcConfig& config, const HyperParams& hyper,
                         const Dataset& dataset, RngStream rng) {
  if (config.n_burnin > config.n_iterations)
    throw ParameterError("run_chain: n_burnin must not exceed n_iterations");
  if (config.thin < 1) throw ParameterError("run_chain: thin must be >= 1");
  HyperParams h = hyper;
  h.K = config.K;
  GibbsSampler sampler(dataset, h, rng);
  if (config.a_log_prior) sampler.set_a_log_prior(config.a_log_prior);
  PosteriorDraws draws;
  for (int it = 1; it <= config.n_iterations; ++it) {
    try {
      sampler.sweep();
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " (sweep " +
                         std::to_string(it) + ")");
    }
    TraceRecord rec;
    rec.iteration = it;
    rec.a = sampler.state().a;
    rec.log_joint = sampler.log_joint();
    if (!std::isfinite(rec.log_joint))
      throw NumericError("run_chain: non-finite log joint at sweep " +
                         std::to_string(it));
    for (int j = 0; j < h.J; ++j) {
      rec.r_sum.push_back(sampler.state().r.row(j).sum());
      int cnt = 0;
      for (int k = 0; k < h.K; ++k)
        if (sampler.augmented().m[j * h.K + k] > 0) ++cnt;
      rec.active_count.push_back(cnt);
    }
    draws.trace.push_back(std::move(rec));
    if (it > config.n_burnin && (it - config.n_burnin) % config.thin == 0) {
      draws.states.push_back(sampler.state());
      draws.iterations.push_back(it);
    }
  }
  return draws;
}

}  // namespace wdr
