#include "wdr/distributions.hpp"

#include <cmath>
#include <limits>

namespace wdr {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Marsaglia-Tsang for shape >= 1, unit scale.
double gamma_mt(double shape, RngStream& rng) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform_pos();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

// Per-term scale of the PG infinite gamma series:
// PG(b, c) = sum_k Gamma(b, 1) * d_k.
double pg_series_coef(int k, double z2) {
  const double km = static_cast<double>(k) - 0.5;
  return 1.0 / (2.0 * kPi * kPi * (km * km + z2));
}
}  // namespace

double sample_weibull(double a, double lambda, RngStream& rng) {
  if (!(a > 0.0) || !(lambda > 0.0))
    throw ParameterError("sample_weibull: a and lambda must be positive");
  const double e = -std::log(rng.uniform_pos());
  return std::pow(e / lambda, 1.0 / a);
}

double sample_truncated_weibull(double a, double lambda, double lower,
                                double upper, RngStream& rng) {
  if (!(a > 0.0) || !(lambda > 0.0))
    throw ParameterError("sample_truncated_weibull: a, lambda must be positive");
  if (!(lower >= 0.0) || !(lower < upper))
    throw ParameterError("sample_truncated_weibull: need 0 <= lower < upper");
  // s = t^a is Exp(lambda) restricted to (lower^a, upper^a); shifting by
  // lower^a keeps all quantities as differences, no survival underflow.
  const double sl = std::pow(lower, a);
  const double u = rng.uniform_pos();
  double e;
  if (upper == kInf) {
    e = -std::log(u);
  } else {
    const double d = lambda * (std::pow(upper, a) - sl);
    const double mass = -std::expm1(-d);  // P(s - sl < d) under Exp
    e = -std::log1p(-u * mass);
  }
  // Keep the draw finite even for vanishing rates; the cap is far beyond
  // any usable time scale.
  const double s = std::min(sl + e / lambda, 0.5 * std::numeric_limits<double>::max());
  return std::pow(s, 1.0 / a);
}

double sample_gamma(double shape, double scale, RngStream& rng) {
  if (!(shape > 0.0) || !(scale > 0.0))
    throw ParameterError("sample_gamma: shape and scale must be positive");
  double g;
  if (shape < 1.0) {
    // Boosting identity: Gamma(s) = Gamma(s+1) * U^{1/s}.
    g = gamma_mt(shape + 1.0, rng) *
        std::exp(std::log(rng.uniform_pos()) / shape);
  } else {
    g = gamma_mt(shape, rng);
  }
  g *= scale;
  return std::max(g, std::numeric_limits<double>::min());
}

int sample_categorical(std::span<const double> log_weights, RngStream& rng) {
  double mx = -kInf;
  for (double w : log_weights) mx = std::max(mx, w);
  if (!(mx > -kInf))
    throw ParameterError("sample_categorical: all log-weights are -inf");
  double total = 0.0;
  for (double w : log_weights) total += std::exp(w - mx);
  double target = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t j = 0; j < log_weights.size(); ++j) {
    acc += std::exp(log_weights[j] - mx);
    if (target < acc) return static_cast<int>(j);
  }
  return static_cast<int>(log_weights.size()) - 1;
}

int sample_crt(int n, double r, RngStream& rng) {
  if (n < 0 || !(r > 0.0)) throw ParameterError("sample_crt: need n >= 0, r > 0");
  int l = 0;
  for (int i = 1; i <= n; ++i) {
    if (rng.uniform() * (r + static_cast<double>(i - 1)) < r) ++l;
  }
  return l;
}

double polya_gamma_mean(double b, double c) {
  const double x = 0.5 * std::fabs(c);
  if (x < 1e-4) return b * 0.25 * (1.0 - x * x / 3.0);
  return b * std::tanh(x) / (4.0 * x);
}

double polya_gamma_variance(double b, double c) {
  const double x = 0.5 * std::fabs(c);
  if (x < 1e-2) {
    const double x2 = x * x;
    return b * (1.0 / 24.0 - x2 / 30.0 + 34.0 * x2 * x2 / (105.0 * 16.0));
  }
  const double th = std::tanh(x);
  const double sech2 = 1.0 - th * th;
  return b * (th - x * sech2) / (16.0 * x * x * x);
}

double sample_polya_gamma(double b, double c, RngStream& rng) {
  if (!(b > 0.0)) throw ParameterError("sample_polya_gamma: b must be positive");
  const double z = c / (2.0 * kPi);
  const double z2 = z * z;
  double draw = 0.0;
  double head_mean = 0.0;
  double head_var = 0.0;
  for (int k = 1; k <= kPgExactTerms; ++k) {
    const double dk = pg_series_coef(k, z2);
    draw += sample_gamma(b, dk, rng);
    head_mean += b * dk;
    head_var += b * dk * dk;
  }
  const double tail_mean = polya_gamma_mean(b, c) - head_mean;
  const double tail_var = polya_gamma_variance(b, c) - head_var;
  if (tail_mean > 0.0 && tail_var > 0.0) {
    const double shape = tail_mean * tail_mean / tail_var;
    const double scale = tail_var / tail_mean;
    // Subnormal b can underflow the matched moments; the tail is negligible
    // there, so just drop it.
    if (shape > 0.0 && scale > 0.0 && std::isfinite(shape) && std::isfinite(scale))
      draw += sample_gamma(shape, scale, rng);
  }
  return draw;
}

double slice_sample_unimodal(const std::function<double(double)>& log_density,
                             double x0, RngStream& rng, double width) {
  if (!(x0 > 0.0)) throw ParameterError("slice_sample_unimodal: x0 must be positive");
  auto eval = [&](double x) {
    const double v = log_density(x);
    if (std::isnan(v)) throw NumericError("slice_sample_unimodal: log_density is NaN");
    return v;
  };
  const double f0 = eval(x0);
  if (!std::isfinite(f0))
    throw NumericError("slice_sample_unimodal: log_density not finite at x0");
  const double log_y = f0 + std::log(rng.uniform_pos());

  // Place the initial interval, then expand each side with doubling steps
  // until both ends fall off the slice. For a unimodal target the slice is
  // an interval, so this bracket is guaranteed to contain it.
  const double u0 = rng.uniform();
  double lo = x0 - width * u0;
  double hi = lo + width;
  double step = width;
  while (lo > 0.0 && eval(lo) > log_y) {
    lo -= step;
    step *= 2.0;
  }
  lo = std::max(lo, 0.0);
  step = width;
  while (eval(hi) > log_y) {
    hi += step;
    step *= 2.0;
  }

  for (int iter = 0; iter < 1000; ++iter) {
    const double x1 = lo + rng.uniform_pos() * (hi - lo);
    if (eval(x1) > log_y) return x1;
    if (x1 < x0)
      lo = x1;
    else
      hi = x1;
  }
  throw NumericError("slice_sample_unimodal: shrinkage failed to terminate");
}

Eigen::VectorXd sample_mvn_from_precision(const Eigen::VectorXd& h,
                                          const Eigen::MatrixXd& precision,
                                          RngStream& rng) {
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) {
    const double min_diag = precision.diagonal().minCoeff();
    throw NumericError("sample_mvn_from_precision: Cholesky failed; smallest "
                       "diagonal entry " + std::to_string(min_diag));
  }
  Eigen::VectorXd mean = llt.solve(h);
  Eigen::VectorXd z(h.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  // x = mean + L^{-T} z has covariance (L L^T)^{-1} = P^{-1}.
  Eigen::VectorXd x = llt.matrixU().solve(z);
  return mean + x;
}

}  // namespace wdr
