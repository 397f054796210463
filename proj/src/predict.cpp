#include "wdr/predict.hpp"

#include <algorithm>
#include <cmath>

#include "wdr/distributions.hpp"

namespace wdr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_add_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

struct SeriesState {
  double log_c = 0.0;
  double rho = 0.0;
  double b1 = 0.0;
  std::vector<double> log_delta;  // m = 0..M
};

SeriesState build_series(std::span<const double> r_list,
                         std::span<const double> b_list, double mass_target,
                         int max_terms) {
  const std::size_t T = r_list.size();
  if (T == 0 || b_list.size() != T)
    throw ParameterError("gamma_convolution_cdf: r and b lists must match");
  SeriesState s;
  s.b1 = *std::max_element(b_list.begin(), b_list.end());
  for (std::size_t t = 0; t < T; ++t) {
    if (!(r_list[t] > 0.0) || !(b_list[t] > 0.0))
      throw ParameterError("gamma_convolution_cdf: r, b must be positive");
    s.rho += r_list[t];
    s.log_c += r_list[t] * std::log(b_list[t] / s.b1);
  }
  const double log_target = std::log(mass_target);
  std::vector<double> log_hgamma;  // log(h * gamma_h), grown on demand
  auto ensure_gamma = [&](std::size_t h) {
    while (log_hgamma.size() < h) {
      const std::size_t hh = log_hgamma.size() + 1;
      double g = 0.0;
      for (std::size_t t = 0; t < T; ++t)
        g += r_list[t] * std::pow(1.0 - b_list[t] / s.b1, double(hh));
      log_hgamma.push_back(g > 0.0 ? std::log(g) : -kInf);
    }
  };
  s.log_delta.push_back(0.0);
  double log_mass = s.log_c;
  while (log_mass < log_target) {
    const std::size_t m1 = s.log_delta.size();  // computing delta_{m1}
    if (static_cast<int>(m1) > max_terms)
      throw NumericError("gamma_convolution_cdf: series did not reach mass "
                         "target within " + std::to_string(max_terms) +
                         " terms");
    ensure_gamma(m1);
    double acc = -kInf;
    for (std::size_t h = 1; h <= m1; ++h)
      acc = log_add_exp(acc, log_hgamma[h - 1] + s.log_delta[m1 - h]);
    const double ld = acc - std::log(double(m1));
    s.log_delta.push_back(ld);
    log_mass = log_add_exp(log_mass, s.log_c + ld);
  }
  return s;
}

double eval_series_cdf(const SeriesState& s, double q, double a) {
  if (q <= 0.0) return 0.0;
  const double log_ratio = std::log(s.b1) - std::log(std::pow(q, a) + s.b1);
  double log_sum = -kInf;
  for (std::size_t m = 0; m < s.log_delta.size(); ++m)
    log_sum = log_add_exp(log_sum,
                          s.log_delta[m] + (s.rho + double(m)) * log_ratio);
  const double tail = std::exp(s.log_c + log_sum);
  return std::clamp(1.0 - tail, 0.0, 1.0);
}

}  // namespace

std::vector<std::vector<double>> estimate_cif_grid(
    std::span<const double> x, std::span<const double> times,
    std::span<const ModelState> draws, int n_mc, RngStream& rng) {
  if (draws.empty()) throw ParameterError("estimate_cif_grid: no draws");
  const int J = draws.front().J();
  const int K = draws.front().K();
  std::vector<std::vector<double>> out(
      J, std::vector<double>(times.size(), 0.0));
  std::vector<double> scale(static_cast<std::size_t>(J) * K);
  std::vector<double> event_rate(J);
  for (const ModelState& s : draws) {
    for (int c = 0; c < J * K; ++c) {
      double z = 0.0;
      for (std::size_t g = 0; g < x.size(); ++g) z += x[g] * s.beta(g, c);
      scale[c] = std::exp(z);
    }
    for (int rep = 0; rep < n_mc; ++rep) {
      double total = 0.0;
      for (int j = 0; j < J; ++j) {
        double ev = 0.0;
        for (int k = 0; k < K; ++k) {
          if (!s.is_active(j, k)) continue;
          ev += sample_gamma(s.r(j, k), scale[j * K + k], rng);
        }
        event_rate[j] = ev;
        total += ev;
      }
      for (std::size_t ti = 0; ti < times.size(); ++ti) {
        const double t = times[ti];
        double factor;
        if (t == kInf)
          factor = 1.0;
        else
          factor = -std::expm1(-std::pow(t, s.a) * total);
        for (int j = 0; j < J; ++j)
          out[j][ti] += event_rate[j] / total * factor;
      }
    }
  }
  const double norm = double(draws.size()) * n_mc;
  for (auto& row : out)
    for (auto& v : row) v /= norm;
  return out;
}

double estimate_cif(std::span<const double> x, double t,
                    std::span<const ModelState> draws, int j, int n_mc,
                    RngStream& rng) {
  if (t < 0.0) throw ParameterError("estimate_cif: t must be >= 0");
  if (t == 0.0) return 0.0;
  const double times[1] = {t};
  return estimate_cif_grid(x, times, draws, n_mc, rng)[j][0];
}

std::vector<double> event_probabilities(std::span<const double> x,
                                        std::span<const ModelState> draws,
                                        int n_mc, RngStream& rng) {
  const double times[1] = {kInf};
  const auto grid = estimate_cif_grid(x, times, draws, n_mc, rng);
  std::vector<double> probs(grid.size());
  double total = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) total += grid[j][0];
  for (std::size_t j = 0; j < grid.size(); ++j) probs[j] = grid[j][0] / total;
  return probs;
}

double event_probability(std::span<const double> x,
                         std::span<const ModelState> draws, int j, int n_mc,
                         RngStream& rng) {
  return event_probabilities(x, draws, n_mc, rng)[static_cast<std::size_t>(j)];
}

SeriesCdfResult gamma_convolution_cdf(double q, double a,
                                      std::span<const double> r_list,
                                      std::span<const double> b_list,
                                      double mass_target, int max_terms) {
  if (q < 0.0) throw ParameterError("gamma_convolution_cdf: q must be >= 0");
  if (!(mass_target > 0.0 && mass_target < 1.0))
    throw ParameterError("gamma_convolution_cdf: mass_target in (0,1)");
  const SeriesState s = build_series(r_list, b_list, mass_target, max_terms);
  return {eval_series_cdf(s, q, a),
          static_cast<int>(s.log_delta.size()) - 1};
}

double sample_event_time_series(double a, std::span<const double> r_list,
                                std::span<const double> b_list,
                                RngStream& rng, double mass_target) {
  const SeriesState s = build_series(r_list, b_list, mass_target, 10000);
  const double u = rng.uniform_pos();
  double lo = 0.0, hi = 1.0;
  int guard = 0;
  while (eval_series_cdf(s, hi, a) < u) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 400)
      throw NumericError("sample_event_time_series: bracket did not close");
  }
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (eval_series_cdf(s, mid, a) < u)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace wdr
