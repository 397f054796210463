#include "wdr/model.hpp"

#include <cmath>
#include <json.hpp>
#include <limits>

#include "wdr/distributions.hpp"

namespace wdr {

using nlohmann::json;

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  const Eigen::Index nr = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index nc = nr > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
  Eigen::MatrixXd m(nr, nc);
  for (Eigen::Index i = 0; i < nr; ++i)
    for (Eigen::Index j = 0; j < nc; ++j) m(i, j) = rows[i][j].get<double>();
  return m;
}

}  // namespace

std::string ModelState::to_json() const {
  json doc;
  doc["a"] = a;
  doc["r"] = matrix_to_json(r);
  doc["beta"] = matrix_to_json(beta);
  doc["alpha"] = matrix_to_json(alpha);
  doc["gamma0"] = std::vector<double>(gamma0.data(), gamma0.data() + gamma0.size());
  doc["c0"] = std::vector<double>(c0.data(), c0.data() + c0.size());
  doc["active"] = active;
  return doc.dump();
}

ModelState ModelState::from_json(const std::string& text) {
  const json doc = json::parse(text);
  ModelState s;
  s.a = doc.at("a").get<double>();
  s.r = matrix_from_json(doc.at("r"));
  s.beta = matrix_from_json(doc.at("beta"));
  if (doc.contains("alpha") && !doc["alpha"].empty())
    s.alpha = matrix_from_json(doc["alpha"]);
  else
    s.alpha = Eigen::MatrixXd::Ones(s.beta.rows(), s.beta.cols());
  auto vec = [&](const char* name, Eigen::Index n) {
    Eigen::VectorXd v(n);
    if (doc.contains(name)) {
      const auto arr = doc[name].get<std::vector<double>>();
      for (Eigen::Index i = 0; i < n; ++i) v(i) = arr[i];
    } else {
      v.setOnes();
    }
    return v;
  };
  s.gamma0 = vec("gamma0", s.r.rows());
  s.c0 = vec("c0", s.r.rows());
  if (doc.contains("active"))
    s.active = doc["active"].get<std::vector<std::uint8_t>>();
  else
    s.active.assign(static_cast<std::size_t>(s.r.size()), 1);
  return s;
}

ModelState sample_from_prior(const HyperParams& hyper, int P, RngStream& rng) {
  const int J = hyper.J, K = hyper.K;
  ModelState s;
  s.a = 1.0;
  s.r.resize(J, K);
  s.beta.resize(P, J * K);
  s.alpha.resize(P, J * K);
  s.gamma0.resize(J);
  s.c0.resize(J);
  s.active.assign(static_cast<std::size_t>(J) * K, 1);
  for (int j = 0; j < J; ++j) {
    s.gamma0(j) = sample_gamma(hyper.e0, 1.0 / hyper.f0, rng);
    s.c0(j) = sample_gamma(hyper.e1, 1.0 / hyper.f1, rng);
    for (int k = 0; k < K; ++k) {
      const int c = j * K + k;
      s.r(j, k) = sample_gamma(s.gamma0(j) / K, 1.0 / s.c0(j), rng);
      for (int g = 0; g < P; ++g) {
        s.alpha(g, c) = sample_gamma(hyper.a0, 1.0 / hyper.b0, rng);
        s.beta(g, c) = rng.normal() / std::sqrt(s.alpha(g, c));
      }
    }
  }
  return s;
}

double log_joint_likelihood(const ModelState& state,
                            const AugmentedState& augmented,
                            const Dataset& dataset) {
  const int K = state.K();
  const int JK = state.J() * K;
  const std::size_t n = dataset.size();
  const double log_a = std::log(state.a);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = augmented.t_imputed(static_cast<Eigen::Index>(i));
    if (!(t > 0.0)) throw NumericError("log_joint_likelihood: t must be positive");
    double rate_sum = 0.0;
    for (int c = 0; c < JK; ++c)
      if (state.active[c]) rate_sum += augmented.lambda(static_cast<Eigen::Index>(i), c);
    const double lt = augmented.log_t(static_cast<Eigen::Index>(i));
    total += std::log(augmented.lambda(static_cast<Eigen::Index>(i),
                                       augmented.cell_of(i, K))) +
             log_a + (state.a - 1.0) * lt - std::exp(state.a * lt) * rate_sum;
  }
  return total;
}

double survival_function(std::span<const double> x, double t,
                         const ModelState& state, int j) {
  if (t < 0.0) throw ParameterError("survival_function: t must be >= 0");
  if (t == 0.0) return 1.0;
  const int K = state.K();
  const double u = state.a * std::log(t);
  double acc = 0.0;
  for (int k = 0; k < K; ++k) {
    if (!state.is_active(j, k)) continue;
    const int c = state.cell(j, k);
    double z = 0.0;
    for (std::size_t g = 0; g < x.size(); ++g) z += x[g] * state.beta(g, c);
    acc += state.r(j, k) * softplus(u + z);
  }
  return std::exp(-acc);
}

double hazard_function(std::span<const double> x, double t,
                       const ModelState& state, int j) {
  if (!(t >= 0.0)) throw ParameterError("hazard_function: t must be >= 0");
  const int K = state.K();
  if (t == 0.0) {
    if (state.a < 1.0) return std::numeric_limits<double>::infinity();
    if (state.a > 1.0) return 0.0;
  }
  const double lt = std::log(t);  // -inf only when t == 0 and a == 1
  double h = 0.0;
  for (int k = 0; k < K; ++k) {
    if (!state.is_active(j, k)) continue;
    const int c = state.cell(j, k);
    double z = 0.0;
    for (std::size_t g = 0; g < x.size(); ++g) z += x[g] * state.beta(g, c);
    if (t == 0.0) {  // a == 1 here: h contribution is r e^z
      h += state.r(j, k) * std::exp(z);
      continue;
    }
    // t^{a-1} / (t^a + e^{-z}) = exp((a-1) log t + z - softplus(a log t + z))
    const double s = state.a * lt + z;
    h += state.a * state.r(j, k) * std::exp((state.a - 1.0) * lt + z - softplus(s));
  }
  return h;
}

}  // namespace wdr
