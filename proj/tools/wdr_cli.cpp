// Command-line surface: simulate / fit / predict / evaluate.
// Exit codes: 0 success, 2 usage or config error, 3 numeric failure.

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <thread>
#include <vector>

#include "wdr/data.hpp"
#include "wdr/distributions.hpp"
#include "wdr/gibbs.hpp"
#include "wdr/map.hpp"
#include "wdr/metrics.hpp"
#include "wdr/model.hpp"
#include "wdr/predict.hpp"
#include "wdr/synth.hpp"

namespace {

using nlohmann::json;

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw wdr::ParseError("cannot open output file: " + path);
  out << text;
}

// Reloadable resolved-config snapshot: the subcommand's effective values
// under its own INI section.
void write_config_snapshot(const CLI::App* sub, const std::string& prefix) {
  write_file(prefix + "_config.ini",
             "[" + sub->get_name() + "]\n" + sub->config_to_str(false, false));
}

wdr::Dataset load_data(const std::string& path, int n_risks, bool intercept) {
  if (!std::filesystem::exists(path))
    throw wdr::ParseError("input file not found: " + path);
  wdr::Dataset d = wdr::load_csv(path, wdr::CsvSchema{n_risks});
  if (intercept) d.add_intercept();
  return d;
}

// ---- simulate -------------------------------------------------------------

struct SimulateOpts {
  int scenario = 1;
  std::size_t n = 2000;
  std::uint64_t seed = 0;
  double censor_time = -1.0;  // <0 keeps the scenario default
  std::string out;
};

void run_simulate(const SimulateOpts& o, const CLI::App* sub) {
  wdr::ScenarioSpec spec = wdr::ScenarioSpec::scenario(o.scenario);
  spec.n = o.n;
  if (o.censor_time >= 0.0) spec.censor_time = o.censor_time;
  wdr::RngStream rng(o.seed);
  const wdr::SyntheticData data = wdr::generate(spec, rng);
  wdr::save_csv(data.dataset, o.out + ".csv");
  json truth;
  truth["scenario"] = json::parse(spec.to_json());
  truth["seed"] = o.seed;
  truth["true_event"] = data.truth.true_event;
  truth["latent_times"] = data.truth.latent_times;
  write_file(o.out + "_truth.json", truth.dump() + "\n");
  write_config_snapshot(sub, o.out);
}

// ---- fit ------------------------------------------------------------------

struct FitOpts {
  std::string data;
  int n_risks = 2;
  std::string method = "mcmc";
  std::uint64_t seed = 0;
  std::string out;
  bool intercept = false;
  // mcmc
  int k = 10;
  int iters = 20000;
  int burnin = 15000;
  int thin = 5;
  bool paper_scale = false;
  int chains = 1;
  // map
  int m = 10;
  int epochs = 200;
  double lr = 0.05;
  int minibatch = 100;
  bool adaptive = false;
};

std::string trace_line(const wdr::TraceRecord& rec) {
  json doc;
  doc["iteration"] = rec.iteration;
  doc["a"] = rec.a;
  doc["log_joint"] = rec.log_joint;
  doc["r_sum"] = rec.r_sum;
  doc["active_count"] = rec.active_count;
  return doc.dump();
}

void run_one_chain(const wdr::McmcConfig& cfg, const wdr::Dataset& data,
                   std::uint64_t chain_id, const std::string& prefix) {
  const wdr::PosteriorDraws draws = wdr::run_chain(
      cfg, wdr::HyperParams{.K = cfg.K, .J = data.n_risks}, data,
      wdr::RngStream(cfg.seed, chain_id));
  std::ofstream trace(prefix + "_trace.ndjson");
  for (const wdr::TraceRecord& rec : draws.trace)
    trace << trace_line(rec) << "\n";
  std::ofstream out(prefix + "_draws.ndjson");
  for (std::size_t i = 0; i < draws.states.size(); ++i) {
    json doc;
    doc["iteration"] = draws.iterations[i];
    doc["state"] = json::parse(draws.states[i].to_json());
    out << doc.dump() << "\n";
  }
}

void run_fit(const FitOpts& o, const CLI::App* sub) {
  const wdr::Dataset data = load_data(o.data, o.n_risks, o.intercept);
  if (o.method == "map") {
    wdr::MapConfig cfg;
    cfg.M = o.m;
    cfg.K = o.k;
    cfg.n_epochs = o.epochs;
    cfg.learning_rate = o.lr;
    cfg.minibatch_size = o.minibatch;
    cfg.adaptive = o.adaptive;
    cfg.seed = o.seed;
    const wdr::MapFit fit = wdr::fit_map(data, cfg);
    write_file(o.out + "_params.json", fit.params.to_json() + "\n");
    std::ofstream trace(o.out + "_trace.ndjson");
    for (std::size_t e = 0; e < fit.epoch_log_posterior.size(); ++e) {
      json doc;
      doc["epoch"] = e + 1;
      doc["log_posterior"] = fit.epoch_log_posterior[e];
      trace << doc.dump() << "\n";
    }
  } else {
    wdr::McmcConfig cfg;
    cfg.K = o.k;
    cfg.n_iterations = o.paper_scale ? 200000 : o.iters;
    cfg.n_burnin = o.paper_scale ? 195000 : o.burnin;
    cfg.thin = o.thin;
    cfg.seed = o.seed;
    cfg.n_chains = o.chains;
    if (o.chains == 1) {
      run_one_chain(cfg, data, 0, o.out);
    } else {
      std::vector<std::thread> workers;
      std::vector<std::exception_ptr> errors(o.chains);
      for (int c = 0; c < o.chains; ++c)
        workers.emplace_back([&, c] {
          try {
            run_one_chain(cfg, data, static_cast<std::uint64_t>(c),
                          o.out + "_chain" + std::to_string(c));
          } catch (...) {
            errors[c] = std::current_exception();
          }
        });
      for (auto& w : workers) w.join();
      for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    }
  }
  write_config_snapshot(sub, o.out);
}

// ---- predict / evaluate ---------------------------------------------------

struct PredictOpts {
  std::string data;
  int n_risks = 2;
  std::string draws_path;
  std::string params_path;
  std::vector<double> times;
  int n_mc = 200;
  std::uint64_t seed = 1;
  bool intercept = false;
  bool event_probability = false;
  std::string out;
};

std::vector<wdr::ModelState> load_states(const PredictOpts& o) {
  std::vector<wdr::ModelState> states;
  if (!o.draws_path.empty()) {
    if (!std::filesystem::exists(o.draws_path))
      throw wdr::ParseError("draws file not found: " + o.draws_path);
    std::ifstream in(o.draws_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json doc = json::parse(line);
      states.push_back(wdr::ModelState::from_json(doc.at("state").dump()));
    }
    if (states.empty())
      throw wdr::ParseError("draws file is empty: " + o.draws_path);
  } else {
    if (!std::filesystem::exists(o.params_path))
      throw wdr::ParseError("params file not found: " + o.params_path);
    std::ifstream in(o.params_path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    states.push_back(wdr::MapParams::from_json(text).to_model_state());
  }
  return states;
}

// CIF with a Monte-Carlo standard error from `reps` independent replicate
// estimates; value is the pooled mean. Indexed [event][time].
struct CifWithSe {
  std::vector<std::vector<double>> value;
  std::vector<std::vector<double>> se;
};

CifWithSe cif_with_se(std::span<const double> x,
                      std::span<const double> times,
                      std::span<const wdr::ModelState> states, int n_mc,
                      wdr::RngStream& rng, int reps = 10) {
  const int per_rep = std::max(1, n_mc / reps);
  const int J = states.front().J();
  CifWithSe out;
  out.value.assign(J, std::vector<double>(times.size(), 0.0));
  out.se.assign(J, std::vector<double>(times.size(), 0.0));
  std::vector<std::vector<std::vector<double>>> rep_vals;
  for (int rep = 0; rep < reps; ++rep) {
    wdr::RngStream sub = rng.substream(static_cast<std::uint64_t>(rep));
    rep_vals.push_back(
        wdr::estimate_cif_grid(x, times, states, per_rep, sub));
  }
  for (int j = 0; j < J; ++j) {
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
      double mean = 0.0;
      for (int rep = 0; rep < reps; ++rep) mean += rep_vals[rep][j][ti];
      mean /= reps;
      double var = 0.0;
      for (int rep = 0; rep < reps; ++rep) {
        const double d = rep_vals[rep][j][ti] - mean;
        var += d * d;
      }
      out.value[j][ti] = mean;
      out.se[j][ti] = std::sqrt(var / (reps - 1.0) / reps);
    }
  }
  return out;
}

void check_dimensions(const wdr::Dataset& data,
                      const std::vector<wdr::ModelState>& states) {
  if (static_cast<std::size_t>(states.front().P()) != data.n_features())
    throw wdr::ParseError(
        "feature count mismatch between data and fitted parameters (did you "
        "forget --intercept?)");
}

void run_predict(const PredictOpts& o, const CLI::App* sub) {
  const wdr::Dataset data = load_data(o.data, o.n_risks, o.intercept);
  const std::vector<wdr::ModelState> states = load_states(o);
  check_dimensions(data, states);
  const int J = states.front().J();
  char buf[64];
  if (o.event_probability) {
    std::ofstream out(o.out + "_probs.csv");
    out << "row";
    for (int j = 1; j <= J; ++j) out << ",p_event" << j;
    out << "\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
      wdr::RngStream rng = wdr::RngStream(o.seed).substream(i);
      const auto probs = wdr::event_probabilities(
          data.observations[i].x, states, o.n_mc, rng);
      out << i;
      for (double p : probs) {
        std::snprintf(buf, sizeof buf, ",%.10g", p);
        out << buf;
      }
      out << "\n";
    }
  } else {
    if (o.times.empty())
      throw wdr::ParseError("predict: --times is required without "
                            "--event-probability");
    std::ofstream out(o.out + "_cif.csv");
    out << "row,event,time,value,mc_se\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
      wdr::RngStream rng = wdr::RngStream(o.seed).substream(i);
      const CifWithSe cif =
          cif_with_se(data.observations[i].x, o.times, states, o.n_mc, rng);
      for (int j = 0; j < J; ++j)
        for (std::size_t ti = 0; ti < o.times.size(); ++ti) {
          std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g", o.times[ti],
                        cif.value[j][ti], cif.se[j][ti]);
          out << i << "," << (j + 1) << "," << buf << "\n";
        }
    }
  }
  write_config_snapshot(sub, o.out);
}

void run_evaluate(const PredictOpts& o, const CLI::App* sub) {
  const wdr::Dataset data = load_data(o.data, o.n_risks, o.intercept);
  if (data.size() == 0) throw wdr::ParseError("evaluate: empty test set");
  if (o.times.empty())
    throw wdr::ParseError("evaluate: --times is required");
  const std::vector<wdr::ModelState> states = load_states(o);
  check_dimensions(data, states);
  const int J = states.front().J();
  const std::size_t n = data.size();

  // cif[j][t][i] and per-row event probabilities from shared simulations.
  std::vector<std::vector<std::vector<double>>> cif(
      J, std::vector<std::vector<double>>(o.times.size(),
                                          std::vector<double>(n)));
  std::vector<std::vector<double>> probs(n);
  for (std::size_t i = 0; i < n; ++i) {
    wdr::RngStream rng = wdr::RngStream(o.seed).substream(i);
    const auto grid = wdr::estimate_cif_grid(data.observations[i].x, o.times,
                                             states, o.n_mc, rng);
    for (int j = 0; j < J; ++j)
      for (std::size_t ti = 0; ti < o.times.size(); ++ti)
        cif[j][ti][i] = grid[j][ti];
    wdr::RngStream rng2 = wdr::RngStream(o.seed + 1).substream(i);
    probs[i] = wdr::event_probabilities(data.observations[i].x, states,
                                        o.n_mc, rng2);
  }

  std::ofstream out(o.out + "_metrics.csv");
  out << "time,event,metric,value\n";
  char buf[64];
  auto emit = [&](const std::string& time_label, int j,
                  const std::string& metric, double v) {
    std::snprintf(buf, sizeof buf, "%.10g", v);
    out << time_label << "," << j << "," << metric << "," << buf << "\n";
  };
  for (std::size_t ti = 0; ti < o.times.size(); ++ti) {
    std::snprintf(buf, sizeof buf, "%.10g", o.times[ti]);
    const std::string tl = buf;
    for (int j = 0; j < J; ++j) {
      emit(tl, j + 1, "brier",
           wdr::brier_score(cif[j][ti], data, j + 1, o.times[ti]));
      double ci = std::numeric_limits<double>::quiet_NaN();
      try {
        ci = wdr::c_index(cif[j][ti], data, j + 1, o.times[ti]);
      } catch (const wdr::MetricError&) {
        // no comparable pairs at this horizon; reported as nan
      }
      emit(tl, j + 1, "c_index", ci);
    }
  }
  // Classification report on rows with a known event type: label 1(y = j),
  // score P(y = j).
  for (int j = 0; j < J; ++j) {
    std::vector<double> p;
    std::vector<int> lab;
    for (std::size_t i = 0; i < n; ++i) {
      const wdr::Observation& obs = data.observations[i];
      if (!obs.event.is_known()) continue;
      p.push_back(probs[i][j]);
      lab.push_back(*obs.event.type == j + 1 ? 1 : 0);
    }
    double acc = std::numeric_limits<double>::quiet_NaN();
    double auc = std::numeric_limits<double>::quiet_NaN();
    try {
      std::tie(acc, auc) = wdr::classification_metrics(p, lab);
    } catch (const wdr::MetricError&) {
      // single-class labels; reported as nan
    }
    emit("inf", j + 1, "accuracy", acc);
    emit("inf", j + 1, "auc", auc);
  }
  write_config_snapshot(sub, o.out);
}

void add_predict_options(CLI::App* sub, PredictOpts& o, bool evaluate) {
  sub->add_option("--data", o.data, "input CSV")->required();
  sub->add_option("--n-risks", o.n_risks, "number of competing risks");
  sub->add_option("--draws", o.draws_path, "posterior draws NDJSON");
  sub->add_option("--params", o.params_path, "MAP params JSON");
  sub->add_option("--times", o.times, "evaluation time grid")
      ->delimiter(',');
  sub->add_option("--n-mc", o.n_mc, "rate simulations per draw");
  sub->add_option("--seed", o.seed, "RNG seed");
  sub->add_flag("--intercept", o.intercept, "prepend an intercept column");
  if (!evaluate)
    sub->add_flag("--event-probability", o.event_probability,
                  "emit per-row event probabilities instead of CIF curves");
  sub->add_option("--out", o.out, "output path prefix")->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weibull delegate racing competing-risks toolkit"};
  app.set_config("--config", "",
                 "INI config file with one section per subcommand; "
                 "command-line flags override file values");
  app.require_subcommand(1);

  SimulateOpts sim;
  CLI::App* s_sim = app.add_subcommand("simulate", "generate synthetic data");
  s_sim->configurable();
  s_sim->add_option("--scenario", sim.scenario, "generating process (1 or 2)")
      ->required();
  s_sim->add_option("--n", sim.n, "number of rows");
  s_sim->add_option("--seed", sim.seed, "RNG seed")->required();
  s_sim->add_option("--censor-time", sim.censor_time,
                    "override the scenario censoring horizon");
  s_sim->add_option("--out", sim.out, "output path prefix")->required();

  FitOpts fit;
  CLI::App* s_fit = app.add_subcommand("fit", "fit the model to a CSV");
  s_fit->configurable();
  s_fit->add_option("--data", fit.data, "input CSV")->required();
  s_fit->add_option("--n-risks", fit.n_risks, "number of competing risks");
  s_fit->add_option("--method", fit.method, "inference method")
      ->check(CLI::IsMember({"mcmc", "map"}));
  s_fit->add_option("--seed", fit.seed, "RNG seed")->required();
  s_fit->add_option("--out", fit.out, "output path prefix")->required();
  s_fit->add_flag("--intercept", fit.intercept,
                  "prepend an intercept column");
  s_fit->add_option("--k", fit.k, "sub-event truncation level");
  s_fit->add_option("--iters", fit.iters, "MCMC sweeps");
  s_fit->add_option("--burnin", fit.burnin, "burn-in sweeps");
  s_fit->add_option("--thin", fit.thin, "thinning interval");
  s_fit->add_flag("--paper-scale", fit.paper_scale,
                  "use 200,000 sweeps with 195,000 burn-in");
  s_fit->add_option("--chains", fit.chains, "independent chains")
      ->check(CLI::PositiveNumber);
  s_fit->add_option("--m", fit.m, "Monte-Carlo draws per observation (map)");
  s_fit->add_option("--epochs", fit.epochs, "SGD epochs (map)");
  s_fit->add_option("--lr", fit.lr, "SGD learning rate (map)");
  s_fit->add_option("--minibatch", fit.minibatch, "minibatch size (map)");
  s_fit->add_flag("--adaptive", fit.adaptive,
                  "per-coordinate adaptive step sizes (map)");

  PredictOpts pred;
  CLI::App* s_pred =
      app.add_subcommand("predict", "cumulative-incidence prediction");
  s_pred->configurable();
  add_predict_options(s_pred, pred, false);

  PredictOpts eval;
  CLI::App* s_eval = app.add_subcommand("evaluate", "metrics on a test CSV");
  s_eval->configurable();
  add_predict_options(s_eval, eval, true);

  try {
    app.parse(argc, argv);
    if (s_sim->parsed()) run_simulate(sim, s_sim);
    if (s_fit->parsed()) run_fit(fit, s_fit);
    if (s_pred->parsed()) {
      if (pred.draws_path.empty() == pred.params_path.empty())
        throw wdr::ParseError("predict: exactly one of --draws or --params");
      run_predict(pred, s_pred);
    }
    if (s_eval->parsed()) {
      if (eval.draws_path.empty() == eval.params_path.empty())
        throw wdr::ParseError("evaluate: exactly one of --draws or --params");
      run_evaluate(eval, s_eval);
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const wdr::NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
