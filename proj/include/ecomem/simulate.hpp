#pragma once

// Forward simulation from the memory model with known weight functions, and
// scoring of fitted memory functions against those truths.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ecomem/dataset.hpp"
#include "ecomem/diagnostics.hpp"
#include "ecomem/error.hpp"
#include "ecomem/formula.hpp"
#include "ecomem/model.hpp"
#include "ecomem/sampler.hpp"

namespace ecomem {

struct WeightShape {
  std::string shape = "uniform";  // exponential | hump | uniform | custom
  double rate = 0.5;              // exponential: w_l ~ exp(-rate * l)
  double peak = 0.0;              // hump: w_l ~ exp(-(l - peak)^2 / (2 width^2))
  double width = 1.0;
  std::vector<double> values;     // custom, normalized to sum 1
};

inline std::vector<double> true_weights(const WeightShape& s, int max_lag) {
  std::vector<double> w(max_lag + 1, 1.0);
  if (s.shape == "exponential") {
    for (int l = 0; l <= max_lag; ++l) w[l] = std::exp(-s.rate * l);
  } else if (s.shape == "hump") {
    for (int l = 0; l <= max_lag; ++l) w[l] = std::exp(-0.5 * (l - s.peak) * (l - s.peak) / (s.width * s.width));
  } else if (s.shape == "custom") {
    if (static_cast<int>(s.values.size()) != max_lag + 1)
      throw Error(ErrorCode::ShapeMismatch, "custom weights need L+1 values");
    w = s.values;
  } else if (s.shape != "uniform") {
    throw Error(ErrorCode::InvalidSpec, "unknown weight shape '" + s.shape + "'");
  }
  double total = 0.0;
  for (double v : w) {
    if (!(v >= 0.0)) throw Error(ErrorCode::InvalidSpec, "weights must be nonnegative");
    total += v;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::InvalidSpec, "weights sum to zero");
  for (double& v : w) v /= total;
  return w;
}

struct CovariateGenerator {
  std::string name;
  CovariateKind kind = CovariateKind::Continuous;
  double event_prob = 0.1;     // binary: Bernoulli per time step
  double ar = 0.0;             // continuous: stationary AR(1)
  double innovation_sd = 1.0;
  int max_lag = 0;             // 0: no memory
  WeightShape weights;
};

struct SimScenario {
  Family family = Family::Poisson;
  int series_length = 120;
  int groups = 1;
  std::uint64_t seed = 1;
  std::optional<int> history;  // pre-sample steps drawn per group; default max lag
  std::string formula = "y ~ x";
  double mu = 0.0;
  std::map<std::string, double> beta;  // by term label
  double sigma = 1.0;                  // gaussian noise sd
  int trials = 10;                     // binomial trials per row
  std::vector<CovariateGenerator> covariates;
};

struct GroundTruth {
  Family family = Family::Poisson;
  std::string formula;
  double mu = 0.0;
  std::map<std::string, double> beta;
  std::map<std::string, std::vector<double>> weights;
  std::uint64_t seed = 0;
};

struct SimResult {
  TimeSeriesDataset data;
  GroundTruth truth;
};

// The stand-in for the packaged Poisson example: binary v1 with a hump-shaped
// memory over 10 lags, AR(1) v2 with decaying memory over 6 lags, and v3 without memory.
inline SimScenario canonical_scenario(std::uint64_t seed = 2019) {
  SimScenario s;
  s.family = Family::Poisson;
  s.series_length = 120;
  s.seed = seed;
  s.formula = "y ~ v1*v2 + v2*v3";
  s.mu = 1.0;
  s.beta = {{"v1", -0.5}, {"v2", 0.4}, {"v3", 0.3}, {"v1:v2", -0.2}, {"v2:v3", 0.1}};
  CovariateGenerator v1{"v1", CovariateKind::Binary, 0.1, 0.0, 1.0, 10, {}};
  v1.weights.shape = "hump";
  v1.weights.peak = 2.0;
  v1.weights.width = 1.5;
  CovariateGenerator v2{"v2", CovariateKind::Continuous, 0.0, 0.3, 1.0, 6, {}};
  v2.weights.shape = "exponential";
  v2.weights.rate = 0.5;
  CovariateGenerator v3{"v3", CovariateKind::Continuous, 0.0, 0.0, 1.0, 0, {}};
  s.covariates = {v1, v2, v3};
  return s;
}

// Grouped gaussian growth series with memory to binary disturbance events.
inline SimScenario disturbance_scenario(std::uint64_t seed = 2018) {
  SimScenario s;
  s.family = Family::Gaussian;
  s.series_length = 30;
  s.groups = 10;
  s.seed = seed;
  s.formula = "gr ~ age + ftc";
  s.mu = 2.0;
  s.beta = {{"age", 0.3}, {"ftc", -1.5}};
  s.sigma = 0.3;
  CovariateGenerator age{"age", CovariateKind::Continuous, 0.0, 0.9, 0.3, 0, {}};
  CovariateGenerator ftc{"ftc", CovariateKind::Binary, 0.15, 0.0, 1.0, 12, {}};
  ftc.weights.shape = "exponential";
  ftc.weights.rate = 0.4;
  s.covariates = {age, ftc};
  return s;
}

inline SimResult generate(const SimScenario& sc) {
  const Formula formula = parse_formula(sc.formula);
  if (sc.series_length < 1 || sc.groups < 1) throw Error(ErrorCode::InvalidSpec, "empty scenario");
  for (const auto& [label, b] : sc.beta) {
    bool known = false;
    for (const auto& t : formula.terms) known = known || t.label() == label;
    if (!known) throw Error(ErrorCode::TermNotFound, "beta for unknown term '" + label + "'");
  }
  std::vector<std::string> mem_names;
  std::vector<int> mem_lags;
  GroundTruth truth{sc.family, formula.text(), sc.mu, {}, {}, sc.seed};
  for (const auto& t : formula.terms) {
    auto it = sc.beta.find(t.label());
    truth.beta[t.label()] = it == sc.beta.end() ? 0.0 : it->second;
  }
  for (const auto& name : formula.covariates()) {
    bool found = false;
    for (const auto& g : sc.covariates) found = found || g.name == name;
    if (!found) throw Error(ErrorCode::MissingColumn, "no generator for covariate '" + name + "'");
  }
  for (const auto& g : sc.covariates) {
    if (g.kind == CovariateKind::Binary && !(g.event_prob > 0.0 && g.event_prob < 1.0))
      throw Error(ErrorCode::InvalidSpec, "event probability for '" + g.name + "' must lie in (0, 1)");
    if (g.kind == CovariateKind::Continuous && !(std::abs(g.ar) < 1.0))
      throw Error(ErrorCode::InvalidSpec, "AR coefficient for '" + g.name + "' must lie in (-1, 1)");
    if (g.max_lag > 0) {
      mem_names.push_back(g.name);
      mem_lags.push_back(g.max_lag);
      truth.weights[g.name] = true_weights(g.weights, g.max_lag);
    }
  }
  MemorySpec spec = make_memory_spec(mem_names, mem_lags);
  const int history = sc.history.value_or(spec.max_lag());
  if (history < spec.max_lag()) throw Error(ErrorCode::InvalidSpec, "history shorter than the largest lag");
  const int total = sc.series_length + history;

  Rng rng = make_rng(sc.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  TimeSeriesDataset full;
  full.time_id = "time";
  full.group_id = sc.groups > 1 ? "group" : "";
  for (int g = 0; g < sc.groups; ++g)
    for (int t = 1; t <= total; ++t) {
      full.group.push_back(sc.groups > 1 ? std::to_string(g + 1) : "");
      full.time.push_back(t);
    }
  std::map<std::string, std::vector<double>> draws;
  for (const auto& gen : sc.covariates) draws[gen.name].reserve(full.rows());
  for (int g = 0; g < sc.groups; ++g) {
    for (const auto& gen : sc.covariates) {
      auto& col = draws[gen.name];
      if (gen.kind == CovariateKind::Binary) {
        for (int t = 0; t < total; ++t) col.push_back(unif(rng) < gen.event_prob ? 1.0 : 0.0);
      } else {
        double x = normal(rng) * gen.innovation_sd / std::sqrt(1.0 - gen.ar * gen.ar);
        col.push_back(x);
        for (int t = 1; t < total; ++t) {
          x = gen.ar * x + gen.innovation_sd * normal(rng);
          col.push_back(x);
        }
      }
    }
  }
  const std::string response = formula.response;
  full.add_column(response, std::vector<double>(full.rows(), 0.0));
  for (const auto& gen : sc.covariates) full.add_column(gen.name, draws[gen.name], gen.kind);

  const LagPanel panel = build_lag_panel(full, spec, response, formula.covariates());
  std::vector<Eigen::Index> rows;
  for (Eigen::Index r = 0; r < panel.rows(); ++r)
    if (panel.row_time[r] > history) rows.push_back(r);

  std::map<std::string, Eigen::VectorXd> cols = panel.current;
  for (const auto& [name, w] : truth.weights) {
    Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(w.size()));
    cols[name] = filter_covariate(panel.lagged.at(name), wv);
  }
  const Eigen::MatrixXd Z = term_matrix(formula.terms, cols, panel.rows());
  Eigen::VectorXd beta(Z.cols());
  for (std::size_t m = 0; m < formula.terms.size(); ++m) beta(m) = truth.beta[formula.terms[m].label()];
  const Eigen::VectorXd pred = (Z * beta).array() + sc.mu;

  TimeSeriesDataset out;
  out.time_id = "time";
  out.group_id = full.group_id;
  std::vector<double> y, trials;
  std::map<std::string, std::vector<double>> cov_out;
  for (Eigen::Index r : rows) {
    out.group.push_back(panel.row_group[r]);
    out.time.push_back(panel.row_time[r] - history);
    double v = 0.0;
    switch (sc.family) {
      case Family::Gaussian: v = pred(r) + sc.sigma * normal(rng); break;
      case Family::Poisson: v = static_cast<double>(std::poisson_distribution<long long>(std::exp(pred(r)))(rng)); break;
      case Family::Binomial:
        v = static_cast<double>(std::binomial_distribution<int>(sc.trials, density::logistic(pred(r)))(rng));
        trials.push_back(sc.trials);
        break;
    }
    y.push_back(v);
    for (const auto& gen : sc.covariates) cov_out[gen.name].push_back(panel.current.at(gen.name)(r));
  }
  out.add_column(response, std::move(y));
  if (sc.family == Family::Binomial) out.add_column("n", std::move(trials));
  for (const auto& gen : sc.covariates) out.add_column(gen.name, std::move(cov_out[gen.name]), gen.kind);
  return {std::move(out), std::move(truth)};
}

struct LagRecovery {
  int lag = 0;
  double truth = 0.0;
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double abs_error = 0.0;
  bool covered = false;
};

struct CovariateRecovery {
  std::string name;
  std::vector<LagRecovery> lags;
  double mae = 0.0;
  double coverage = 0.0;
};

struct RecoveryReport {
  std::vector<CovariateRecovery> covariates;
  double mae = 0.0;       // over all lags of all covariates
  double coverage = 0.0;  // fraction of lags whose band covers the truth
};

inline RecoveryReport score_recovery(const std::vector<MemoryFunction>& fit, const GroundTruth& truth) {
  RecoveryReport rep;
  std::size_t lags = 0, covered = 0;
  double err = 0.0;
  for (const auto& f : fit) {
    auto it = truth.weights.find(f.name);
    if (it == truth.weights.end()) throw Error(ErrorCode::ShapeMismatch, "no true weights for '" + f.name + "'");
    if (it->second.size() != f.mean.size())
      throw Error(ErrorCode::ShapeMismatch, "'" + f.name + "': fitted " + std::to_string(f.mean.size()) +
                                                " lags, truth has " + std::to_string(it->second.size()));
    CovariateRecovery c{f.name, {}, 0.0, 0.0};
    for (std::size_t l = 0; l < f.mean.size(); ++l) {
      LagRecovery r{static_cast<int>(l), it->second[l], f.mean[l], f.lower[l], f.upper[l], 0.0, false};
      r.abs_error = std::abs(r.mean - r.truth);
      r.covered = r.lower <= r.truth && r.truth <= r.upper;
      c.mae += r.abs_error;
      c.coverage += r.covered;
      c.lags.push_back(r);
    }
    err += c.mae;
    covered += static_cast<std::size_t>(c.coverage);
    lags += f.mean.size();
    c.mae /= static_cast<double>(f.mean.size());
    c.coverage /= static_cast<double>(f.mean.size());
    rep.covariates.push_back(std::move(c));
  }
  if (lags) {
    rep.mae = err / static_cast<double>(lags);
    rep.coverage = static_cast<double>(covered) / static_cast<double>(lags);
  }
  return rep;
}

// JSON forms of scenarios and truths.

inline nlohmann::json to_json(const SimScenario& s) {
  nlohmann::json j;
  j["family"] = to_string(s.family);
  j["series_length"] = s.series_length;
  j["groups"] = s.groups;
  j["seed"] = s.seed;
  if (s.history) j["history"] = *s.history;
  j["formula"] = s.formula;
  j["mu"] = s.mu;
  j["beta"] = s.beta;
  if (s.family == Family::Gaussian) j["sigma"] = s.sigma;
  if (s.family == Family::Binomial) j["trials"] = s.trials;
  j["covariates"] = nlohmann::json::array();
  for (const auto& c : s.covariates) {
    nlohmann::json g{{"name", c.name}, {"kind", c.kind == CovariateKind::Binary ? "binary" : "continuous"}};
    if (c.kind == CovariateKind::Binary) g["event_prob"] = c.event_prob;
    else {
      g["ar"] = c.ar;
      g["innovation_sd"] = c.innovation_sd;
    }
    if (c.max_lag > 0) {
      g["max_lag"] = c.max_lag;
      nlohmann::json w{{"shape", c.weights.shape}};
      if (c.weights.shape == "exponential") w["rate"] = c.weights.rate;
      if (c.weights.shape == "hump") {
        w["peak"] = c.weights.peak;
        w["width"] = c.weights.width;
      }
      if (c.weights.shape == "custom") w["values"] = c.weights.values;
      g["weights"] = w;
    }
    j["covariates"].push_back(g);
  }
  return j;
}

inline SimScenario scenario_from_json(const nlohmann::json& j) {
  try {
    SimScenario s;
    s.family = parse_family(j.value("family", "poisson"));
    s.series_length = j.value("series_length", 120);
    s.groups = j.value("groups", 1);
    s.seed = j.value("seed", std::uint64_t{1});
    if (j.contains("history") && !j["history"].is_null()) s.history = j["history"].get<int>();
    s.formula = j.at("formula").get<std::string>();
    s.mu = j.value("mu", 0.0);
    s.beta = j.value("beta", std::map<std::string, double>{});
    s.sigma = j.value("sigma", 1.0);
    s.trials = j.value("trials", 10);
    for (const auto& g : j.at("covariates")) {
      CovariateGenerator c;
      c.name = g.at("name").get<std::string>();
      auto kind = g.value("kind", "continuous");
      if (kind != "binary" && kind != "continuous") throw Error(ErrorCode::InvalidSpec, "unknown covariate kind '" + kind + "'");
      c.kind = kind == "binary" ? CovariateKind::Binary : CovariateKind::Continuous;
      c.event_prob = g.value("event_prob", 0.1);
      c.ar = g.value("ar", 0.0);
      c.innovation_sd = g.value("innovation_sd", 1.0);
      c.max_lag = g.value("max_lag", 0);
      if (g.contains("weights")) {
        const auto& w = g["weights"];
        c.weights.shape = w.value("shape", "uniform");
        c.weights.rate = w.value("rate", 0.5);
        c.weights.peak = w.value("peak", 0.0);
        c.weights.width = w.value("width", 1.0);
        c.weights.values = w.value("values", std::vector<double>{});
      }
      s.covariates.push_back(c);
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, std::string("scenario: ") + e.what());
  }
}

inline nlohmann::json to_json(const GroundTruth& t) {
  return {{"family", to_string(t.family)}, {"formula", t.formula}, {"mu", t.mu},
          {"beta", t.beta},                 {"weights", t.weights}, {"seed", t.seed}};
}

inline GroundTruth truth_from_json(const nlohmann::json& j) {
  try {
    GroundTruth t;
    t.family = parse_family(j.value("family", "poisson"));
    t.formula = j.value("formula", "");
    t.mu = j.value("mu", 0.0);
    t.beta = j.value("beta", std::map<std::string, double>{});
    t.weights = j.at("weights").get<std::map<std::string, std::vector<double>>>();
    t.seed = j.value("seed", std::uint64_t{0});
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, std::string("truth: ") + e.what());
  }
}

}  // namespace ecomem
