#pragma once

// Convergence diagnostics and posterior summaries over a ChainSet.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "ecomem/error.hpp"
#include "ecomem/sampler.hpp"

namespace ecomem {

using Draws = std::vector<std::vector<double>>;  // per chain

namespace detail {

inline double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double var_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline std::vector<double> pooled(const Draws& chains) {
  std::vector<double> all;
  for (const auto& c : chains) all.insert(all.end(), c.begin(), c.end());
  return all;
}

}  // namespace detail

// Split-chain potential scale reduction. NaN when every draw is identical.
inline double split_rhat(const Draws& chains) {
  if (chains.size() < 2) throw Error(ErrorCode::InsufficientDraws, "split R-hat needs at least 2 chains");
  std::size_t n = std::numeric_limits<std::size_t>::max();
  for (const auto& c : chains) n = std::min(n, c.size());
  if (n < 4) throw Error(ErrorCode::InsufficientDraws, "split R-hat needs at least 4 draws per chain");
  const std::size_t half = n / 2;

  std::vector<std::vector<double>> halves;
  for (const auto& c : chains) {
    halves.emplace_back(c.begin(), c.begin() + half);
    halves.emplace_back(c.begin() + (n - half), c.begin() + n);
  }
  const double len = static_cast<double>(half);
  std::vector<double> means, vars;
  for (const auto& h : halves) {
    means.push_back(detail::mean_of(h));
    vars.push_back(detail::var_of(h));
  }
  const double W = detail::mean_of(vars);
  const double B = len * detail::var_of(means);
  if (!(W > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double var_plus = (len - 1.0) / len * W + B / len;
  return std::sqrt(var_plus / W);
}

// Multi-chain autocorrelation ESS with Geyer's initial positive sequence.
inline double effective_sample_size(const Draws& chains) {
  if (chains.empty()) throw Error(ErrorCode::InsufficientDraws, "no chains");
  std::size_t n = std::numeric_limits<std::size_t>::max();
  for (const auto& c : chains) n = std::min(n, c.size());
  if (n < 4) throw Error(ErrorCode::InsufficientDraws, "ESS needs at least 4 draws per chain");
  const double m = static_cast<double>(chains.size()), N = static_cast<double>(n);

  std::vector<double> means, vars;
  for (const auto& c : chains) {
    std::vector<double> head(c.begin(), c.begin() + n);
    means.push_back(detail::mean_of(head));
    vars.push_back(detail::var_of(head));
  }
  const double W = detail::mean_of(vars);
  const double B_over_n = chains.size() > 1 ? detail::var_of(means) : 0.0;
  const double var_plus = (N - 1.0) / N * W + B_over_n;
  if (!(W > 0.0) || !(var_plus > 0.0)) return std::numeric_limits<double>::quiet_NaN();

  // rho_t = 1 - (W - mean_c acov_c(t)) / var_plus
  auto rho = [&](std::size_t lag) {
    double acov = 0.0;
    for (std::size_t c = 0; c < chains.size(); ++c) {
      const auto& x = chains[c];
      double s = 0.0;
      for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - means[c]) * (x[i + lag] - means[c]);
      acov += s / N;
    }
    acov /= m;
    return 1.0 - (W - acov) / var_plus;
  };

  double tau = -1.0;  // 1 + 2 sum rho = -rho_0 + 2 sum of pair sums
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t + 1 < n; t += 2) {
    double pair = rho(t) + rho(t + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);  // initial monotone sequence
    tau += 2.0 * pair;
    prev_pair = pair;
  }
  tau = std::max(tau, 1.0 / std::log10(m * N));
  return m * N / tau;
}

// Type-7 (linear interpolation) sample quantile.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double median = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double rhat = std::numeric_limits<double>::quiet_NaN();
  double ess = std::numeric_limits<double>::quiet_NaN();
};

inline ParameterSummary summarize_parameter(const std::string& name, const Draws& chains, double cred) {
  ParameterSummary p;
  p.name = name;
  auto all = detail::pooled(chains);
  if (all.empty()) throw Error(ErrorCode::InsufficientDraws, "no draws for '" + name + "'");
  p.mean = detail::mean_of(all);
  p.sd = all.size() > 1 ? std::sqrt(detail::var_of(all)) : 0.0;
  const double a = 0.5 * (1.0 - cred);
  p.median = quantile(all, 0.5);
  p.lower = quantile(all, a);
  p.upper = quantile(all, 1.0 - a);
  bool enough = true;
  for (const auto& c : chains) enough = enough && c.size() >= 4;
  if (enough && chains.size() >= 2) p.rhat = split_rhat(chains);
  if (enough) p.ess = effective_sample_size(chains);
  return p;
}

struct MemoryFunction {
  std::string name;
  std::vector<double> mean;   // per lag
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<int> memory_lags;  // lags with mean weight above the threshold
  double cred = 0.95;
  double threshold = 0.01;

  int max_lag() const { return static_cast<int>(mean.size()) - 1; }
};

inline std::vector<int> memory_length(const std::vector<double>& mean_weights, double threshold) {
  std::vector<int> lags;
  for (std::size_t l = 0; l < mean_weights.size(); ++l)
    if (mean_weights[l] > threshold) lags.push_back(static_cast<int>(l));
  return lags;
}

struct PosteriorSummary {
  std::vector<ParameterSummary> parameters;
  std::vector<MemoryFunction> memory;
  double cred = 0.95;
  double threshold = 0.01;

  const ParameterSummary& parameter(const std::string& name) const {
    for (const auto& p : parameters)
      if (p.name == name) return p;
    throw Error(ErrorCode::TermNotFound, "no parameter named '" + name + "'");
  }
};

// Memory covariates are recovered from the w.<var>.<lag> columns of the manifest.
inline std::vector<std::string> memory_variables(const ChainSet& chains) {
  std::vector<std::string> vars;
  for (const auto& n : chains.names) {
    if (n.rfind("w.", 0) != 0) continue;
    auto v = n.substr(2, n.rfind('.') - 2);
    if (std::find(vars.begin(), vars.end(), v) == vars.end()) vars.push_back(v);
  }
  return vars;
}

inline PosteriorSummary summarize(const ChainSet& chains, double cred = 0.95, double threshold = 0.01) {
  if (chains.chains.empty() || chains.chains.front().draws.rows() == 0)
    throw Error(ErrorCode::InsufficientDraws, "chain set holds no draws");
  if (!(cred > 0.0 && cred < 1.0)) throw Error(ErrorCode::InvalidSpec, "credible level must lie in (0, 1)");
  PosteriorSummary out;
  out.cred = cred;
  out.threshold = threshold;
  for (const auto& name : chains.names) out.parameters.push_back(summarize_parameter(name, chains.parameter(name), cred));
  for (const auto& v : memory_variables(chains)) {
    MemoryFunction f;
    f.name = v;
    f.cred = cred;
    f.threshold = threshold;
    for (int l = 0; chains.has("w." + v + "." + std::to_string(l)); ++l) {
      const auto& p = out.parameter("w." + v + "." + std::to_string(l));
      f.mean.push_back(p.mean);
      f.lower.push_back(p.lower);
      f.upper.push_back(p.upper);
    }
    f.memory_lags = memory_length(f.mean, threshold);
    out.memory.push_back(std::move(f));
  }
  return out;
}

struct EffectComparison {
  std::string term;
  std::vector<double> memory;    // pooled draws, memory model
  std::vector<double> baseline;  // pooled draws, lag-0 baseline
};

inline EffectComparison effect_comparison(const ChainSet& memory_fit, const ChainSet& baseline_fit,
                                          const std::string& term) {
  const std::string name = term.rfind("beta.", 0) == 0 ? term : "beta." + term;
  if (!memory_fit.has(name)) throw Error(ErrorCode::TermNotFound, "memory fit has no term '" + term + "'");
  if (!baseline_fit.has(name)) throw Error(ErrorCode::TermNotFound, "baseline fit has no term '" + term + "'");
  return {name.substr(5), detail::pooled(memory_fit.parameter(name)), detail::pooled(baseline_fit.parameter(name))};
}

// Gaussian kernel density on an even grid, Silverman bandwidth.
struct DensityCurve {
  std::vector<double> x;
  std::vector<double> y;
};

inline DensityCurve kernel_density(const std::vector<double>& draws, double from, double to, int points = 200) {
  DensityCurve d;
  if (draws.size() < 2) return d;
  const double sd = std::sqrt(detail::var_of(draws));
  const double iqr = quantile(draws, 0.75) - quantile(draws, 0.25);
  double h = 0.9 * std::min(sd, iqr / 1.34) * std::pow(static_cast<double>(draws.size()), -0.2);
  if (!(h > 0.0)) h = sd > 0.0 ? sd : 1e-3;
  const double norm = 1.0 / (static_cast<double>(draws.size()) * h * std::sqrt(2.0 * 3.14159265358979323846));
  for (int i = 0; i < points; ++i) {
    double x = from + (to - from) * i / (points - 1);
    double s = 0.0;
    for (double v : draws) {
      double z = (x - v) / h;
      s += std::exp(-0.5 * z * z);
    }
    d.x.push_back(x);
    d.y.push_back(s * norm);
  }
  return d;
}

}  // namespace ecomem
