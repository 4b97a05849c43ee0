#pragma once

// Command-line front end: simulate, fit, summary, plot, compare.
// Exit codes: 0 success, 2 usage or validation error, 3 fit written with R-hat > 1.1.

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ecomem/dataset.hpp"
#include "ecomem/diagnostics.hpp"
#include "ecomem/error.hpp"
#include "ecomem/fit.hpp"
#include "ecomem/io.hpp"
#include "ecomem/sampler.hpp"
#include "ecomem/simulate.hpp"
#include "ecomem/svg.hpp"

namespace ecomem::cli {

inline constexpr int kOk = 0;
inline constexpr int kUsage = 2;
inline constexpr int kConvergenceWarning = 3;
inline constexpr double kRhatLimit = 1.1;

// Parameters whose R-hat gates the exit status: everything except raw spline coefficients.
inline bool is_monitored(const std::string& name) { return name.rfind("eta.", 0) != 0; }

inline double max_rhat(const PosteriorSummary& s) {
  double m = std::numeric_limits<double>::quiet_NaN();
  for (const auto& p : s.parameters)
    if (is_monitored(p.name) && std::isfinite(p.rhat)) m = std::isnan(m) ? p.rhat : std::max(m, p.rhat);
  return m;
}

inline std::string timestamp() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  out << text;
}

struct SimulateArgs {
  std::string scenario, out;
  std::optional<std::uint64_t> seed;
};

inline int cmd_simulate(const SimulateArgs& a, std::ostream& os) {
  if (!fs::exists(a.scenario)) throw Error(ErrorCode::Io, "scenario file '" + a.scenario + "' not found");
  SimScenario sc = scenario_from_json(read_json(a.scenario));
  if (a.seed) sc.seed = *a.seed;
  auto result = generate(sc);
  fs::create_directories(a.out);
  write_csv(result.data, (fs::path(a.out) / "data.csv").string());
  write_json((fs::path(a.out) / "truth.json").string(), to_json(result.truth));
  write_json((fs::path(a.out) / "scenario.json").string(), to_json(sc));
  os << "wrote " << result.data.rows() << " rows to " << (fs::path(a.out) / "data.csv").string() << '\n';
  return kOk;
}

struct FitArgs {
  std::string data, formula, family = "gaussian", time_id = "time", group_id, trials, out;
  std::vector<std::string> mem_vars, binary;
  std::vector<int> lags, basis_dims;
  int chains = 3, iters = 10000, burn_in = 5000, thin = 5;
  std::uint64_t seed = 1;
  double ridge = kDefaultRidge;
  bool sequential = false;
};

inline int cmd_fit(const FitArgs& a, std::ostream& os) {
  if (a.mem_vars.size() != a.lags.size())
    throw Error(ErrorCode::InvalidSpec, "--mem-vars lists " + std::to_string(a.mem_vars.size()) + " names but --lags lists " +
                                            std::to_string(a.lags.size()) + " values");
  std::map<std::string, CovariateKind> kinds;
  for (const auto& b : a.binary) kinds[b] = CovariateKind::Binary;
  auto ds = load_csv(a.data, a.time_id, a.group_id, kinds, a.binary.empty());

  FitOptions opt;
  opt.formula = a.formula;
  opt.family = parse_family(a.family);
  opt.mem_vars = a.mem_vars;
  opt.lags = a.lags;
  opt.basis_dims = a.basis_dims;
  opt.trials = a.trials;
  opt.prior.ridge = a.ridge;
  auto fit = prepare_fit(ds, opt);

  SamplerConfig sc;
  sc.chains = a.chains;
  sc.iterations = a.iters;
  sc.burn_in = a.burn_in;
  sc.thin = a.thin;
  sc.seed = a.seed;
  sc.parallel = !a.sequential;
  const auto start = std::chrono::steady_clock::now();
  ChainSet set = run_chains(fit.model, sc);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  fs::create_directories(a.out);
  auto files = write_chains(a.out, set);
  write_csv(fit.data.data, (fs::path(a.out) / "model_data.csv").string());
  auto meta = fit_metadata(fit, set, wall);
  meta["manifest"] = {{"data", fs::absolute(a.data).string()},
                      {"chains", files},
                      {"metadata", "fit_meta.json"},
                      {"model_data", "model_data.csv"},
                      {"created", timestamp()}};
  write_json((fs::path(a.out) / "fit_meta.json").string(), meta);

  os << "fit: " << fit.formula.text() << " (" << to_string(opt.family) << "), " << fit.model.rows() << " rows, "
     << set.chains.size() << " chains x " << sc.retained() << " retained draws, " << std::fixed << std::setprecision(1)
     << wall << " s\n";
  os << "acceptance after burn-in (mean over chains):\n";
  std::map<std::string, double> rates;
  std::vector<std::string> order;
  for (const auto& c : set.chains)
    for (const auto& b : c.acceptance) {
      if (!rates.count(b.block)) order.push_back(b.block);
      rates[b.block] += b.rate() / static_cast<double>(set.chains.size());
    }
  os << std::setprecision(3);
  for (const auto& b : order) os << "  " << std::left << std::setw(20) << b << rates[b] << '\n';

  if (set.chains.size() < 2 || sc.retained() < 4) {
    os << "max R-hat: n/a (needs >= 2 chains)\n";
    return kOk;
  }
  auto summary = summarize(set);
  double rhat = max_rhat(summary);
  os << "max R-hat: " << rhat << '\n';
  if (rhat > kRhatLimit) {
    os << "warning: R-hat above " << kRhatLimit << "; run longer chains\n";
    return kConvergenceWarning;
  }
  return kOk;
}

struct SummaryArgs {
  std::string fit;
  double cred = 0.95, threshold = 0.01;
};

inline int cmd_summary(const SummaryArgs& a, std::ostream& os) {
  ChainSet set = read_chains(a.fit);
  auto s = summarize(set, a.cred, a.threshold);
  write_summary_csv((fs::path(a.fit) / "summary.csv").string(), s);
  nlohmann::json meta{{"cred", a.cred}, {"threshold", a.threshold}, {"memory", nlohmann::json::object()}};
  for (const auto& f : s.memory) {
    write_memory_csv((fs::path(a.fit) / ("memory_" + f.name + ".csv")).string(), f);
    meta["memory"][f.name] = f.memory_lags;
  }
  write_json((fs::path(a.fit) / "summary_meta.json").string(), meta);

  os << std::left << std::setw(16) << "parameter" << std::right << std::setw(10) << "mean" << std::setw(10) << "sd"
     << std::setw(10) << "lower" << std::setw(10) << "upper" << std::setw(8) << "rhat" << std::setw(8) << "ess" << '\n';
  os << std::fixed;
  for (const auto& p : s.parameters) {
    if (p.name.rfind("eta.", 0) == 0) continue;
    os << std::left << std::setw(16) << p.name << std::right << std::setprecision(4) << std::setw(10) << p.mean
       << std::setw(10) << p.sd << std::setw(10) << p.lower << std::setw(10) << p.upper << std::setprecision(3)
       << std::setw(8) << p.rhat << std::setprecision(0) << std::setw(8) << p.ess << '\n';
  }
  for (const auto& f : s.memory) {
    os << "memory " << f.name << ": lags with mean weight > " << a.threshold << ":";
    for (int l : f.memory_lags) os << ' ' << l;
    os << '\n';
  }
  os << "credible level " << a.cred << '\n';
  return kOk;
}

struct PlotArgs {
  std::string fit, out, truth;
  double cred = 0.95, threshold = 0.01;
};

inline int cmd_plot(const PlotArgs& a, std::ostream& os) {
  ChainSet set = read_chains(a.fit);
  auto s = summarize(set, a.cred, a.threshold);
  if (s.memory.empty()) throw Error(ErrorCode::InvalidSpec, "fit has no memory covariates to plot");
  std::map<std::string, std::vector<double>> truth;
  if (!a.truth.empty()) truth = truth_from_json(read_json(a.truth)).weights;
  if (auto parent = fs::path(a.out).parent_path(); !parent.empty()) fs::create_directories(parent);
  write_text(a.out, svg::memory_plot(s.memory, truth));
  os << "wrote " << a.out << " (" << s.memory.size() << " panels)\n";
  return kOk;
}

struct CompareArgs {
  std::string fit, baseline, term, out;
};

inline int cmd_compare(const CompareArgs& a, std::ostream& os) {
  auto cmp = effect_comparison(read_chains(a.fit), read_chains(a.baseline), a.term);
  if (auto parent = fs::path(a.out).parent_path(); !parent.empty()) fs::create_directories(parent);
  write_text(a.out, svg::effect_plot(cmp));
  double mm = 0, mb = 0;
  for (double v : cmp.memory) mm += v / static_cast<double>(cmp.memory.size());
  for (double v : cmp.baseline) mb += v / static_cast<double>(cmp.baseline.size());
  os << "beta." << cmp.term << ": memory mean " << mm << ", baseline mean " << mb << "\nwrote " << a.out << '\n';
  return kOk;
}

inline int run(const std::vector<std::string>& args, std::ostream& os = std::cout, std::ostream& es = std::cerr) {
  CLI::App app{"Ecological memory models: simulate, fit, summarize and plot lag-weight functions"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Generate a dataset from a scenario file");
  s->add_option("--scenario", sim.scenario, "Scenario JSON")->required();
  s->add_option("--out", sim.out, "Output directory")->required();
  s->add_option("--seed", sim.seed, "Override the scenario seed");

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Fit the memory model by MCMC");
  f->add_option("--data", fit.data, "Long-format CSV")->required();
  f->add_option("--formula", fit.formula, "Model formula, e.g. \"y ~ v1*v2 + v2*v3\"")->required();
  f->add_option("--family", fit.family, "gaussian | poisson | binomial")->capture_default_str();
  f->add_option("--mem-vars", fit.mem_vars, "Memory covariates (comma separated)")->delimiter(',');
  f->add_option("--lags", fit.lags, "Maximum lag per memory covariate")->delimiter(',');
  f->add_option("--basis-dims", fit.basis_dims, "Spline basis dimension per memory covariate")->delimiter(',');
  f->add_option("--binary", fit.binary, "Binary covariates (default: detect 0/1 columns)")->delimiter(',');
  f->add_option("--time-id", fit.time_id, "Time column")->capture_default_str();
  f->add_option("--group-id", fit.group_id, "Group column");
  f->add_option("--trials", fit.trials, "Trials column (binomial)");
  f->add_option("--chains", fit.chains)->capture_default_str();
  f->add_option("--iters", fit.iters)->capture_default_str();
  f->add_option("--burn-in", fit.burn_in)->capture_default_str();
  f->add_option("--thin", fit.thin)->capture_default_str();
  f->add_option("--seed", fit.seed)->capture_default_str();
  f->add_option("--ridge", fit.ridge, "Ridge added to the spline penalty")->capture_default_str();
  f->add_flag("--sequential", fit.sequential, "Run chains one after another");
  f->add_option("--out", fit.out, "Output directory")->required();

  SummaryArgs sum;
  auto* su = app.add_subcommand("summary", "Summarize a fit");
  su->add_option("--fit", sum.fit, "Fit directory")->required();
  su->add_option("--cred", sum.cred, "Credible level")->capture_default_str();
  su->add_option("--threshold", sum.threshold, "Memory weight threshold")->capture_default_str();

  PlotArgs plot;
  auto* p = app.add_subcommand("plot", "Plot memory functions as SVG");
  p->add_option("--fit", plot.fit, "Fit directory")->required();
  p->add_option("--out", plot.out, "SVG path")->required();
  p->add_option("--truth", plot.truth, "truth.json from simulate");
  p->add_option("--cred", plot.cred)->capture_default_str();
  p->add_option("--threshold", plot.threshold)->capture_default_str();

  CompareArgs cmp;
  auto* c = app.add_subcommand("compare", "Overlay a coefficient's posterior with and without memory");
  c->add_option("--fit", cmp.fit, "Memory fit directory")->required();
  c->add_option("--baseline", cmp.baseline, "Lag-0 baseline fit directory")->required();
  c->add_option("--term", cmp.term, "Formula term")->required();
  c->add_option("--out", cmp.out, "SVG path")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::Success&) {
    os << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    es << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (s->parsed()) return cmd_simulate(sim, os);
    if (f->parsed()) return cmd_fit(fit, os);
    if (su->parsed()) return cmd_summary(sum, os);
    if (p->parsed()) return cmd_plot(plot, os);
    if (c->parsed()) return cmd_compare(cmp, os);
  } catch (const Error& e) {
    es << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    es << "error: " << e.what() << '\n';
    return 1;
  }
  return kUsage;
}

}  // namespace ecomem::cli
