#pragma once

// Dataset + formula + memory settings -> a ready-to-sample Model.

#include <string>
#include <vector>

#include "ecomem/dataset.hpp"
#include "ecomem/error.hpp"
#include "ecomem/formula.hpp"
#include "ecomem/model.hpp"

namespace ecomem {

struct FitOptions {
  std::string formula;
  Family family = Family::Gaussian;
  std::vector<std::string> mem_vars;
  std::vector<int> lags;
  std::vector<int> basis_dims;  // empty: defaults
  std::string trials;           // binomial trials column
  PriorConfig prior;
};

struct PreparedFit {
  Formula formula;
  MemorySpec memory;
  StandardizedDataset data;  // continuous covariates standardized over the full series
  Model model;
};

inline PreparedFit prepare_fit(const TimeSeriesDataset& ds, const FitOptions& opt) {
  Formula formula = parse_formula(opt.formula);
  MemorySpec memory = make_memory_spec(opt.mem_vars, opt.lags, opt.basis_dims);
  ds.column(formula.response);
  const auto covariates = formula.covariates();
  for (const auto& c : covariates) ds.column(c);
  for (const auto& v : memory.vars) {
    ds.column(v.name);
    bool in_formula = std::find(covariates.begin(), covariates.end(), v.name) != covariates.end();
    if (!in_formula) throw Error(ErrorCode::InvalidSpec, "memory covariate '" + v.name + "' does not appear in the formula");
  }
  if (opt.family == Family::Binomial && opt.trials.empty())
    throw Error(ErrorCode::InvalidSpec, "binomial family requires a trials column");
  require_complete(ds, covariates);

  StandardizedDataset data = standardize(ds, covariates);
  LagPanel panel = build_lag_panel(data.data, memory, formula.response, covariates,
                                   opt.family == Family::Binomial ? opt.trials : std::string{});
  ModelConfig config{opt.family, formula, memory, opt.prior};
  Model model(std::move(panel), std::move(config));
  return {std::move(formula), std::move(memory), std::move(data), std::move(model)};
}

}  // namespace ecomem
