#pragma once

// Chain persistence: one wide CSV per chain (chain_<c>.csv, c from 1) whose header
// is the parameter manifest, plus fit_meta.json describing the fit.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecomem/dataset.hpp"
#include "ecomem/diagnostics.hpp"
#include "ecomem/error.hpp"
#include "ecomem/fit.hpp"
#include "ecomem/sampler.hpp"

namespace ecomem {

namespace fs = std::filesystem;

inline std::string chain_file_name(std::size_t c) { return "chain_" + std::to_string(c + 1) + ".csv"; }

inline void write_chain_csv(const std::string& path, const std::vector<std::string>& names, const Eigen::MatrixXd& draws) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  out << '\n';
  for (Eigen::Index r = 0; r < draws.rows(); ++r) {
    for (Eigen::Index c = 0; c < draws.cols(); ++c) out << (c ? "," : "") << detail::format_real(draws(r, c));
    out << '\n';
  }
}

inline std::vector<std::string> write_chains(const std::string& dir, const ChainSet& set) {
  fs::create_directories(dir);
  std::vector<std::string> files;
  for (std::size_t c = 0; c < set.chains.size(); ++c) {
    files.push_back(chain_file_name(c));
    write_chain_csv((fs::path(dir) / files.back()).string(), set.names, set.chains[c].draws);
  }
  return files;
}

inline ChainSet read_chains(const std::string& dir) {
  ChainSet set;
  for (std::size_t c = 0;; ++c) {
    auto path = fs::path(dir) / chain_file_name(c);
    if (!fs::exists(path)) break;
    std::ifstream in(path);
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::Io, path.string() + " is empty");
    auto header = detail::split_csv_line(line);
    if (set.names.empty()) set.names = header;
    else if (header != set.names) throw Error(ErrorCode::ShapeMismatch, path.string() + " has a different manifest");
    std::vector<std::vector<double>> rows;
    std::size_t row = 1;
    while (std::getline(in, line)) {
      ++row;
      if (detail::trim(line).empty()) continue;
      auto cells = detail::split_csv_line(line);
      if (cells.size() != header.size()) throw Error(ErrorCode::ShapeMismatch, path.string() + ": ragged row " + std::to_string(row));
      std::vector<double> v;
      for (std::size_t i = 0; i < cells.size(); ++i) v.push_back(detail::parse_real(cells[i], header[i], row));
      rows.push_back(std::move(v));
    }
    ChainDraws cd;
    cd.draws.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(header.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t i = 0; i < header.size(); ++i) cd.draws(r, i) = rows[r][i];
    set.chains.push_back(std::move(cd));
  }
  if (set.chains.empty()) throw Error(ErrorCode::Io, "no chain files in '" + dir + "'");
  return set;
}

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidValue, path + ": " + e.what());
  }
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

inline nlohmann::json sampler_json(const SamplerConfig& c) {
  return {{"chains", c.chains},   {"iterations", c.iterations},       {"burn_in", c.burn_in},
          {"thin", c.thin},       {"seed", c.seed},                   {"adapt_window", c.adapt_window},
          {"target_accept", c.target_accept}, {"retained_per_chain", c.retained()}};
}

inline nlohmann::json fit_metadata(const PreparedFit& fit, const ChainSet& set, double wall_seconds) {
  const auto& model = fit.model;
  const auto& prior = model.config().prior;
  nlohmann::json j;
  j["formula"] = fit.formula.text();
  j["response"] = fit.formula.response;
  j["terms"] = nlohmann::json::array();
  for (const auto& t : fit.formula.terms) j["terms"].push_back(t.label());
  j["family"] = to_string(model.family());
  j["link"] = to_string(link_of(model.family()));
  j["rows_used"] = model.rows();
  j["memory"] = nlohmann::json::array();
  for (const auto& v : fit.memory.vars) {
    nlohmann::json m{{"name", v.name}, {"max_lag", v.max_lag}, {"basis_dim", v.basis_dim}, {"order", v.order}};
    int b = model.block_index(v.name);
    if (b >= 0) {
      const auto& k = model.blocks()[b].design.knots;
      m["knots"] = std::vector<double>(k.data(), k.data() + k.size());
    }
    j["memory"].push_back(m);
  }
  j["prior"] = {{"coef_sd", prior.coef_sd},     {"tau_df", prior.tau_df},       {"tau_scale", prior.tau_scale},
                {"sigma_df", prior.sigma_df},   {"sigma_scale", prior.sigma_scale}, {"ridge", prior.ridge}};
  j["sampler"] = sampler_json(set.config);
  j["standardization"] = nlohmann::json::object();
  for (const auto& [name, sc] : fit.data.record) j["standardization"][name] = {{"mean", sc.mean}, {"sd", sc.sd}};
  j["chains"] = nlohmann::json::array();
  for (std::size_t c = 0; c < set.chains.size(); ++c) {
    nlohmann::json cj{{"file", chain_file_name(c)}, {"seed", set.chains[c].seed}};
    cj["acceptance"] = nlohmann::json::object();
    for (const auto& a : set.chains[c].acceptance)
      cj["acceptance"][a.block] = {{"rate_after_burn_in", a.rate()}, {"rate_overall", a.overall_rate()}};
    j["chains"].push_back(cj);
  }
  j["wall_time_seconds"] = wall_seconds;
  return j;
}

inline void write_summary_csv(const std::string& path, const PosteriorSummary& s) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  out << "name,mean,sd,lower,upper,rhat,ess\n";
  for (const auto& p : s.parameters)
    out << p.name << ',' << detail::format_real(p.mean) << ',' << detail::format_real(p.sd) << ','
        << detail::format_real(p.lower) << ',' << detail::format_real(p.upper) << ',' << detail::format_real(p.rhat)
        << ',' << detail::format_real(p.ess) << '\n';
}

inline void write_memory_csv(const std::string& path, const MemoryFunction& f) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  out << "lag,mean,lower,upper\n";
  for (std::size_t l = 0; l < f.mean.size(); ++l)
    out << l << ',' << detail::format_real(f.mean[l]) << ',' << detail::format_real(f.lower[l]) << ','
        << detail::format_real(f.upper[l]) << '\n';
}

}  // namespace ecomem
