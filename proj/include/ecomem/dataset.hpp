#pragma once

// Long-format time-series panels: CSV ingest, validation, standardization and
// the lagged covariate histories every memory covariate is filtered from.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ecomem/error.hpp"

namespace ecomem {

enum class CovariateKind { Continuous, Binary };

struct TimeSeriesDataset {
  std::string time_id = "time";
  std::string group_id;  // empty: one implicit group
  std::vector<std::string> group;
  std::vector<long long> time;
  std::vector<std::string> names;  // value columns, file order
  std::map<std::string, std::vector<double>> values;
  std::map<std::string, CovariateKind> kinds;  // absent means continuous

  std::size_t rows() const { return time.size(); }

  bool has(const std::string& name) const { return values.count(name) > 0; }

  const std::vector<double>& column(const std::string& name) const {
    auto it = values.find(name);
    if (it == values.end()) throw Error(ErrorCode::MissingColumn, "column '" + name + "' not found");
    return it->second;
  }

  CovariateKind kind(const std::string& name) const {
    auto it = kinds.find(name);
    return it == kinds.end() ? CovariateKind::Continuous : it->second;
  }

  void add_column(const std::string& name, std::vector<double> data,
                  CovariateKind k = CovariateKind::Continuous) {
    if (data.size() != rows())
      throw Error(ErrorCode::ShapeMismatch, "column '" + name + "' has wrong length");
    if (!has(name)) names.push_back(name);
    values[name] = std::move(data);
    kinds[name] = k;
  }
};

// Group label of row i; a dataset without group labels is one implicit group.
inline const std::string& group_of(const TimeSeriesDataset& ds, std::size_t i) {
  static const std::string none;
  return ds.group.empty() ? none : ds.group[i];
}

struct GroupSegment {
  std::string name;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

// Contiguous row ranges per group. Requires rows grouped (finalize_dataset does that).
inline std::vector<GroupSegment> group_segments(const TimeSeriesDataset& ds) {
  std::vector<GroupSegment> out;
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    if (out.empty() || group_of(ds, i) != out.back().name) out.push_back({group_of(ds, i), i, i});
    out.back().end = i + 1;
  }
  return out;
}

namespace detail {

inline bool is_binary_value(double v) { return v == 0.0 || v == 1.0; }

inline void check_binary(const TimeSeriesDataset& ds, const std::string& name,
                         const std::vector<std::size_t>* file_rows = nullptr) {
  const auto& col = ds.column(name);
  for (std::size_t i = 0; i < col.size(); ++i) {
    if (std::isnan(col[i]) || is_binary_value(col[i])) continue;
    std::size_t row = file_rows ? (*file_rows)[i] : i + 1;
    throw Error(ErrorCode::NonBinaryValue, "column '" + name + "' row " + std::to_string(row) +
                                               " holds " + std::to_string(col[i]));
  }
}

}  // namespace detail

// Orders rows by (group of first appearance, time), then enforces unit time steps
// and the 0/1 domain of binary columns.
inline void finalize_dataset(TimeSeriesDataset& ds) {
  const std::size_t n = ds.rows();
  if (ds.group.size() != n) ds.group.assign(n, "");
  std::map<std::string, std::size_t> first_seen;
  for (const auto& g : ds.group) first_seen.emplace(g, first_seen.size());

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    auto ga = first_seen[group_of(ds, a)], gb = first_seen[group_of(ds, b)];
    return ga != gb ? ga < gb : ds.time[a] < ds.time[b];
  });

  auto permute = [&](auto& v) {
    auto copy = v;
    for (std::size_t i = 0; i < n; ++i) v[i] = copy[order[i]];
  };
  permute(ds.group);
  permute(ds.time);
  for (auto& [name, col] : ds.values) permute(col);

  for (std::size_t i = 1; i < n; ++i) {
    if (group_of(ds, i) != group_of(ds, i - 1)) continue;
    if (ds.time[i] != ds.time[i - 1] + 1) {
      std::string g = group_of(ds, i).empty() ? "<all>" : group_of(ds, i);
      throw Error(ErrorCode::NonContiguousTime,
                  "group " + g + ": time " + std::to_string(ds.time[i]) + " follows " +
                      std::to_string(ds.time[i - 1]));
    }
  }
  for (const auto& [name, k] : ds.kinds)
    if (k == CovariateKind::Binary && ds.has(name)) detail::check_binary(ds, name);
}

// Missing values are an error for every column the model touches.
inline void require_complete(const TimeSeriesDataset& ds, const std::vector<std::string>& columns) {
  for (const auto& name : columns) {
    const auto& col = ds.column(name);
    for (std::size_t i = 0; i < col.size(); ++i)
      if (!std::isfinite(col[i]))
        throw Error(ErrorCode::MissingValue,
                    "column '" + name + "' row " + std::to_string(i + 1) + " is missing");
  }
}

namespace detail {

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(b, e - b + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') quoted = !quoted;
    if (c == ',' && !quoted) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline bool is_missing_token(const std::string& s) { return s.empty() || s == "NA" || s == "NaN"; }

inline double parse_real(const std::string& s, const std::string& column, std::size_t row) {
  if (is_missing_token(s)) return std::numeric_limits<double>::quiet_NaN();
  double v = 0;
  auto first = s.data() + (s.size() > 1 && s[0] == '+' ? 1 : 0);
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorCode::InvalidValue,
                "column '" + column + "' row " + std::to_string(row) + ": cannot parse '" + s + "'");
  return v;
}

inline std::string format_real(double v) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// Reads a header-first CSV. Columns other than the time and group identifiers are
// numeric; kinds marks binary columns, and detect_binary additionally marks every
// column whose observed values are all 0/1.
inline TimeSeriesDataset load_csv(const std::string& path, const std::string& time_id,
                                  const std::string& group_id = {},
                                  const std::map<std::string, CovariateKind>& kinds = {},
                                  bool detect_binary = false) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::Io, "'" + path + "' is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  auto header = detail::split_csv_line(line);

  auto find = [&](const std::string& name) -> long {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<long>(it - header.begin());
  };
  long time_col = find(time_id);
  if (time_col < 0) throw Error(ErrorCode::MissingColumn, "time column '" + time_id + "' not found");
  long group_col = -1;
  if (!group_id.empty()) {
    group_col = find(group_id);
    if (group_col < 0)
      throw Error(ErrorCode::MissingColumn, "group column '" + group_id + "' not found");
  }
  for (const auto& [name, k] : kinds)
    if (find(name) < 0) throw Error(ErrorCode::MissingColumn, "column '" + name + "' not found");

  TimeSeriesDataset ds;
  ds.time_id = time_id;
  ds.group_id = group_id;
  std::vector<std::size_t> value_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (static_cast<long>(c) == time_col || static_cast<long>(c) == group_col) continue;
    ds.names.push_back(header[c]);
    ds.values[header[c]];
    value_cols.push_back(c);
  }

  std::vector<std::size_t> file_rows;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw Error(ErrorCode::InvalidValue, "row " + std::to_string(row) + " has " +
                                               std::to_string(cells.size()) + " fields, expected " +
                                               std::to_string(header.size()));
    long long t = 0;
    const auto& ts = cells[time_col];
    if (detail::is_missing_token(ts))
      throw Error(ErrorCode::MissingValue, "column '" + time_id + "' row " + std::to_string(row) + " is missing");
    auto [ptr, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), t);
    if (ec != std::errc() || ptr != ts.data() + ts.size())
      throw Error(ErrorCode::InvalidValue, "time value '" + ts + "' on row " + std::to_string(row) +
                                               " is not an integer");
    ds.time.push_back(t);
    ds.group.push_back(group_col >= 0 ? cells[group_col] : std::string{});
    for (std::size_t i = 0; i < value_cols.size(); ++i)
      ds.values[ds.names[i]].push_back(detail::parse_real(cells[value_cols[i]], ds.names[i], row));
    file_rows.push_back(row);
  }

  ds.kinds = kinds;
  if (detect_binary) {
    for (const auto& name : ds.names) {
      if (ds.kinds.count(name)) continue;
      const auto& col = ds.values[name];
      bool binary = !col.empty() && std::all_of(col.begin(), col.end(), [](double v) {
        return std::isnan(v) || detail::is_binary_value(v);
      });
      if (binary) ds.kinds[name] = CovariateKind::Binary;
    }
  }
  for (const auto& [name, k] : ds.kinds)
    if (k == CovariateKind::Binary) detail::check_binary(ds, name, &file_rows);
  finalize_dataset(ds);
  return ds;
}

inline void write_csv(const TimeSeriesDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  out << ds.time_id;
  if (!ds.group_id.empty()) out << ',' << ds.group_id;
  for (const auto& n : ds.names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    out << ds.time[i];
    if (!ds.group_id.empty()) out << ',' << group_of(ds, i);
    for (const auto& n : ds.names) out << ',' << detail::format_real(ds.values.at(n)[i]);
    out << '\n';
  }
}

struct ColumnScale {
  double mean = 0.0;
  double sd = 1.0;
};

using StandardizationRecord = std::map<std::string, ColumnScale>;

struct StandardizedDataset {
  TimeSeriesDataset data;
  StandardizationRecord record;
};

// Centers and scales the listed continuous columns over the full series
// (sample sd, n-1 denominator). Binary columns pass through untouched.
inline StandardizedDataset standardize(const TimeSeriesDataset& ds,
                                       const std::vector<std::string>& columns) {
  StandardizedDataset out{ds, {}};
  for (const auto& name : columns) {
    if (ds.kind(name) == CovariateKind::Binary || out.record.count(name)) continue;
    auto& col = out.data.values.at(name);
    require_complete(ds, {name});
    const double n = static_cast<double>(col.size());
    if (col.size() < 2) throw Error(ErrorCode::ZeroVariance, "column '" + name + "' has fewer than 2 values");
    double mean = std::accumulate(col.begin(), col.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : col) ss += (v - mean) * (v - mean);
    double sd = std::sqrt(ss / (n - 1.0));
    if (!(sd > 0.0) || sd < 1e-300 * std::max(1.0, std::abs(mean)))
      throw Error(ErrorCode::ZeroVariance, "column '" + name + "' is constant");
    for (double& v : col) v = (v - mean) / sd;
    out.record[name] = {mean, sd};
  }
  return out;
}

inline StandardizedDataset standardize(const TimeSeriesDataset& ds) {
  std::vector<std::string> continuous;
  for (const auto& n : ds.names)
    if (ds.kind(n) == CovariateKind::Continuous) continuous.push_back(n);
  return standardize(ds, continuous);
}

// One memory covariate. max_lag == 0 means lag-0 only: no spline, weight fixed at 1.
struct MemoryVar {
  std::string name;
  int max_lag = 0;
  int basis_dim = 0;
  int order = 4;

  bool has_spline() const { return max_lag > 0; }
};

struct MemorySpec {
  std::vector<MemoryVar> vars;

  int max_lag() const {
    int m = 0;
    for (const auto& v : vars) m = std::max(m, v.max_lag);
    return m;
  }

  const MemoryVar* find(const std::string& name) const {
    for (const auto& v : vars)
      if (v.name == name) return &v;
    return nullptr;
  }
};

inline int default_basis_dim(int max_lag) { return std::min(10, max_lag + 1); }

// basis_dims may be empty (defaults) or match names; a zero entry requests the default.
inline MemorySpec make_memory_spec(const std::vector<std::string>& names, const std::vector<int>& lags,
                                   const std::vector<int>& basis_dims = {}) {
  if (names.size() != lags.size())
    throw Error(ErrorCode::InvalidSpec, std::to_string(names.size()) + " memory covariates but " +
                                            std::to_string(lags.size()) + " lags");
  if (!basis_dims.empty() && basis_dims.size() != names.size())
    throw Error(ErrorCode::InvalidSpec, "basis dimension list does not match memory covariates");
  MemorySpec spec;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (lags[i] < 0) throw Error(ErrorCode::InvalidSpec, "negative lag for '" + names[i] + "'");
    if (spec.find(names[i])) throw Error(ErrorCode::InvalidSpec, "duplicate memory covariate '" + names[i] + "'");
    MemoryVar v{names[i], lags[i], 0, 4};
    if (v.max_lag > 0) {
      v.basis_dim = basis_dims.empty() || basis_dims[i] == 0 ? default_basis_dim(v.max_lag) : basis_dims[i];
      if (v.basis_dim < 2 || v.basis_dim > v.max_lag + 1)
        throw Error(ErrorCode::InvalidDimension, "basis dimension " + std::to_string(v.basis_dim) +
                                                     " for '" + v.name + "' must lie in [2, L+1]");
      v.order = std::min(4, v.basis_dim);
    }
    spec.vars.push_back(v);
  }
  return spec;
}

// Per-row lagged histories. Row r of lagged[name] holds (x_t, x_{t-1}, ..., x_{t-L}).
struct LagPanel {
  std::map<std::string, Eigen::MatrixXd> lagged;
  std::map<std::string, Eigen::VectorXd> current;
  Eigen::VectorXd response;
  Eigen::VectorXd trials;  // empty unless a trials column was supplied
  std::vector<std::string> row_group;
  std::vector<long long> row_time;

  Eigen::Index rows() const { return response.size(); }
};

// Keeps responses with at least max(L) earlier observations inside their own group.
inline LagPanel build_lag_panel(const TimeSeriesDataset& ds, const MemorySpec& spec,
                                const std::string& response, const std::vector<std::string>& covariates,
                                const std::string& trials = {}) {
  if (!ds.group.empty() && ds.group.size() != ds.rows())
    throw Error(ErrorCode::ShapeMismatch, "group labels do not match the row count");
  std::vector<std::string> covs = covariates;
  for (const auto& v : spec.vars)
    if (std::find(covs.begin(), covs.end(), v.name) == covs.end()) covs.push_back(v.name);
  ds.column(response);
  if (!trials.empty()) ds.column(trials);
  require_complete(ds, covs);

  const auto segments = group_segments(ds);
  const std::size_t max_lag = static_cast<std::size_t>(spec.max_lag());
  std::vector<std::size_t> keep;
  for (const auto& seg : segments)
    for (std::size_t i = seg.begin + max_lag; i < seg.end; ++i) keep.push_back(i);
  if (keep.empty())
    throw Error(ErrorCode::SeriesTooShort, "no group has more than " + std::to_string(max_lag) +
                                               " time points (first group '" +
                                               (segments.empty() ? std::string() : segments[0].name) + "')");

  const auto n = static_cast<Eigen::Index>(keep.size());
  LagPanel panel;
  panel.response.resize(n);
  const auto& y = ds.column(response);
  for (Eigen::Index r = 0; r < n; ++r) {
    panel.response(r) = y[keep[r]];
    if (!std::isfinite(panel.response(r)))
      throw Error(ErrorCode::MissingValue, "column '" + response + "' row " + std::to_string(keep[r] + 1) +
                                               " is missing");
    panel.row_group.push_back(group_of(ds, keep[r]));
    panel.row_time.push_back(ds.time[keep[r]]);
  }
  if (!trials.empty()) {
    const auto& nt = ds.column(trials);
    panel.trials.resize(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      double m = nt[keep[r]], yr = panel.response(r);
      if (!(m >= 1.0) || m != std::floor(m))
        throw Error(ErrorCode::InvalidValue, "trials must be a positive integer (row " + std::to_string(keep[r] + 1) + ")");
      if (yr < 0.0 || yr > m || yr != std::floor(yr))
        throw Error(ErrorCode::InvalidValue, "response must be an integer in [0, trials] (row " +
                                                 std::to_string(keep[r] + 1) + ")");
      panel.trials(r) = m;
    }
  }
  for (const auto& name : covs) {
    const auto& x = ds.column(name);
    Eigen::VectorXd cur(n);
    for (Eigen::Index r = 0; r < n; ++r) cur(r) = x[keep[r]];
    panel.current[name] = std::move(cur);
  }
  for (const auto& v : spec.vars) {
    const auto& x = ds.column(v.name);
    Eigen::MatrixXd m(n, v.max_lag + 1);
    for (Eigen::Index r = 0; r < n; ++r)
      for (int l = 0; l <= v.max_lag; ++l) m(r, l) = x[keep[r] - static_cast<std::size_t>(l)];
    panel.lagged[v.name] = std::move(m);
  }
  return panel;
}

}  // namespace ecomem
