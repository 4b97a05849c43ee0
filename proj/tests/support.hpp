#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <unistd.h>
#include <string>

#include "ecomem.hpp"

namespace testing_support {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("ecomem_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small panel with one memory covariate x (lags 0..L), a plain covariate z and a
// response suited to the family. Rows are random, so this is only for density checks.
inline ecomem::LagPanel random_panel(ecomem::Family family, int n, int L, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_int_distribution<int> count(0, 6);
  ecomem::LagPanel p;
  Eigen::MatrixXd X(n, L + 1);
  for (int r = 0; r < n; ++r)
    for (int l = 0; l <= L; ++l) X(r, l) = z(rng);
  p.lagged["x"] = X;
  p.current["x"] = X.col(0);
  Eigen::VectorXd zc(n);
  for (int r = 0; r < n; ++r) zc(r) = z(rng);
  p.current["z"] = zc;
  p.response.resize(n);
  if (family == ecomem::Family::Binomial) p.trials = Eigen::VectorXd::Constant(n, 6.0);
  for (int r = 0; r < n; ++r) {
    p.response(r) = family == ecomem::Family::Gaussian ? z(rng) : static_cast<double>(count(rng));
    p.row_group.push_back("");
    p.row_time.push_back(r);
  }
  return p;
}

inline ecomem::ModelConfig config_for(ecomem::Family family, const std::string& formula, int L, int k) {
  ecomem::ModelConfig c;
  c.family = family;
  c.formula = ecomem::parse_formula(formula);
  c.memory = ecomem::make_memory_spec({"x"}, {L}, {k});
  return c;
}

inline ecomem::ModelState random_state(const ecomem::Model& m, std::mt19937_64& rng, double spread = 0.5) {
  std::normal_distribution<double> z(0.0, 1.0);
  ecomem::ModelState s;
  s.mu = spread * z(rng);
  s.beta.resize(m.n_terms());
  for (Eigen::Index i = 0; i < s.beta.size(); ++i) s.beta(i) = spread * z(rng);
  for (const auto& b : m.blocks()) {
    Eigen::VectorXd e(b.design.dim());
    for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = z(rng);
    s.eta.push_back(e);
    s.tau.push_back(std::exp(0.5 * z(rng)));
  }
  s.sigma2 = std::exp(0.5 * z(rng));
  return s;
}

inline ecomem::FitOptions canonical_options() {
  ecomem::FitOptions o;
  o.formula = "y ~ v1*v2 + v2*v3";
  o.family = ecomem::Family::Poisson;
  o.mem_vars = {"v1", "v2"};
  o.lags = {10, 6};
  return o;
}

inline ecomem::FitOptions disturbance_options(int lag = 12) {
  ecomem::FitOptions o;
  o.formula = "gr ~ age + ftc";
  o.family = ecomem::Family::Gaussian;
  o.mem_vars = {"ftc"};
  o.lags = {lag};
  return o;
}

}  // namespace testing_support
