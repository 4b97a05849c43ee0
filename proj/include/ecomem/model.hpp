#pragma once

// Model mathematics: softmax-of-spline lag weights, covariate filtering, the
// linear predictor, family likelihoods, priors, the joint log-posterior and its
// gradient in unconstrained coordinates.

#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ecomem/dataset.hpp"
#include "ecomem/error.hpp"
#include "ecomem/formula.hpp"
#include "ecomem/spline.hpp"

namespace ecomem {

enum class Family { Gaussian, Poisson, Binomial };
enum class Link { Identity, Log, Logit };

inline Link link_of(Family f) {
  switch (f) {
    case Family::Gaussian: return Link::Identity;
    case Family::Poisson: return Link::Log;
    case Family::Binomial: return Link::Logit;
  }
  return Link::Identity;
}

inline const char* to_string(Family f) {
  switch (f) {
    case Family::Gaussian: return "gaussian";
    case Family::Poisson: return "poisson";
    case Family::Binomial: return "binomial";
  }
  return "?";
}

inline const char* to_string(Link l) {
  switch (l) {
    case Link::Identity: return "identity";
    case Link::Log: return "log";
    case Link::Logit: return "logit";
  }
  return "?";
}

inline Family parse_family(const std::string& s) {
  if (s == "gaussian") return Family::Gaussian;
  if (s == "poisson") return Family::Poisson;
  if (s == "binomial") return Family::Binomial;
  throw Error(ErrorCode::InvalidSpec, "unknown family '" + s + "' (gaussian, poisson, binomial)");
}

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Ridge added to the difference penalty inside the eta prior precision.
inline constexpr double kDefaultRidge = 1e-3;

struct PriorConfig {
  double coef_sd = 100.0;     // mu and every beta
  double tau_df = 3.0;        // folded-t on tau
  double tau_scale = 1.0;
  double sigma_df = 3.0;      // half-t on sigma (gaussian)
  double sigma_scale = 0.0;   // <= 0: 5 x sd(response), fixed when the Model is built
  double ridge = kDefaultRidge;
};

struct ModelConfig {
  Family family = Family::Gaussian;
  Formula formula;
  MemorySpec memory;
  PriorConfig prior;
};

// eta[j] and tau[j] follow Model::blocks() (memory covariates with L >= 1).
struct ModelState {
  double mu = 0.0;
  Eigen::VectorXd beta;
  std::vector<Eigen::VectorXd> eta;
  std::vector<double> tau;
  double sigma2 = 1.0;
};

namespace density {

inline double normal(double x, double sd) {
  return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(sd) - 0.5 * (x / sd) * (x / sd);
}

// Half-t (equivalently folded-t about zero) with df and scale.
inline double half_t(double x, double df, double scale) {
  if (!(x >= 0.0)) return kNegInf;
  const double z = x / scale;
  return std::log(2.0) + std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
         0.5 * std::log(df * std::numbers::pi) - std::log(scale) -
         0.5 * (df + 1.0) * std::log1p(z * z / df);
}

inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace density

// Numerically stable softmax: shifts by the maximum before exponentiating.
inline Eigen::VectorXd softmax(const Eigen::VectorXd& u) {
  Eigen::VectorXd w = (u.array() - u.maxCoeff()).exp();
  return w / w.sum();
}

inline Eigen::VectorXd compute_weights(const Eigen::VectorXd& eta, const SplineDesign& design) {
  return softmax(design.basis * eta);
}

inline Eigen::VectorXd filter_covariate(const Eigen::MatrixXd& lagged, const Eigen::VectorXd& weights) {
  return lagged * weights;
}

// Columns of the term matrix: one per formula term, interactions as elementwise products.
inline Eigen::MatrixXd term_matrix(const std::vector<Term>& terms,
                                   const std::map<std::string, Eigen::VectorXd>& columns, Eigen::Index rows) {
  Eigen::MatrixXd Z(rows, static_cast<Eigen::Index>(terms.size()));
  for (std::size_t m = 0; m < terms.size(); ++m) {
    const auto& t = terms[m];
    auto col = [&](const std::string& n) -> const Eigen::VectorXd& {
      auto it = columns.find(n);
      if (it == columns.end()) throw Error(ErrorCode::MissingColumn, "no column for '" + n + "'");
      return it->second;
    };
    if (t.is_interaction()) Z.col(m) = col(t.factors[0]).cwiseProduct(col(t.factors[1]));
    else Z.col(m) = col(t.factors[0]);
  }
  return Z;
}

struct MemoryBlock {
  std::string name;
  SplineDesign design;
  Eigen::MatrixXd precision;      // S + ridge * I (scaled by 1 / tau^2 in the prior)
  double log_det_precision = 0.0;
  Eigen::RowVectorXd centering;   // column means of H; centering * eta = mean(H eta)
  Eigen::RowVectorXd ones_precision;  // 1' (S + ridge I)
};

class Model {
 public:
  Model(LagPanel panel, ModelConfig config) : panel_(std::move(panel)), config_(std::move(config)) {
    const auto& f = config_.formula;
    if (f.terms.empty()) throw Error(ErrorCode::InvalidSpec, "formula has no terms");
    for (const auto& name : f.covariates())
      if (!panel_.current.count(name))
        throw Error(ErrorCode::MissingColumn, "formula covariate '" + name + "' is not in the panel");
    for (const auto& v : config_.memory.vars) {
      bool used = false;
      for (const auto& t : f.terms) used = used || t.involves(v.name);
      if (!used) throw Error(ErrorCode::InvalidSpec, "memory covariate '" + v.name + "' is not in the formula");
      if (!v.has_spline()) continue;
      MemoryBlock b;
      b.name = v.name;
      b.design = build_design(v.max_lag, v.basis_dim, v.order);
      const auto k = b.design.dim();
      b.precision = b.design.penalty + config_.prior.ridge * Eigen::MatrixXd::Identity(k, k);
      b.log_det_precision = generalized_inverse_logdet(b.precision).log_det;
      b.centering = b.design.basis.colwise().mean();
      b.ones_precision = Eigen::RowVectorXd::Ones(k) * b.precision;
      block_index_[v.name] = static_cast<int>(blocks_.size());
      blocks_.push_back(std::move(b));
    }
    const auto& y = panel_.response;
    if (config_.family == Family::Poisson) {
      for (Eigen::Index i = 0; i < y.size(); ++i)
        if (y(i) < 0 || y(i) != std::floor(y(i)))
          throw Error(ErrorCode::InvalidValue, "poisson response must be a nonnegative integer");
    }
    if (config_.family == Family::Binomial && panel_.trials.size() != y.size())
      throw Error(ErrorCode::InvalidSpec, "binomial family requires a trials column");
    if (config_.prior.sigma_scale <= 0.0) {
      double sd = y.size() > 1 ? std::sqrt((y.array() - y.mean()).square().sum() / (y.size() - 1.0)) : 0.0;
      config_.prior.sigma_scale = sd > 0.0 ? 5.0 * sd : 1.0;
    }
    if (config_.family == Family::Binomial) {
      log_choose_.resize(y.size());
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        double n = panel_.trials(i);
        log_choose_(i) = std::lgamma(n + 1) - std::lgamma(y(i) + 1) - std::lgamma(n - y(i) + 1);
      }
    } else if (config_.family == Family::Poisson) {
      log_choose_.resize(y.size());
      for (Eigen::Index i = 0; i < y.size(); ++i) log_choose_(i) = std::lgamma(y(i) + 1.0);
    }
  }

  const LagPanel& panel() const { return panel_; }
  const ModelConfig& config() const { return config_; }
  Family family() const { return config_.family; }
  const std::vector<MemoryBlock>& blocks() const { return blocks_; }
  const std::vector<Term>& terms() const { return config_.formula.terms; }
  Eigen::Index rows() const { return panel_.rows(); }
  Eigen::Index n_terms() const { return static_cast<Eigen::Index>(terms().size()); }
  bool has_sigma() const { return config_.family == Family::Gaussian; }

  // -1 when the covariate has no spline block.
  int block_index(const std::string& name) const {
    auto it = block_index_.find(name);
    return it == block_index_.end() ? -1 : it->second;
  }

  std::vector<Eigen::VectorXd> weights(const ModelState& s) const {
    std::vector<Eigen::VectorXd> w;
    w.reserve(blocks_.size());
    for (std::size_t j = 0; j < blocks_.size(); ++j) w.push_back(compute_weights(s.eta[j], blocks_[j].design));
    return w;
  }

  // Filtered memory covariates plus raw lag-0 columns for everything else.
  std::map<std::string, Eigen::VectorXd> factor_columns(const std::vector<Eigen::VectorXd>& w) const {
    std::map<std::string, Eigen::VectorXd> cols = panel_.current;
    for (std::size_t j = 0; j < blocks_.size(); ++j)
      cols[blocks_[j].name] = filter_covariate(panel_.lagged.at(blocks_[j].name), w[j]);
    return cols;
  }

  Eigen::MatrixXd design(const std::vector<Eigen::VectorXd>& w) const {
    return term_matrix(terms(), factor_columns(w), rows());
  }

  Eigen::MatrixXd design(const ModelState& s) const { return design(weights(s)); }

  Eigen::VectorXd linear_predictor(const ModelState& s) const {
    return (design(s) * s.beta).array() + s.mu;
  }

  double log_likelihood_at(const Eigen::VectorXd& pred, double sigma2) const {
    const auto& y = panel_.response;
    double ll = 0.0;
    switch (config_.family) {
      case Family::Gaussian: {
        if (!(sigma2 > 0.0)) return kNegInf;
        ll = -0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi * sigma2) -
             0.5 * (y - pred).squaredNorm() / sigma2;
        break;
      }
      case Family::Poisson:
        ll = (y.array() * pred.array() - pred.array().exp() - log_choose_.array()).sum();
        break;
      case Family::Binomial:
        for (Eigen::Index i = 0; i < y.size(); ++i)
          ll += log_choose_(i) + y(i) * pred(i) - panel_.trials(i) * density::softplus(pred(i));
        break;
    }
    return std::isfinite(ll) ? ll : kNegInf;
  }

  // Non-finite values (an overflowing predictor) come back as -inf.
  double log_likelihood(const ModelState& s) const { return log_likelihood_at(linear_predictor(s), s.sigma2); }

  double log_eta_prior(std::size_t j, const Eigen::VectorXd& eta, double tau) const {
    if (!(tau > 0.0) || !std::isfinite(tau)) return kNegInf;
    const auto& b = blocks_[j];
    const double k = static_cast<double>(eta.size());
    return -0.5 * k * std::log(2.0 * std::numbers::pi) + 0.5 * b.log_det_precision - k * std::log(tau) -
           0.5 * eta.dot(b.precision * eta) / (tau * tau);
  }

  double log_prior(const ModelState& s) const {
    const auto& p = config_.prior;
    double lp = density::normal(s.mu, p.coef_sd);
    for (Eigen::Index m = 0; m < s.beta.size(); ++m) lp += density::normal(s.beta(m), p.coef_sd);
    for (std::size_t j = 0; j < blocks_.size(); ++j) {
      double tau = s.tau[j];
      if (!(tau > 0.0) || !std::isfinite(tau)) return kNegInf;
      lp += log_eta_prior(j, s.eta[j], tau) + density::half_t(tau, p.tau_df, p.tau_scale);
    }
    if (has_sigma()) {
      if (!(s.sigma2 > 0.0) || !std::isfinite(s.sigma2)) return kNegInf;
      const double sigma = std::sqrt(s.sigma2);
      // half-t on sigma, expressed as a density on sigma^2
      lp += density::half_t(sigma, p.sigma_df, p.sigma_scale) - std::log(2.0 * sigma);
    }
    return std::isfinite(lp) ? lp : kNegInf;
  }

  double log_posterior(const ModelState& s) const {
    double lp = log_prior(s);
    if (lp == kNegInf) return kNegInf;
    double ll = log_likelihood(s);
    return ll == kNegInf ? kNegInf : lp + ll;
  }

  // Log-posterior over (mu, beta, eta, log tau, log sigma2): adds the log-Jacobian.
  double log_density(const ModelState& s) const {
    double lp = log_posterior(s);
    if (lp == kNegInf) return kNegInf;
    for (double t : s.tau) lp += std::log(t);
    if (has_sigma()) lp += std::log(s.sigma2);
    return lp;
  }

  // log of the eta prior integrated over eta + t * 1, minus the prior at eta.
  double log_constant_marginal(std::size_t j, const Eigen::VectorXd& eta, double tau) const {
    const auto& b = blocks_[j];
    const double a = b.ones_precision.sum();
    const double c = b.ones_precision.dot(eta);
    return 0.5 * c * c / (a * tau * tau) + 0.5 * std::log(2.0 * std::numbers::pi / a) + std::log(tau);
  }

  // Sampler target: eta lives on mean(H eta) = 0 with the constant direction integrated out.
  double log_target(const ModelState& s) const {
    double ld = log_density(s);
    if (ld == kNegInf) return kNegInf;
    for (std::size_t j = 0; j < blocks_.size(); ++j) ld += log_constant_marginal(j, s.eta[j], s.tau[j]);
    return ld;
  }

  Eigen::Index dim() const {
    Eigen::Index d = 1 + n_terms();
    for (const auto& b : blocks_) d += b.design.dim() + 1;
    return d + (has_sigma() ? 1 : 0);
  }

  // Packed layout: mu, beta, eta_1..eta_J, log tau_1..log tau_J, [log sigma2].
  Eigen::VectorXd pack(const ModelState& s) const {
    Eigen::VectorXd v(dim());
    Eigen::Index i = 0;
    v(i++) = s.mu;
    v.segment(i, n_terms()) = s.beta;
    i += n_terms();
    for (std::size_t j = 0; j < blocks_.size(); ++j) {
      v.segment(i, s.eta[j].size()) = s.eta[j];
      i += s.eta[j].size();
    }
    for (double t : s.tau) v(i++) = std::log(t);
    if (has_sigma()) v(i++) = std::log(s.sigma2);
    return v;
  }

  ModelState unpack(const Eigen::VectorXd& v) const {
    ModelState s;
    Eigen::Index i = 0;
    s.mu = v(i++);
    s.beta = v.segment(i, n_terms());
    i += n_terms();
    for (const auto& b : blocks_) {
      s.eta.push_back(v.segment(i, b.design.dim()));
      i += b.design.dim();
    }
    for (std::size_t j = 0; j < blocks_.size(); ++j) s.tau.push_back(std::exp(v(i++)));
    s.sigma2 = has_sigma() ? std::exp(v(i++)) : 1.0;
    return s;
  }

  std::vector<std::string> packed_names() const {
    std::vector<std::string> out{"mu"};
    for (const auto& t : terms()) out.push_back("beta." + t.label());
    for (const auto& b : blocks_)
      for (int i = 0; i < b.design.dim(); ++i) out.push_back("eta." + b.name + "." + std::to_string(i + 1));
    for (const auto& b : blocks_) out.push_back("log_tau." + b.name);
    if (has_sigma()) out.push_back("log_sigma2");
    return out;
  }

  // d log_density / d(packed coordinates).
  Eigen::VectorXd gradient(const ModelState& s) const {
    const auto& p = config_.prior;
    const auto& y = panel_.response;
    const auto w = weights(s);
    const auto cols = factor_columns(w);
    const Eigen::MatrixXd Z = term_matrix(terms(), cols, rows());
    const Eigen::VectorXd pred = (Z * s.beta).array() + s.mu;

    Eigen::VectorXd r(rows());
    switch (config_.family) {
      case Family::Gaussian: r = (y - pred) / s.sigma2; break;
      case Family::Poisson: r = y - pred.array().exp().matrix(); break;
      case Family::Binomial:
        for (Eigen::Index i = 0; i < rows(); ++i) r(i) = y(i) - panel_.trials(i) * density::logistic(pred(i));
        break;
    }

    Eigen::VectorXd g(dim());
    Eigen::Index i = 0;
    const double prior_prec = 1.0 / (p.coef_sd * p.coef_sd);
    g(i++) = r.sum() - s.mu * prior_prec;
    g.segment(i, n_terms()) = Z.transpose() * r - s.beta * prior_prec;
    i += n_terms();

    for (std::size_t j = 0; j < blocks_.size(); ++j) {
      const auto& b = blocks_[j];
      // d pred / d filtered_j, summed over every term that contains covariate j
      Eigen::VectorXd dx = Eigen::VectorXd::Zero(rows());
      for (Eigen::Index m = 0; m < n_terms(); ++m) {
        const auto& t = terms()[m];
        if (!t.involves(b.name)) continue;
        if (!t.is_interaction()) dx += Eigen::VectorXd::Constant(rows(), s.beta(m));
        else dx += s.beta(m) * cols.at(t.factors[0] == b.name ? t.factors[1] : t.factors[0]);
      }
      const Eigen::VectorXd gw = panel_.lagged.at(b.name).transpose() * dx.cwiseProduct(r);
      const Eigen::VectorXd gu = (w[j].array() * (gw.array() - w[j].dot(gw))).matrix();
      const double tau2 = s.tau[j] * s.tau[j];
      g.segment(i, b.design.dim()) = b.design.basis.transpose() * gu - b.precision * s.eta[j] / tau2;
      i += b.design.dim();
    }
    for (std::size_t j = 0; j < blocks_.size(); ++j) {
      const double tau = s.tau[j], tau2 = tau * tau;
      const double k = static_cast<double>(s.eta[j].size());
      const double quad = s.eta[j].dot(blocks_[j].precision * s.eta[j]);
      const double nu = p.tau_df, sc = p.tau_scale;
      g(i++) = -k + quad / tau2 - (nu + 1.0) * tau2 / (nu * sc * sc + tau2) + 1.0;
    }
    if (has_sigma()) {
      const double s2 = s.sigma2, nu = p.sigma_df, A = p.sigma_scale;
      const double n = static_cast<double>(rows());
      g(i++) = -0.5 * n + 0.5 * (y - pred).squaredNorm() / s2 - 0.5 * (nu + 1.0) * s2 / (nu * A * A + s2) + 0.5;
    }
    return g;
  }

  // Moves eta along the constant direction so that mean(H eta) = 0; weights are unchanged.
  void recenter(Eigen::VectorXd& eta, std::size_t j) const {
    eta.array() -= blocks_[j].centering.dot(eta);
  }

  ModelState initial_state() const {
    const auto& y = panel_.response;
    ModelState s;
    const double ybar = y.mean();
    switch (config_.family) {
      case Family::Gaussian: s.mu = ybar; break;
      case Family::Poisson: s.mu = std::log(std::max(ybar, 1e-3)); break;
      case Family::Binomial: {
        double prop = std::clamp(y.sum() / panel_.trials.sum(), 1e-3, 1.0 - 1e-3);
        s.mu = std::log(prop / (1.0 - prop));
        break;
      }
    }
    s.beta = Eigen::VectorXd::Zero(n_terms());
    for (const auto& b : blocks_) {
      s.eta.push_back(Eigen::VectorXd::Zero(b.design.dim()));
      s.tau.push_back(1.0);
    }
    if (has_sigma()) {
      double v = y.size() > 1 ? (y.array() - ybar).square().sum() / (y.size() - 1.0) : 0.0;
      s.sigma2 = v > 0.0 ? v : 1.0;
    }
    return s;
  }

 private:
  LagPanel panel_;
  ModelConfig config_;
  std::vector<MemoryBlock> blocks_;
  std::map<std::string, int> block_index_;
  Eigen::VectorXd log_choose_;  // binomial: log C(n, y); poisson: log y!
};

}  // namespace ecomem
