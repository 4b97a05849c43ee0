#pragma once

// Metropolis-within-Gibbs over the joint posterior.
//
// Per iteration: (mu, beta) from the exact normal full conditional (gaussian) or an
// adaptive random-walk block (poisson, binomial); one adaptive random-walk block per
// memory covariate for eta, re-centred so mean(H eta) = 0 after every proposal, with
// steps scaled by tau_j; scalar random walks on log tau_j, a joint rescaling move of
// (eta_j, tau_j), and log sigma2. The eta/tau updates repeat memory_sweeps times per
// iteration. Proposal scales and covariances adapt only during burn-in and are frozen
// afterwards. The target is Model::log_target.
//
// Chain c is seeded with base_seed + c; the 64-bit chain seed is split into two
// 32-bit words that feed std::seed_seq for a std::mt19937_64 engine.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ecomem/error.hpp"
#include "ecomem/model.hpp"

namespace ecomem {

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32)};
  return Rng(seq);
}

inline std::uint64_t chain_seed(std::uint64_t base_seed, int chain) {
  return base_seed + static_cast<std::uint64_t>(chain);
}

struct SamplerConfig {
  int chains = 3;
  int iterations = 10000;
  int burn_in = 5000;
  int thin = 5;
  std::uint64_t seed = 1;
  int adapt_window = 50;
  double target_accept = 0.3;
  bool parallel = true;
  int memory_sweeps = 3;  // eta / tau updates per iteration

  // Test hooks: hold blocks at their initial values, or propose zero-length eta steps.
  bool freeze_coefficients = false;
  bool freeze_eta = false;
  bool freeze_tau = false;
  bool freeze_sigma2 = false;
  bool zero_step_eta = false;
  std::optional<ModelState> initial;

  int retained() const { return (iterations - burn_in) / thin; }

  void validate() const {
    if (chains < 1) throw Error(ErrorCode::InvalidSpec, "need at least one chain");
    if (thin < 1) throw Error(ErrorCode::InvalidSpec, "thin must be >= 1");
    if (burn_in < 0 || burn_in >= iterations) throw Error(ErrorCode::InvalidSpec, "burn-in must lie in [0, iterations)");
    if (memory_sweeps < 1) throw Error(ErrorCode::InvalidSpec, "memory sweeps must be >= 1");
    if (adapt_window < 1) throw Error(ErrorCode::InvalidSpec, "adapt window must be >= 1");
    if (!(target_accept > 0.0 && target_accept < 1.0)) throw Error(ErrorCode::InvalidSpec, "target acceptance must lie in (0, 1)");
  }
};

inline bool metropolis_accept(double current, double proposed, Rng& rng) {
  if (proposed == kNegInf || std::isnan(proposed)) return false;
  if (proposed >= current) return true;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  return std::log(unif(rng)) < proposed - current;
}

inline Eigen::VectorXd standard_normal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = z(rng);
  return v;
}

// Gaussian random-walk proposal with Robbins-Monro scale and empirical covariance.
class AdaptiveProposal {
 public:
  AdaptiveProposal() = default;

  AdaptiveProposal(std::string name, const Eigen::MatrixXd& initial_cov)
      : name_(std::move(name)),
        base_(initial_cov),
        log_scale_(std::log(2.38 / std::sqrt(static_cast<double>(initial_cov.rows())))),
        mean_(Eigen::VectorXd::Zero(initial_cov.rows())),
        m2_(Eigen::MatrixXd::Zero(initial_cov.rows(), initial_cov.rows())) {
    refresh();
  }

  const std::string& name() const { return name_; }
  Eigen::Index dim() const { return base_.rows(); }
  const Eigen::MatrixXd& covariance() const { return cov_; }

  Eigen::VectorXd step(Rng& rng) const { return chol_ * standard_normal(dim(), rng); }

  void record(bool accepted, bool burn_in) {
    ++proposed_;
    accepted_ += accepted;
    if (burn_in) {
      ++window_proposed_;
      window_accepted_ += accepted;
    } else {
      ++proposed_after_;
      accepted_after_ += accepted;
    }
  }

  void observe(const Eigen::VectorXd& x) {
    ++seen_;
    Eigen::VectorXd d = x - mean_;
    mean_ += d / static_cast<double>(seen_);
    m2_ += d * (x - mean_).transpose();
  }

  void adapt(double target) {
    if (window_proposed_ == 0) return;
    const double rate = static_cast<double>(window_accepted_) / static_cast<double>(window_proposed_);
    ++adaptations_;
    log_scale_ += (rate - target) / std::sqrt(static_cast<double>(adaptations_));
    log_scale_ = std::clamp(log_scale_, -12.0, 6.0);
    if (seen_ >= std::max<long>(20, 2 * dim())) base_ = m2_ / static_cast<double>(seen_ - 1);
    window_proposed_ = window_accepted_ = 0;
    refresh();
  }

  long proposed() const { return proposed_; }
  long accepted() const { return accepted_; }
  long proposed_after_burn_in() const { return proposed_after_; }
  long accepted_after_burn_in() const { return accepted_after_; }

 private:
  void refresh() {
    const auto d = dim();
    cov_ = std::exp(2.0 * log_scale_) * (base_ + 1e-8 * Eigen::MatrixXd::Identity(d, d));
    Eigen::LLT<Eigen::MatrixXd> llt(cov_);
    if (llt.info() != Eigen::Success) {
      cov_ = std::exp(2.0 * log_scale_) * Eigen::MatrixXd(base_.diagonal().cwiseAbs().array() + 1e-8).asDiagonal();
      llt.compute(cov_);
    }
    chol_ = llt.matrixL();
  }

  std::string name_;
  Eigen::MatrixXd base_;
  double log_scale_ = 0.0;
  Eigen::MatrixXd cov_, chol_;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd m2_;
  long seen_ = 0;
  long adaptations_ = 0;
  long proposed_ = 0, accepted_ = 0, proposed_after_ = 0, accepted_after_ = 0;
  long window_proposed_ = 0, window_accepted_ = 0;
};

struct CoefficientConditional {
  Eigen::VectorXd mean;        // (mu, beta)
  Eigen::MatrixXd covariance;
};

// Exact normal full conditional of (mu, beta) for the gaussian family.
inline CoefficientConditional gaussian_coefficient_conditional(const Model& model, const ModelState& s) {
  const Eigen::Index n = model.rows(), p = model.n_terms();
  Eigen::MatrixXd X(n, p + 1);
  X.col(0).setOnes();
  X.rightCols(p) = model.design(s);
  const Eigen::MatrixXd gram = X.transpose() * X;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 1e-10 * std::max(1.0, es.eigenvalues().maxCoeff()))
    throw Error(ErrorCode::SingularGram, "filtered design matrix is rank deficient (collinear terms)");
  const double sd = model.config().prior.coef_sd;
  Eigen::MatrixXd prec = gram / s.sigma2;
  prec.diagonal().array() += 1.0 / (sd * sd);
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  CoefficientConditional c;
  c.mean = llt.solve(X.transpose() * model.panel().response / s.sigma2);
  c.covariance = llt.solve(Eigen::MatrixXd::Identity(p + 1, p + 1));
  return c;
}

inline void update_gaussian_conjugate(const Model& model, ModelState& s, Rng& rng) {
  if (model.family() != Family::Gaussian)
    throw Error(ErrorCode::InvalidSpec, "conjugate coefficient update requires the gaussian family");
  const auto c = gaussian_coefficient_conditional(model, s);
  Eigen::LLT<Eigen::MatrixXd> llt(c.covariance);
  Eigen::VectorXd draw = c.mean + llt.matrixL() * standard_normal(c.mean.size(), rng);
  s.mu = draw(0);
  s.beta = draw.tail(model.n_terms());
}

// Random-walk block on (mu, beta); returns whether the proposal was accepted.
inline bool update_glm_block(const Model& model, ModelState& s, double& log_density,
                             const AdaptiveProposal& proposal, Rng& rng) {
  Eigen::VectorXd step = proposal.step(rng);
  ModelState next = s;
  next.mu += step(0);
  next.beta += step.tail(model.n_terms());
  double ld = model.log_target(next);
  if (!metropolis_accept(log_density, ld, rng)) return false;
  s = std::move(next);
  log_density = ld;
  return true;
}

inline bool update_eta_block(const Model& model, ModelState& s, std::size_t j, double& log_density,
                             const AdaptiveProposal& proposal, Rng& rng, bool zero_step = false) {
  ModelState next = s;
  // steps live on eta / tau
  if (!zero_step) next.eta[j] += s.tau[j] * proposal.step(rng);
  model.recenter(next.eta[j], j);
  double ld = model.log_target(next);
  if (!metropolis_accept(log_density, ld, rng)) return false;
  s = std::move(next);
  log_density = ld;
  return true;
}

inline bool update_tau(const Model& model, ModelState& s, std::size_t j, double& log_density,
                       const AdaptiveProposal& proposal, Rng& rng) {
  ModelState next = s;
  next.tau[j] = std::exp(std::log(s.tau[j]) + proposal.step(rng)(0));
  double ld = model.log_target(next);
  if (!metropolis_accept(log_density, ld, rng)) return false;
  s = std::move(next);
  log_density = ld;
  return true;
}

// Joint move of (eta_j, tau_j) along eta -> eta * tau' / tau; the weights' shape moves with the scale.
inline bool update_tau_scale(const Model& model, ModelState& s, std::size_t j, double& log_density,
                             const AdaptiveProposal& proposal, Rng& rng) {
  const double step = proposal.step(rng)(0);
  ModelState next = s;
  next.tau[j] = s.tau[j] * std::exp(step);
  next.eta[j] = s.eta[j] * std::exp(step);
  double ld = model.log_target(next);
  const double jac = static_cast<double>(s.eta[j].size() - 1) * step;  // eta moves on a (k-1)-dim plane
  if (!metropolis_accept(log_density, ld + jac, rng)) return false;
  s = std::move(next);
  log_density = ld;
  return true;
}

inline bool update_sigma2(const Model& model, ModelState& s, double& log_density,
                          const AdaptiveProposal& proposal, Rng& rng) {
  ModelState next = s;
  next.sigma2 = std::exp(std::log(s.sigma2) + proposal.step(rng)(0));
  double ld = model.log_target(next);
  if (!metropolis_accept(log_density, ld, rng)) return false;
  s = std::move(next);
  log_density = ld;
  return true;
}

struct BlockAcceptance {
  std::string block;
  long proposed = 0;
  long accepted = 0;
  long proposed_after_burn_in = 0;
  long accepted_after_burn_in = 0;

  double rate() const {
    return proposed_after_burn_in ? static_cast<double>(accepted_after_burn_in) / proposed_after_burn_in : 0.0;
  }
  double overall_rate() const { return proposed ? static_cast<double>(accepted) / proposed : 0.0; }
};

struct ChainDraws {
  std::uint64_t seed = 0;
  Eigen::MatrixXd draws;  // retained draws x parameter manifest
  std::vector<BlockAcceptance> acceptance;
  std::vector<Eigen::MatrixXd> proposal_at_burn_in;  // per adaptive block
  std::vector<Eigen::MatrixXd> proposal_final;
};

struct ChainSet {
  std::vector<std::string> names;
  std::vector<ChainDraws> chains;
  SamplerConfig config;

  Eigen::Index index(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<Eigen::Index>(i);
    throw Error(ErrorCode::TermNotFound, "no parameter named '" + name + "'");
  }

  bool has(const std::string& name) const { return std::find(names.begin(), names.end(), name) != names.end(); }

  // Retained draws of one parameter, per chain.
  std::vector<std::vector<double>> parameter(const std::string& name) const {
    const auto col = index(name);
    std::vector<std::vector<double>> out;
    for (const auto& c : chains) {
      out.emplace_back(c.draws.rows());
      for (Eigen::Index r = 0; r < c.draws.rows(); ++r) out.back()[r] = c.draws(r, col);
    }
    return out;
  }
};

// mu, beta.<term>, eta.<var>.<i>, tau.<var>, [sigma2], w.<var>.<lag>
inline std::vector<std::string> draw_manifest(const Model& model) {
  std::vector<std::string> out{"mu"};
  for (const auto& t : model.terms()) out.push_back("beta." + t.label());
  for (const auto& b : model.blocks())
    for (int i = 0; i < b.design.dim(); ++i) out.push_back("eta." + b.name + "." + std::to_string(i + 1));
  for (const auto& b : model.blocks()) out.push_back("tau." + b.name);
  if (model.has_sigma()) out.push_back("sigma2");
  for (const auto& b : model.blocks())
    for (int l = 0; l <= b.design.max_lag(); ++l) out.push_back("w." + b.name + "." + std::to_string(l));
  return out;
}

inline Eigen::VectorXd draw_row(const Model& model, const ModelState& s) {
  std::vector<double> v{s.mu};
  for (Eigen::Index m = 0; m < s.beta.size(); ++m) v.push_back(s.beta(m));
  for (const auto& e : s.eta)
    for (Eigen::Index i = 0; i < e.size(); ++i) v.push_back(e(i));
  for (double t : s.tau) v.push_back(t);
  if (model.has_sigma()) v.push_back(s.sigma2);
  for (const auto& w : model.weights(s))
    for (Eigen::Index l = 0; l < w.size(); ++l) v.push_back(w(l));
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Inverse of draw_row for the sampled (non-derived) parameters.
inline ModelState state_from_row(const Model& model, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  ModelState s;
  Eigen::Index i = 0;
  s.mu = row(i++);
  s.beta = row.segment(i, model.n_terms()).transpose();
  i += model.n_terms();
  for (const auto& b : model.blocks()) {
    s.eta.push_back(row.segment(i, b.design.dim()).transpose());
    i += b.design.dim();
  }
  for (std::size_t j = 0; j < model.blocks().size(); ++j) s.tau.push_back(row(i++));
  s.sigma2 = model.has_sigma() ? row(i++) : 1.0;
  return s;
}

namespace detail {

inline Eigen::MatrixXd glm_initial_covariance(const Model& model, const ModelState& s) {
  const Eigen::Index n = model.rows(), p = model.n_terms();
  Eigen::MatrixXd X(n, p + 1);
  X.col(0).setOnes();
  X.rightCols(p) = model.design(s);
  const Eigen::VectorXd pred = model.linear_predictor(s);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (model.family() == Family::Poisson) {
      v(i) = std::exp(pred(i));
    } else {
      double pr = density::logistic(pred(i));
      v(i) = model.panel().trials(i) * pr * (1.0 - pr);
    }
  }
  Eigen::MatrixXd info = X.transpose() * v.asDiagonal() * X;
  const double sd = model.config().prior.coef_sd;
  info.diagonal().array() += 1.0 / (sd * sd) + 1e-6;
  return info.ldlt().solve(Eigen::MatrixXd::Identity(p + 1, p + 1));
}

inline ChainDraws run_chain(const Model& model, const SamplerConfig& cfg, const std::vector<std::string>& names,
                            std::uint64_t seed) {
  Rng rng = make_rng(seed);
  ModelState s = cfg.initial ? *cfg.initial : model.initial_state();
  for (std::size_t j = 0; j < model.blocks().size(); ++j) model.recenter(s.eta[j], j);
  double ld = model.log_target(s);
  if (ld == kNegInf || std::isnan(ld)) throw Error(ErrorCode::NonFiniteStart, "initial state has zero posterior density");

  const bool gaussian = model.family() == Family::Gaussian;
  const auto J = model.blocks().size();

  std::vector<AdaptiveProposal> props;  // [coef], eta..., tau..., [sigma2]
  std::vector<bool> active;
  const int coef_idx = gaussian ? -1 : 0;
  if (!gaussian) {
    props.emplace_back("coefficients", glm_initial_covariance(model, s));
    active.push_back(!cfg.freeze_coefficients);
  }
  const auto eta0 = props.size();
  for (const auto& b : model.blocks()) {
    const auto k = b.design.dim();
    props.emplace_back("eta." + b.name, 0.1 * Eigen::MatrixXd::Identity(k, k));
    active.push_back(!cfg.freeze_eta && !cfg.zero_step_eta);
  }
  const auto tau0 = props.size();
  for (const auto& b : model.blocks()) {
    props.emplace_back("tau." + b.name, Eigen::MatrixXd::Constant(1, 1, 0.25));
    active.push_back(!cfg.freeze_tau);
  }
  const auto scale0 = props.size();
  for (const auto& b : model.blocks()) {
    props.emplace_back("scale." + b.name, Eigen::MatrixXd::Constant(1, 1, 0.25));
    active.push_back(!cfg.freeze_tau && !cfg.freeze_eta && !cfg.zero_step_eta);
  }
  const auto sigma_idx = props.size();
  if (gaussian) {
    props.emplace_back("sigma2", Eigen::MatrixXd::Constant(1, 1, 2.0 / static_cast<double>(model.rows())));
    active.push_back(!cfg.freeze_sigma2);
  }
  BlockAcceptance conjugate{"coefficients"};

  ChainDraws out;
  out.seed = seed;
  out.draws.resize(cfg.retained(), static_cast<Eigen::Index>(names.size()));
  Eigen::Index kept = 0;

  for (int it = 0; it < cfg.iterations; ++it) {
    const bool burn = it < cfg.burn_in;

    if (gaussian) {
      if (!cfg.freeze_coefficients) {
        update_gaussian_conjugate(model, s, rng);
        ld = model.log_target(s);
        ++conjugate.proposed;
        ++conjugate.accepted;
        if (!burn) {
          ++conjugate.proposed_after_burn_in;
          ++conjugate.accepted_after_burn_in;
        }
      }
    } else if (active[coef_idx]) {
      props[coef_idx].record(update_glm_block(model, s, ld, props[coef_idx], rng), burn);
    }
    for (int sweep = 0; sweep < cfg.memory_sweeps; ++sweep) {
      for (std::size_t j = 0; j < J; ++j) {
        if (cfg.freeze_eta) break;
        props[eta0 + j].record(update_eta_block(model, s, j, ld, props[eta0 + j], rng, cfg.zero_step_eta), burn);
      }
      for (std::size_t j = 0; j < J; ++j)
        if (active[tau0 + j]) props[tau0 + j].record(update_tau(model, s, j, ld, props[tau0 + j], rng), burn);
      for (std::size_t j = 0; j < J; ++j)
        if (active[scale0 + j])
          props[scale0 + j].record(update_tau_scale(model, s, j, ld, props[scale0 + j], rng), burn);
    }
    if (gaussian && active[sigma_idx])
      props[sigma_idx].record(update_sigma2(model, s, ld, props[sigma_idx], rng), burn);

    if (burn) {
      if (!gaussian) {
        Eigen::VectorXd c(model.n_terms() + 1);
        c << s.mu, s.beta;
        props[coef_idx].observe(c);
      }
      for (std::size_t j = 0; j < J; ++j) {
        props[eta0 + j].observe(s.eta[j] / s.tau[j]);
        props[tau0 + j].observe(Eigen::VectorXd::Constant(1, std::log(s.tau[j])));
        props[scale0 + j].observe(Eigen::VectorXd::Constant(1, std::log(s.tau[j])));
      }
      if (gaussian) props[sigma_idx].observe(Eigen::VectorXd::Constant(1, std::log(s.sigma2)));
      if ((it + 1) % cfg.adapt_window == 0)
        for (std::size_t b = 0; b < props.size(); ++b)
          if (active[b]) props[b].adapt(cfg.target_accept);
      if (it + 1 == cfg.burn_in)
        for (const auto& p : props) out.proposal_at_burn_in.push_back(p.covariance());
    } else if ((it - cfg.burn_in + 1) % cfg.thin == 0 && kept < out.draws.rows()) {
      out.draws.row(kept++) = draw_row(model, s).transpose();
    }
  }
  if (cfg.burn_in == 0)
    for (const auto& p : props) out.proposal_at_burn_in.push_back(p.covariance());
  for (const auto& p : props) out.proposal_final.push_back(p.covariance());

  if (gaussian && !cfg.freeze_coefficients) out.acceptance.push_back(conjugate);
  for (std::size_t b = 0; b < props.size(); ++b) {
    const auto& p = props[b];
    if (!active[b] && !(cfg.zero_step_eta && b >= eta0 && b < tau0)) continue;
    out.acceptance.push_back({p.name(), p.proposed(), p.accepted(), p.proposed_after_burn_in(), p.accepted_after_burn_in()});
    if (active[b] && p.proposed() > 0 && p.accepted() == 0)
      throw Error(ErrorCode::AllProposalsRejected, "block '" + p.name() + "' rejected every proposal");
  }
  return out;
}

}  // namespace detail

inline ChainSet run_chains(const Model& model, const SamplerConfig& cfg) {
  cfg.validate();
  if (model.rows() == 0) throw Error(ErrorCode::SeriesTooShort, "empty lag panel");
  ChainSet set;
  set.names = draw_manifest(model);
  set.config = cfg;
  std::vector<std::future<ChainDraws>> jobs;
  for (int c = 0; c < cfg.chains; ++c) {
    auto launch = cfg.parallel ? std::launch::async : std::launch::deferred;
    jobs.push_back(std::async(launch, [&model, &cfg, &set, c] {
      return detail::run_chain(model, cfg, set.names, chain_seed(cfg.seed, c));
    }));
  }
  for (auto& j : jobs) set.chains.push_back(j.get());
  return set;
}

}  // namespace ecomem
