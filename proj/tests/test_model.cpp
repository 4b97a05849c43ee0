#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support.hpp"

using namespace ecomem;
using testing_support::config_for;
using testing_support::random_panel;
using testing_support::random_state;

namespace {

constexpr double kPi = std::numbers::pi;

LagPanel tiny_panel(const std::vector<double>& y, const Eigen::MatrixXd& X, const std::vector<double>& trials = {}) {
  LagPanel p;
  p.lagged["x"] = X;
  p.current["x"] = X.col(0);
  p.response = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  if (!trials.empty()) p.trials = Eigen::Map<const Eigen::VectorXd>(trials.data(), static_cast<Eigen::Index>(trials.size()));
  for (std::size_t i = 0; i < y.size(); ++i) {
    p.row_group.push_back("");
    p.row_time.push_back(static_cast<long long>(i));
  }
  return p;
}

// Independent log-density pieces.
double oracle_normal(double x, double m, double sd) {
  return std::log(1.0 / (sd * std::sqrt(2.0 * kPi))) - (x - m) * (x - m) / (2.0 * sd * sd);
}

double oracle_folded_t(double x, double nu, double s) {
  return std::log(2.0 * std::tgamma((nu + 1) / 2) / (std::tgamma(nu / 2) * std::sqrt(nu * kPi) * s) *
                  std::pow(1.0 + (x / s) * (x / s) / nu, -(nu + 1) / 2));
}

double oracle_mvn_prec(const Eigen::VectorXd& x, const Eigen::MatrixXd& P) {
  const double k = static_cast<double>(x.size());
  return -0.5 * k * std::log(2.0 * kPi) + 0.5 * std::log(P.determinant()) - 0.5 * x.dot(P * x);
}

// Log posterior of a one-memory-covariate model written without the library.
double oracle_log_posterior(const Model& m, const ModelState& s) {
  const auto& p = m.panel();
  const auto& prior = m.config().prior;
  const auto& blk = m.blocks()[0];
  Eigen::VectorXd u = blk.design.basis * s.eta[0];
  Eigen::VectorXd w(u.size());
  double tot = 0.0;
  for (Eigen::Index l = 0; l < u.size(); ++l) tot += std::exp(u(l));
  for (Eigen::Index l = 0; l < u.size(); ++l) w(l) = std::exp(u(l)) / tot;

  double lp = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    double xf = 0.0;
    for (Eigen::Index l = 0; l < w.size(); ++l) xf += w(l) * p.lagged.at("x")(i, l);
    double eta = s.mu;
    for (Eigen::Index t = 0; t < m.n_terms(); ++t) {
      const auto& term = m.terms()[t];
      double v = 1.0;
      for (const auto& f : term.factors) v *= f == "x" ? xf : p.current.at(f)(i);
      eta += s.beta(t) * v;
    }
    const double y = p.response(i);
    switch (m.family()) {
      case Family::Gaussian: lp += oracle_normal(y, eta, std::sqrt(s.sigma2)); break;
      case Family::Poisson: lp += y * eta - std::exp(eta) - std::lgamma(y + 1); break;
      case Family::Binomial: {
        const double n = p.trials(i), pr = 1.0 / (1.0 + std::exp(-eta));
        lp += std::lgamma(n + 1) - std::lgamma(y + 1) - std::lgamma(n - y + 1) + y * std::log(pr) +
              (n - y) * std::log(1 - pr);
        break;
      }
    }
  }
  lp += oracle_normal(s.mu, 0, prior.coef_sd);
  for (Eigen::Index t = 0; t < s.beta.size(); ++t) lp += oracle_normal(s.beta(t), 0, prior.coef_sd);
  const auto k = blk.design.dim();
  Eigen::MatrixXd P = (blk.design.penalty + prior.ridge * Eigen::MatrixXd::Identity(k, k)) / (s.tau[0] * s.tau[0]);
  lp += oracle_mvn_prec(s.eta[0], P);
  lp += oracle_folded_t(s.tau[0], prior.tau_df, prior.tau_scale);
  if (m.family() == Family::Gaussian) {
    // sigma ~ half-t; change of variables to sigma^2
    const double sigma = std::sqrt(s.sigma2);
    lp += oracle_folded_t(sigma, prior.sigma_df, prior.sigma_scale) + std::log(0.5 / sigma);
  }
  return lp;
}

Model model_for(Family fam, std::uint64_t seed, int n = 7, int L = 5, int k = 4,
                const std::string& formula = "y ~ x*z") {
  std::mt19937_64 rng(seed);
  return Model(random_panel(fam, n, L, rng), config_for(fam, formula, L, k));
}

}  // namespace

TEST(Family, LinkPairing) {
  EXPECT_EQ(link_of(Family::Gaussian), Link::Identity);
  EXPECT_EQ(link_of(Family::Poisson), Link::Log);
  EXPECT_EQ(link_of(Family::Binomial), Link::Logit);
  EXPECT_EQ(parse_family("poisson"), Family::Poisson);
  EXPECT_THROW(parse_family("gamma"), Error);
}

TEST(Weights, ZeroEtaIsUniform) {
  for (int L : {3, 6, 10, 12}) {
    auto d = build_design(L, std::min(10, L + 1));
    auto w = compute_weights(Eigen::VectorXd::Zero(d.dim()), d);
    for (Eigen::Index l = 0; l <= L; ++l) EXPECT_NEAR(w(l), 1.0 / (L + 1), 1e-15);
  }
}

TEST(Weights, HalfQuarterQuarter) {
  SplineDesign d;
  d.basis = Eigen::MatrixXd::Identity(3, 3);
  Eigen::VectorXd eta(3);
  eta << std::log(2.0), 0, 0;
  auto w = compute_weights(eta, d);
  EXPECT_NEAR(w(0), 0.5, 1e-15);
  EXPECT_NEAR(w(1), 0.25, 1e-15);
  EXPECT_NEAR(w(2), 0.25, 1e-15);
}

TEST(Weights, ShiftInvarianceAndSimplex) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z(0.0, 3.0);
  auto d = build_design(12, 8);
  for (int rep = 0; rep < 200; ++rep) {
    Eigen::VectorXd eta(8);
    for (int i = 0; i < 8; ++i) eta(i) = z(rng);
    auto w = compute_weights(eta, d);
    EXPECT_LT(std::abs(w.sum() - 1.0), 1e-12);
    EXPECT_GT(w.minCoeff(), 0.0);
    const double c = z(rng) * 10;
    // partition of unity: H (eta + c 1) = H eta + c
    auto shifted = compute_weights((eta.array() + c).matrix(), d);
    EXPECT_LT((shifted - w).cwiseAbs().maxCoeff(), 1e-13);
    auto direct = softmax((d.basis * eta).array() + c);
    EXPECT_LT((direct - w).cwiseAbs().maxCoeff(), 1e-13);
  }
  Eigen::VectorXd big(3);
  big << 800, -800, 0;
  auto w = softmax(big);
  EXPECT_TRUE(w.allFinite());
  EXPECT_NEAR(w.sum(), 1.0, 1e-15);
}

TEST(Filter, WorkedExamples) {
  Eigen::MatrixXd X(1, 3);
  X << 2, 4, 6;
  EXPECT_NEAR(filter_covariate(X, Eigen::Vector3d(0.5, 0.3, 0.2))(0), 3.4, 1e-14);

  std::mt19937_64 rng(2);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd M(20, 5);
  for (int r = 0; r < 20; ++r)
    for (int c = 0; c < 5; ++c) M(r, c) = z(rng);
  Eigen::VectorXd one_hot = Eigen::VectorXd::Zero(5);
  one_hot(0) = 1.0;
  EXPECT_EQ(filter_covariate(M, one_hot), M.col(0));
  auto avg = filter_covariate(M, Eigen::VectorXd::Constant(5, 0.2));
  for (int r = 0; r < 20; ++r) EXPECT_NEAR(avg(r), M.row(r).mean(), 1e-14);
}

TEST(LinearPredictor, ZeroBetaGivesIntercept) {
  auto m = model_for(Family::Poisson, 3);
  std::mt19937_64 rng(1);
  auto s = random_state(m, rng);
  s.beta.setZero();
  auto pred = m.linear_predictor(s);
  for (Eigen::Index i = 0; i < pred.size(); ++i) EXPECT_EQ(pred(i), s.mu);
}

TEST(LinearPredictor, InteractionsUseFilteredColumns) {
  auto m = model_for(Family::Gaussian, 5);
  std::mt19937_64 rng(6);
  auto s = random_state(m, rng);
  auto w = m.weights(s)[0];
  Eigen::VectorXd xf = m.panel().lagged.at("x") * w, z = m.panel().current.at("z");
  Eigen::VectorXd expect = (s.mu + s.beta(0) * xf.array() + s.beta(1) * z.array() + s.beta(2) * xf.array() * z.array()).matrix();
  EXPECT_LT((m.linear_predictor(s) - expect).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(LinearPredictor, DistributedLagEquivalence) {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int rep = 0; rep < 25; ++rep) {
    const int L = 2 + rep % 9;
    auto m = Model(random_panel(Family::Gaussian, 15, L, rng), config_for(Family::Gaussian, "y ~ x", L, std::min(10, L + 1)));
    auto s = random_state(m, rng, 2.0);
    const Eigen::VectorXd alpha = s.beta(0) * m.weights(s)[0];
    const auto& X = m.panel().lagged.at("x");
    Eigen::VectorXd dl(X.rows());
    for (Eigen::Index t = 0; t < X.rows(); ++t) {
      dl(t) = s.mu;
      for (int l = 0; l <= L; ++l) dl(t) += alpha(l) * X(t, l);
    }
    EXPECT_LT((m.linear_predictor(s) - dl).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(LinearPredictor, PoissonMeanPositive) {
  std::mt19937_64 rng(12);
  auto m = model_for(Family::Poisson, 9);
  for (int rep = 0; rep < 50; ++rep) {
    auto s = random_state(m, rng, 4.0);
    EXPECT_GT(m.linear_predictor(s).array().exp().minCoeff(), 0.0);
  }
}

TEST(LogLikelihood, WorkedExamples) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(1, 1);
  {
    Model m(tiny_panel({0.0}, X), config_for(Family::Gaussian, "y ~ x", 0, 0));
    EXPECT_NEAR(m.log_likelihood_at(Eigen::VectorXd::Zero(1), 1.0), -0.5 * std::log(2 * kPi), 1e-15);
  }
  {
    Model m(tiny_panel({1.0}, X), config_for(Family::Poisson, "y ~ x", 0, 0));
    EXPECT_NEAR(m.log_likelihood_at(Eigen::VectorXd::Zero(1), 1.0), -1.0, 1e-15);
  }
  {
    Model m(tiny_panel({1.0}, X, {2.0}), config_for(Family::Binomial, "y ~ x", 0, 0));
    EXPECT_NEAR(m.log_likelihood_at(Eigen::VectorXd::Zero(1), 1.0), std::log(0.5), 1e-15);
  }
}

TEST(LogLikelihood, OverflowIsNegativeInfinity) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(1, 1);
  Model m(tiny_panel({1.0}, X), config_for(Family::Poisson, "y ~ x", 0, 0));
  EXPECT_EQ(m.log_likelihood_at(Eigen::VectorXd::Constant(1, 1e6), 1.0), kNegInf);
  Model g(tiny_panel({1.0}, X), config_for(Family::Gaussian, "y ~ x", 0, 0));
  EXPECT_EQ(g.log_likelihood_at(Eigen::VectorXd::Zero(1), -1.0), kNegInf);
}

TEST(LogPrior, DoublingTauWithZeroEta) {
  for (int k : {4, 7, 10}) {
    auto m = model_for(Family::Gaussian, 4, 7, 11, k);
    auto s = m.initial_state();
    const double a = m.log_eta_prior(0, s.eta[0], 0.8), b = m.log_eta_prior(0, s.eta[0], 1.6);
    EXPECT_NEAR(b - a, -k * std::log(2.0), 1e-12);
  }
}

TEST(LogPrior, ZeroStateEqualsSumOfComponents) {
  for (Family fam : {Family::Gaussian, Family::Poisson, Family::Binomial}) {
    auto m = model_for(fam, 10);
    ModelState s = m.initial_state();
    s.mu = 0.0;
    s.beta.setZero();
    s.eta[0].setZero();
    s.tau[0] = 1.0;
    s.sigma2 = 1.0;
    const auto& pr = m.config().prior;
    const int k = m.blocks()[0].design.dim();
    Eigen::MatrixXd P = m.blocks()[0].design.penalty + pr.ridge * Eigen::MatrixXd::Identity(k, k);
    double expect = (1 + m.n_terms()) * oracle_normal(0, 0, 100) + oracle_mvn_prec(Eigen::VectorXd::Zero(k), P) +
                    oracle_folded_t(1.0, 3, 1);
    if (fam == Family::Gaussian) expect += oracle_folded_t(1.0, 3, pr.sigma_scale) + std::log(0.5);
    EXPECT_TRUE(std::isfinite(m.log_prior(s)));
    EXPECT_NEAR(m.log_prior(s), expect, 1e-10);
  }
}

TEST(LogPrior, SupportViolations) {
  auto m = model_for(Family::Gaussian, 2);
  auto s = m.initial_state();
  s.tau[0] = 0.0;
  EXPECT_EQ(m.log_prior(s), kNegInf);
  s.tau[0] = -1.0;
  EXPECT_EQ(m.log_posterior(s), kNegInf);
  s.tau[0] = 1.0;
  s.sigma2 = 0.0;
  EXPECT_EQ(m.log_prior(s), kNegInf);
}

TEST(LogPosterior, MatchesFromScratchOracle) {
  std::mt19937_64 rng(31);
  for (Family fam : {Family::Gaussian, Family::Poisson, Family::Binomial})
    for (int rep = 0; rep < 20; ++rep) {
      auto m = Model(random_panel(fam, 3, 4, rng), config_for(fam, "y ~ x*z", 4, 4));
      auto s = random_state(m, rng);
      const double got = m.log_posterior(s);
      EXPECT_NEAR(got, oracle_log_posterior(m, s), 1e-10);
      EXPECT_NEAR(got, m.log_prior(s) + m.log_likelihood(s), 1e-12);
    }
}

TEST(LogPosterior, BetterFitScoresHigher) {
  auto m = model_for(Family::Gaussian, 14, 30, 4, 4, "y ~ x");
  auto s = m.initial_state();
  auto X = m.design(s);
  Eigen::MatrixXd A(X.rows(), 2);
  A << Eigen::VectorXd::Ones(X.rows()), X;
  Eigen::VectorXd ols = A.colPivHouseholderQr().solve(m.panel().response);
  double prev = kNegInf;
  for (double f : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    s.mu = f * ols(0);
    s.beta(0) = f * ols(1);
    const double lp = m.log_posterior(s);
    EXPECT_GT(lp, prev);
    prev = lp;
  }
}

TEST(Gradient, CentralDifferences) {
  std::mt19937_64 rng(5);
  for (Family fam : {Family::Gaussian, Family::Poisson, Family::Binomial})
    for (int rep = 0; rep < 15; ++rep) {
      auto m = Model(random_panel(fam, 12, 6, rng), config_for(fam, "y ~ x*z", 6, 5));
      auto s = random_state(m, rng);
      const auto v = m.pack(s);
      const auto g = m.gradient(s);
      ASSERT_EQ(g.size(), m.dim());
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        auto up = v, dn = v;
        up(i) += 1e-5;
        dn(i) -= 1e-5;
        const double fd = (m.log_density(m.unpack(up)) - m.log_density(m.unpack(dn))) / 2e-5;
        EXPECT_LT(std::abs(g(i) - fd) / std::max(1.0, std::abs(fd)), 1e-5) << m.packed_names()[i];
      }
    }
}

TEST(Gradient, EtaFlatWhenBetaZero) {
  std::mt19937_64 rng(15);
  auto m = Model(random_panel(Family::Poisson, 20, 6, rng), config_for(Family::Poisson, "y ~ x + z", 6, 5));
  auto s = random_state(m, rng);
  s.beta(0) = 0.0;
  const auto g = m.gradient(s);
  const auto& b = m.blocks()[0];
  Eigen::VectorXd prior_part = -b.precision * s.eta[0] / (s.tau[0] * s.tau[0]);
  Eigen::VectorXd lik_part = g.segment(1 + m.n_terms(), b.design.dim()) - prior_part;
  EXPECT_LT(lik_part.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Gradient, VanishesAtAMode) {
  std::mt19937_64 rng(23);
  auto m = Model(random_panel(Family::Gaussian, 25, 4, rng), config_for(Family::Gaussian, "y ~ x + z", 4, 4));
  // tau held at 1 (the density is unbounded as tau -> 0), every other coordinate free
  Eigen::VectorXd v = m.pack(m.initial_state());
  std::vector<Eigen::Index> free;
  const auto names = m.packed_names();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (names[i].rfind("log_tau", 0) != 0) free.push_back(i);
  const auto d = static_cast<Eigen::Index>(free.size());
  auto f = [&](const Eigen::VectorXd& x) { return m.log_density(m.unpack(x)); };
  auto grad = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd g = m.gradient(m.unpack(x)), out(d);
    for (Eigen::Index i = 0; i < d; ++i) out(i) = g(free[i]);
    return out;
  };
  // damped Newton with a finite-difference Hessian of the analytic gradient
  for (int it = 0; it < 200; ++it) {
    Eigen::VectorXd g = grad(v);
    if (g.cwiseAbs().maxCoeff() < 1e-9) break;
    Eigen::MatrixXd H(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      auto up = v, dn = v;
      up(free[i]) += 1e-6;
      dn(free[i]) -= 1e-6;
      H.col(i) = (grad(up) - grad(dn)) / 2e-6;
    }
    H = 0.5 * (H + H.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMin(-1e-3);
    Eigen::VectorXd step = -es.eigenvectors() * (es.eigenvectors().transpose() * g).cwiseQuotient(ev);
    double t = 1.0;
    const double f0 = f(v);
    auto moved = [&](double a) {
      Eigen::VectorXd x = v;
      for (Eigen::Index i = 0; i < d; ++i) x(free[i]) += a * step(i);
      return x;
    };
    while (!(f(moved(t)) >= f0) && t > 1e-10) t *= 0.5;
    v = moved(t);
  }
  EXPECT_LT(grad(v).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(LogTarget, ConstantDirectionIntegratedNumerically) {
  std::mt19937_64 rng(41);
  auto m = Model(random_panel(Family::Gaussian, 10, 6, rng), config_for(Family::Gaussian, "y ~ x", 6, 5));
  for (int rep = 0; rep < 5; ++rep) {
    auto s = random_state(m, rng);
    m.recenter(s.eta[0], 0);
    const double tau = s.tau[0];
    // trapezoid over t of exp(log prior(eta + t 1)), relative to the prior at eta
    const double base = m.log_eta_prior(0, s.eta[0], tau);
    const double sd = tau / std::sqrt(m.config().prior.ridge * s.eta[0].size());
    const int N = 200001;
    const double lo = -12 * sd, hi = 12 * sd, h = (hi - lo) / (N - 1);
    double acc = 0.0;
    for (int i = 0; i < N; ++i) {
      double t = lo + h * i;
      double v = std::exp(m.log_eta_prior(0, (s.eta[0].array() + t).matrix(), tau) - base);
      acc += (i == 0 || i == N - 1 ? 0.5 : 1.0) * v;
    }
    acc *= h;
    const double correction = m.log_target(s) - m.log_density(s);
    EXPECT_NEAR(correction, std::log(acc), 1e-8);
  }
}
