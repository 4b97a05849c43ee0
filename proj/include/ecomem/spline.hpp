#pragma once

// Clamped B-spline bases over integer lags with a second-order difference penalty.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ecomem/error.hpp"

namespace ecomem {

struct SplineDesign {
  Eigen::MatrixXd basis;    // (L+1) x k, row l = basis functions at lag l
  Eigen::MatrixXd penalty;  // k x k
  Eigen::VectorXd knots;    // k + order entries, boundary knots repeated
  int order = 4;

  int max_lag() const { return static_cast<int>(basis.rows()) - 1; }
  int dim() const { return static_cast<int>(basis.cols()); }
};

// (k - d) x k matrix of d-th order differences.
inline Eigen::MatrixXd difference_matrix(int k, int d = 2) {
  Eigen::MatrixXd D = Eigen::MatrixXd::Identity(k, k);
  for (int i = 0; i < d && D.rows() > 0; ++i) {
    Eigen::MatrixXd next(D.rows() - 1, k);
    for (Eigen::Index r = 0; r + 1 < D.rows(); ++r) next.row(r) = D.row(r + 1) - D.row(r);
    D = std::move(next);
  }
  return D;
}

namespace detail {

inline int find_span(const Eigen::VectorXd& t, int n_basis, int degree, double x) {
  if (x >= t(n_basis)) return n_basis - 1;
  int lo = degree, hi = n_basis;
  while (hi - lo > 1) {
    int mid = (lo + hi) / 2;
    if (x < t(mid)) hi = mid;
    else lo = mid;
  }
  return lo;
}

// Nonzero basis functions at x on span i (Cox-de Boor triangle).
inline std::vector<double> basis_funs(const Eigen::VectorXd& t, int i, int degree, double x) {
  std::vector<double> N(degree + 1, 0.0), left(degree + 1), right(degree + 1);
  N[0] = 1.0;
  for (int j = 1; j <= degree; ++j) {
    left[j] = x - t(i + 1 - j);
    right[j] = t(i + j) - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      double tmp = N[r] / (right[r + 1] + left[j - r]);
      N[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    N[j] = saved;
  }
  return N;
}

}  // namespace detail

// k basis functions of the given order on [0, L]: k - order interior knots equally
// spaced in (0, L). Penalty S = D2'D2.
inline SplineDesign build_design(int max_lag, int basis_dim, int order = 4) {
  if (order < 2 || basis_dim < order || basis_dim > max_lag + 1)
    throw Error(ErrorCode::InvalidDimension,
                "basis dimension " + std::to_string(basis_dim) + " with order " + std::to_string(order) +
                    " requires order <= k <= L+1 (L = " + std::to_string(max_lag) + ")");
  const int k = basis_dim, degree = order - 1, interior = k - order;
  const double L = static_cast<double>(max_lag);

  SplineDesign d;
  d.order = order;
  d.knots.resize(k + order);
  for (int i = 0; i < order; ++i) {
    d.knots(i) = 0.0;
    d.knots(k + i) = L;
  }
  for (int i = 1; i <= interior; ++i) d.knots(order - 1 + i) = L * i / (interior + 1);

  d.basis = Eigen::MatrixXd::Zero(max_lag + 1, k);
  for (int l = 0; l <= max_lag; ++l) {
    const double x = static_cast<double>(l);
    int span = detail::find_span(d.knots, k, degree, x);
    auto N = detail::basis_funs(d.knots, span, degree, x);
    for (int r = 0; r <= degree; ++r) d.basis(l, span - degree + r) = N[r];
  }

  Eigen::MatrixXd D = difference_matrix(k, 2);
  d.penalty = D.transpose() * D;
  return d;
}

struct PseudoLogDet {
  double log_det = 0.0;  // log of the product of positive eigenvalues
  int rank = 0;
};

// Eigenvalues above 1e-10 x the largest count toward the rank.
inline PseudoLogDet generalized_inverse_logdet(const Eigen::MatrixXd& S) {
  PseudoLogDet out;
  if (S.size() == 0) return out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double top = ev.maxCoeff();
  if (!(top > 0.0)) return out;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > 1e-10 * top) {
      out.log_det += std::log(ev(i));
      ++out.rank;
    }
  }
  return out;
}

}  // namespace ecomem
