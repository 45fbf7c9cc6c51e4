#pragma once

// The Jacobian V = -F'(theta) of the bi-degree moment system and the closed-form
// approximate inverse S of matrices in the class L_n(m, M).
//
// Free coordinates are ordered alpha_1..alpha_n, beta_1..beta_{n-1}, so V is
// (2n-1) x (2n-1):
//
//   V = [ V11  V12 ]    V11 = diag(row sums of w)          (n x n)
//       [ V12' V22 ]    V22 = diag(column sums of w)[0..n-2]
//                       V12(i, j) = w(i, j), zero when i == j
//
// with w(i, j) = mu'(alpha_i + beta_j) for i != j and w(i, i) = 0.

#include <algorithm>
#include <cmath>
#include <cstddef>

#include <Eigen/Dense>

#include "dpgraph/errors.hpp"
#include "dpgraph/graph.hpp"
#include "dpgraph/model.hpp"

namespace dpgraph {

class JacobianMatrix {
 public:
  /// Takes ownership of the pair-derivative matrix w (n x n, zero diagonal).
  explicit JacobianMatrix(Eigen::MatrixXd w) : w_(std::move(w)) {
    if (w_.rows() != w_.cols() || w_.rows() < 2) throw ContractError("w must be square with n >= 2");
    w_.diagonal().setZero();
    row_sums_ = w_.rowwise().sum();
    col_sums_ = w_.colwise().sum().transpose();
  }

  std::size_t n() const noexcept { return static_cast<std::size_t>(w_.rows()); }
  std::size_t dim() const noexcept { return 2 * n() - 1; }
  const Eigen::MatrixXd& w() const noexcept { return w_; }

  /// v_{k,k}, k in [0, 2n-1).
  double diag(std::size_t k) const {
    return k < n() ? row_sums_(static_cast<Eigen::Index>(k)) : col_sums_(static_cast<Eigen::Index>(k - n()));
  }

  /// v_{2n,i} = v_{i,i} - sum_{j != i} v_{i,j}: w(i, n) for i < n-1, zero otherwise.
  double boundary(std::size_t i) const {
    return i + 1 < n() ? w_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n() - 1)) : 0.0;
  }

  /// v_{2n,2n} = sum_i w(i, n).
  double corner() const { return col_sums_(static_cast<Eigen::Index>(n() - 1)); }

  /// V x without forming V, O(n^2).
  Eigen::VectorXd multiply(const Eigen::VectorXd& x) const {
    const auto nn = static_cast<Eigen::Index>(n());
    const auto xa = x.head(nn);
    const auto xb = x.tail(nn - 1);
    Eigen::VectorXd y(2 * nn - 1);
    y.head(nn) = row_sums_.cwiseProduct(xa) + w_.leftCols(nn - 1) * xb;
    y.tail(nn - 1) = col_sums_.head(nn - 1).cwiseProduct(xb) + w_.leftCols(nn - 1).transpose() * xa;
    return y;
  }

  Eigen::MatrixXd dense() const {
    const auto nn = static_cast<Eigen::Index>(n());
    const Eigen::Index d = 2 * nn - 1;
    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < nn; ++i) V(i, i) = row_sums_(i);
    for (Eigen::Index j = 0; j + 1 < nn; ++j) V(nn + j, nn + j) = col_sums_(j);
    V.topRightCorner(nn, nn - 1) = w_.leftCols(nn - 1);
    V.bottomLeftCorner(nn - 1, nn) = w_.leftCols(nn - 1).transpose();
    return V;
  }

 private:
  Eigen::MatrixXd w_;
  Eigen::VectorXd row_sums_;
  Eigen::VectorXd col_sums_;
};

template <EdgeMeanModel Model>
JacobianMatrix jacobian(const ParameterVector& theta, const Model& model) {
  const auto n = static_cast<Eigen::Index>(theta.size());
  Eigen::MatrixXd w(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      w(i, j) = i == j ? 0.0 : model.mu_prime(theta.alpha(i) + theta.beta(j));
  return JacobianMatrix(std::move(w));
}

/// S approximates V^{-1}:
///   s_ij = delta_ij / v_ii + 1 / v_{2n,2n}   within the same block,
///   s_ij = -1 / v_{2n,2n}                    across blocks.
class SApprox {
 public:
  SApprox(Eigen::VectorXd diag_inv, double shared, std::size_t n)
      : diag_inv_(std::move(diag_inv)), shared_(shared), n_(n) {}

  std::size_t n() const noexcept { return n_; }
  const Eigen::VectorXd& diag() const noexcept { return diag_inv_; }
  double shared() const noexcept { return shared_; }

  double entry(std::size_t i, std::size_t j) const {
    const bool same_block = (i < n_) == (j < n_);
    if (!same_block) return -shared_;
    return (i == j ? diag_inv_(static_cast<Eigen::Index>(i)) : 0.0) + shared_;
  }

  Eigen::MatrixXd dense() const {
    const auto d = static_cast<Eigen::Index>(2 * n_ - 1);
    const auto nn = static_cast<Eigen::Index>(n_);
    Eigen::MatrixXd S = Eigen::MatrixXd::Constant(d, d, shared_);
    S.topRightCorner(nn, nn - 1).setConstant(-shared_);
    S.bottomLeftCorner(nn - 1, nn).setConstant(-shared_);
    S.diagonal() += diag_inv_;
    return S;
  }

  /// S x in O(n): (S x)_i = x_i / v_ii + sign_i * x_2n / v_{2n,2n},
  /// x_2n = sum_{i <= n} x_i - sum_{i > n} x_i.
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    const auto nn = static_cast<Eigen::Index>(n_);
    const double x2n = x.head(nn).sum() - x.tail(nn - 1).sum();
    Eigen::VectorXd y = x.cwiseProduct(diag_inv_);
    y.head(nn).array() += shared_ * x2n;
    y.tail(nn - 1).array() -= shared_ * x2n;
    return y;
  }

 private:
  Eigen::VectorXd diag_inv_;
  double shared_;
  std::size_t n_;
};

inline SApprox build_s_approx(const JacobianMatrix& V) {
  const auto d = static_cast<Eigen::Index>(V.dim());
  Eigen::VectorXd inv(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double v = V.diag(static_cast<std::size_t>(k));
    if (!(v > 0.0)) throw SingularityError("S approximation: zero diagonal entry v_kk");
    inv(k) = 1.0 / v;
  }
  const double corner = V.corner();
  if (!(corner > 0.0)) throw SingularityError("S approximation: v_{2n,2n} is zero");
  return SApprox(std::move(inv), 1.0 / corner, V.n());
}

/// Outcome of checking the structural conditions of L_n(m, M).
struct LnMembership {
  bool row_margin = true;       // m <= v_ii - sum_{j>n} v_ij <= M (i < n), equality at i = n
  bool v11_diagonal = true;     // off-diagonal of the alpha block is zero
  bool v22_diagonal = true;     // off-diagonal of the beta block is zero
  bool cross_bounds = true;     // m <= v_ij = v_ji <= M across blocks, j != n+i
  bool cross_zero = true;       // v_{i,n+i} = v_{n+i,i} = 0
  bool beta_row_sums = true;    // v_ii = sum_{k<=n} v_ki = sum_{k<=n} v_ik for i > n

  bool all() const noexcept {
    return row_margin && v11_diagonal && v22_diagonal && cross_bounds && cross_zero && beta_row_sums;
  }
};

/// Checks V against every defining condition of L_n(m, M). Equalities hold to
/// `tol` relative to the largest diagonal entry.
inline LnMembership check_ln_class(const Eigen::MatrixXd& V, std::size_t n, double m, double M,
                                   double tol = 1e-12) {
  const auto nn = static_cast<Eigen::Index>(n);
  const Eigen::Index d = 2 * nn - 1;
  if (V.rows() != d || V.cols() != d) throw ContractError("V must be (2n-1) x (2n-1)");
  const double scale = std::max(1.0, V.diagonal().cwiseAbs().maxCoeff());
  const double eps = tol * scale;
  LnMembership r;

  for (Eigen::Index i = 0; i < nn; ++i) {
    const double margin = V(i, i) - V.row(i).segment(nn, nn - 1).sum();
    if (i + 1 < nn) {
      if (margin < m - eps || margin > M + eps) r.row_margin = false;
    } else if (std::abs(margin) > eps) {
      r.row_margin = false;
    }
  }
  for (Eigen::Index i = 0; i < nn; ++i)
    for (Eigen::Index j = 0; j < nn; ++j)
      if (i != j && V(i, j) != 0.0) r.v11_diagonal = false;
  for (Eigen::Index i = nn; i < d; ++i)
    for (Eigen::Index j = nn; j < d; ++j)
      if (i != j && V(i, j) != 0.0) r.v22_diagonal = false;
  for (Eigen::Index i = 0; i < nn; ++i) {
    for (Eigen::Index j = nn; j < d; ++j) {
      if (j == nn + i) {
        if (V(i, j) != 0.0 || V(j, i) != 0.0) r.cross_zero = false;
        continue;
      }
      if (V(i, j) != V(j, i) || V(i, j) < m - eps || V(i, j) > M + eps) r.cross_bounds = false;
    }
  }
  for (Eigen::Index i = nn; i < d; ++i) {
    const double col = V.col(i).head(nn).sum();
    const double row = V.row(i).head(nn).sum();
    if (std::abs(V(i, i) - col) > eps || std::abs(V(i, i) - row) > eps) r.beta_row_sums = false;
  }
  return r;
}

/// ||V^{-1} - S||_max via an exact dense inverse.
inline double s_approx_error(const JacobianMatrix& V) {
  const Eigen::MatrixXd exact = V.dense().inverse();
  return (exact - build_s_approx(V).dense()).cwiseAbs().maxCoeff();
}

}  // namespace dpgraph
