#pragma once

// Moment estimator for node parameters from (possibly noisy) bi-degrees.
//
// Solves F(theta) = 0 with
//   F_i     = z+_i - sum_{k != i} mu(alpha_i + beta_k),   i = 1..n
//   F_{n+j} = z-_j - sum_{k != j} mu(alpha_k + beta_j),   j = 1..n-1
// (beta_n = 0, the n-th in-degree equation is dropped) by full Newton steps.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "dpgraph/errors.hpp"
#include "dpgraph/graph.hpp"
#include "dpgraph/jacobian.hpp"
#include "dpgraph/model.hpp"
#include "dpgraph/privacy.hpp"

namespace dpgraph {

/// Right-hand sides of the moment equations. Real-valued so exact expected
/// degrees can be fitted as well as integer releases.
struct DegreeTargets {
  std::vector<double> out;
  std::vector<double> in;

  std::size_t size() const noexcept { return out.size(); }

  static DegreeTargets from(const BiDegree& d) {
    return {std::vector<double>(d.out_deg.begin(), d.out_deg.end()),
            std::vector<double>(d.in_deg.begin(), d.in_deg.end())};
  }
  static DegreeTargets from(const NoisyBiDegree& z) {
    return {std::vector<double>(z.z_out.begin(), z.z_out.end()),
            std::vector<double>(z.z_in.begin(), z.z_in.end())};
  }
};

namespace detail {

inline void check_dims(const ParameterVector& theta, const DegreeTargets& z) {
  if (theta.size() < 2) throw ContractError("need n >= 2");
  if (z.out.size() != theta.size() || z.in.size() != theta.size())
    throw ContractError("degree vectors must have length n = " + std::to_string(theta.size()));
}

}  // namespace detail

template <EdgeMeanModel Model>
Eigen::VectorXd moment_residual(const ParameterVector& theta, const DegreeTargets& z, const Model& model) {
  detail::check_dims(theta, z);
  const std::size_t n = theta.size();
  Eigen::VectorXd F(static_cast<Eigen::Index>(2 * n - 1));
  std::vector<double> col(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      const double p = model.mu(theta.alpha(i) + theta.beta(k));
      row += p;
      col[k] += p;
    }
    F(static_cast<Eigen::Index>(i)) = z.out[i] - row;
  }
  for (std::size_t j = 0; j + 1 < n; ++j) F(static_cast<Eigen::Index>(n + j)) = z.in[j] - col[j];
  return F;
}

enum class NonExistence {
  none,
  degree_out_of_range,  // some target outside the attainable open interval (0, n-1)
  iteration_limit,
  diverged,             // ||theta||_inf passed the divergence guard
  singular_jacobian,
  stalled,              // step below tolerance while the residual is not
};

inline std::string_view to_string(NonExistence r) {
  switch (r) {
    case NonExistence::none: return "none";
    case NonExistence::degree_out_of_range: return "range";
    case NonExistence::iteration_limit: return "iteration_limit";
    case NonExistence::diverged: return "diverged";
    case NonExistence::singular_jacobian: return "singular";
    case NonExistence::stalled: return "stalled";
  }
  return "unknown";
}

enum class LinearSolve {
  exact,                // dense LU with partial pivoting
  preconditioned_cg,    // conjugate gradients on V with S as preconditioner, O(n^2) per iteration
};

struct SolveOptions {
  double residual_tol_per_node = 1e-8;  // converged when ||F||_inf <= this * n
  double step_tol = 1e-10;
  int max_iter = 200;
  double divergence_guard = 50.0;
  double min_rcond = 1e-13;
  // One extra Newton step after the residual test passes; kept only if it
  // does not increase the residual.
  bool polish = true;
  LinearSolve solver = LinearSolve::exact;
  double cg_rel_tol = 1e-13;  // preconditioned_cg: stop when ||r|| <= this * ||F||
  int cg_max_iter = 100;
  std::optional<ParameterVector> init;  // default: theta = 0
};

struct FitResult {
  std::string model;
  std::optional<double> epsilon;  // set when the targets were a private release
  ParameterVector theta_hat;
  bool converged = false;
  bool exists = false;
  NonExistence reason = NonExistence::none;
  int iterations = 0;
  double residual_norm = 0.0;

  // Filled by attach_variance (empty until then).
  std::vector<double> var_diag;  // u_kk / v_kk^2, k = 1..2n-1
  double shared_var = 0.0;       // u_{2n,2n} / v_{2n,2n}^2
  double privacy_var = 0.0;      // s_n^2 / v_{2n,2n}^2, 0 without privacy

  std::size_t n() const noexcept { return theta_hat.size(); }
  bool has_variance() const noexcept { return !var_diag.empty(); }
};

namespace detail {

inline bool out_of_range(double v, double upper) { return !(v > 0.0 && v < upper); }

// Every expected degree lies in (0, n-1), so no solution exists unless every
// used target does. The dropped n-th in-degree equation is implied by the
// others: sum z+ - sum_{j<n} z-_j must match sum_i mu(alpha_i + beta_n).
inline bool targets_in_range(const DegreeTargets& z) {
  const std::size_t n = z.size();
  const double upper = static_cast<double>(n - 1);
  double implied = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (out_of_range(z.out[i], upper)) return false;
    implied += z.out[i];
  }
  for (std::size_t j = 0; j + 1 < n; ++j) {
    if (out_of_range(z.in[j], upper)) return false;
    implied -= z.in[j];
  }
  return !out_of_range(implied, upper);
}

// V is symmetric positive definite (x'Vx = sum_{i!=j} w_ij (x_i + y_j)^2 with
// y_n = 0) and so is S, which clusters the spectrum of S V near 1.
inline bool pcg_solve(const JacobianMatrix& V, const Eigen::VectorXd& F, const SolveOptions& opts,
                      Eigen::VectorXd& x) {
  for (std::size_t k = 0; k < V.dim(); ++k)
    if (!(V.diag(k) > 0.0)) return false;
  if (!(V.corner() > 0.0)) return false;
  const SApprox S = build_s_approx(V);
  x = S.apply(F);
  Eigen::VectorXd r = F - V.multiply(x);
  const double stop = opts.cg_rel_tol * F.norm();
  Eigen::VectorXd zv = S.apply(r);
  Eigen::VectorXd p = zv;
  double rz = r.dot(zv);
  for (int it = 0; it < opts.cg_max_iter && r.norm() > stop; ++it) {
    const Eigen::VectorXd Vp = V.multiply(p);
    const double pVp = p.dot(Vp);
    if (!(pVp > 0.0)) return false;
    const double step = rz / pVp;
    x += step * p;
    r -= step * Vp;
    zv = S.apply(r);
    const double rz_next = r.dot(zv);
    p = zv + (rz_next / rz) * p;
    rz = rz_next;
  }
  return r.norm() <= std::max(stop, 1e-9 * F.norm());
}

// Solves V delta = F. Returns false when V is numerically singular.
inline bool newton_step(const JacobianMatrix& V, const Eigen::VectorXd& F, const SolveOptions& opts,
                        Eigen::VectorXd& delta) {
  if (opts.solver == LinearSolve::preconditioned_cg) {
    if (!pcg_solve(V, F, opts, delta)) return false;
  } else {
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(V.dense());
    if (!(lu.rcond() >= opts.min_rcond)) return false;
    delta = lu.solve(F);
  }
  return delta.allFinite();
}

inline void add_free(ParameterVector& theta, const Eigen::VectorXd& delta) {
  std::vector<double> v = theta.free_vector();
  for (std::size_t k = 0; k < v.size(); ++k) v[k] += delta(static_cast<Eigen::Index>(k));
  theta = ParameterVector::from_free(v, theta.size());
}

}  // namespace detail

/// Full Newton iteration theta <- theta + V^{-1} F(theta) from opts.init (or 0).
///
/// Statistical non-existence is reported through FitResult::exists/reason.
/// Throws NumericalFailure if the residual turns NaN.
template <EdgeMeanModel Model>
FitResult newton_solve(const DegreeTargets& z, const Model& model, const SolveOptions& opts = {}) {
  const std::size_t n = z.size();
  ParameterVector theta = opts.init ? *opts.init : ParameterVector(n);
  detail::check_dims(theta, z);

  FitResult fit;
  fit.model = std::string(Model::name);
  const double tol = opts.residual_tol_per_node * static_cast<double>(n);

  auto finish = [&](NonExistence reason) {
    fit.theta_hat = theta;
    fit.reason = reason;
    fit.exists = reason == NonExistence::none && fit.converged && fit.residual_norm <= tol;
    return fit;
  };

  if (!detail::targets_in_range(z)) {
    fit.residual_norm = moment_residual(theta, z, model).cwiseAbs().maxCoeff();
    return finish(NonExistence::degree_out_of_range);
  }

  Eigen::VectorXd F = moment_residual(theta, z, model);
  Eigen::VectorXd delta;
  for (;;) {
    if (!F.allFinite()) throw NumericalFailure("non-finite moment residual at iteration " + std::to_string(fit.iterations));
    fit.residual_norm = F.cwiseAbs().maxCoeff();

    if (fit.residual_norm <= tol) {
      fit.converged = true;
      if (opts.polish &&
          detail::newton_step(jacobian(theta, model), F, opts, delta)) {
        ParameterVector polished = theta;
        detail::add_free(polished, delta);
        const Eigen::VectorXd Fp = moment_residual(polished, z, model);
        if (Fp.allFinite() && Fp.cwiseAbs().maxCoeff() <= fit.residual_norm) {
          theta = std::move(polished);
          fit.residual_norm = Fp.cwiseAbs().maxCoeff();
          ++fit.iterations;
        }
      }
      return finish(NonExistence::none);
    }
    if (fit.iterations >= opts.max_iter) return finish(NonExistence::iteration_limit);

    if (!detail::newton_step(jacobian(theta, model), F, opts, delta))
      return finish(NonExistence::singular_jacobian);
    detail::add_free(theta, delta);
    ++fit.iterations;

    if (theta.max_abs() > opts.divergence_guard) return finish(NonExistence::diverged);
    F = moment_residual(theta, z, model);
    if (delta.cwiseAbs().maxCoeff() <= opts.step_tol) {
      if (!F.allFinite()) throw NumericalFailure("non-finite moment residual");
      fit.residual_norm = F.cwiseAbs().maxCoeff();
      fit.converged = true;
      return finish(fit.residual_norm <= tol ? NonExistence::none : NonExistence::stalled);
    }
  }
}

/// Variance building blocks at a fitted theta.
struct VarianceInputs {
  Eigen::MatrixXd u;          // u_ij = mu(1 - mu) at alpha_i + beta_j, zero diagonal
  std::vector<double> u_diag; // u_kk: row sums (k <= n), column sums (k > n)
  double u_2n2n = 0.0;        // Var(d-_n) = sum_i u_{i,n}
  double s_n_sq = 0.0;        // (2n - 1) 2 lambda / (1 - lambda)^2, 0 without privacy
  std::vector<double> v_diag; // v_kk of the Jacobian at theta
  double v_2n2n = 0.0;

  std::vector<double> z_diag;  // u_kk / v_kk^2
  double shared_var = 0.0;     // u_2n2n / v_2n2n^2
  double privacy_var = 0.0;    // s_n^2 / v_2n2n^2
};

/// Edge variances are Bernoulli: Var(a_ij) = mu (1 - mu).
template <EdgeMeanModel Model>
VarianceInputs variance_estimates(const ParameterVector& theta, const Model& model,
                                  const std::optional<PrivacyParams>& privacy) {
  const std::size_t n = theta.size();
  const auto nn = static_cast<Eigen::Index>(n);
  VarianceInputs out;
  out.u = Eigen::MatrixXd::Zero(nn, nn);
  for (Eigen::Index i = 0; i < nn; ++i)
    for (Eigen::Index j = 0; j < nn; ++j) {
      if (i == j) continue;
      const double p = model.mu(theta.alpha(static_cast<std::size_t>(i)) + theta.beta(static_cast<std::size_t>(j)));
      out.u(i, j) = p * (1.0 - p);
    }

  const JacobianMatrix V = jacobian(theta, model);
  const Eigen::VectorXd urow = out.u.rowwise().sum();
  const Eigen::VectorXd ucol = out.u.colwise().sum().transpose();
  out.u_diag.resize(2 * n - 1);
  out.v_diag.resize(2 * n - 1);
  out.z_diag.resize(2 * n - 1);
  for (std::size_t k = 0; k < 2 * n - 1; ++k) {
    out.u_diag[k] = k < n ? urow(static_cast<Eigen::Index>(k)) : ucol(static_cast<Eigen::Index>(k - n));
    out.v_diag[k] = V.diag(k);
    if (!(out.v_diag[k] > 0.0)) throw SingularityError("variance: v_kk = 0 at k = " + std::to_string(k + 1));
    out.z_diag[k] = out.u_diag[k] / (out.v_diag[k] * out.v_diag[k]);
  }
  out.u_2n2n = ucol(nn - 1);
  out.v_2n2n = V.corner();
  if (!(out.v_2n2n > 0.0)) throw SingularityError("variance: v_{2n,2n} = 0");
  const double v2 = out.v_2n2n * out.v_2n2n;
  out.shared_var = out.u_2n2n / v2;
  if (privacy) out.s_n_sq = static_cast<double>(2 * n - 1) * privacy->noise_variance();
  out.privacy_var = out.s_n_sq / v2;
  return out;
}

template <EdgeMeanModel Model>
void attach_variance(FitResult& fit, const Model& model, const std::optional<PrivacyParams>& privacy) {
  const VarianceInputs v = variance_estimates(fit.theta_hat, model, privacy);
  fit.var_diag = v.z_diag;
  fit.shared_var = v.shared_var;
  fit.privacy_var = v.privacy_var;
  fit.epsilon = privacy ? std::optional<double>(privacy->epsilon) : std::nullopt;
}

/// newton_solve followed by attach_variance when the estimate exists.
template <EdgeMeanModel Model>
FitResult fit_degrees(const DegreeTargets& z, const Model& model, const std::optional<PrivacyParams>& privacy,
                      const SolveOptions& opts = {}) {
  FitResult fit = newton_solve(z, model, opts);
  fit.epsilon = privacy ? std::optional<double>(privacy->epsilon) : std::nullopt;
  if (fit.exists) attach_variance(fit, model, privacy);
  return fit;
}

enum class StatKind { xi, zeta, eta };

inline std::string_view to_string(StatKind k) {
  switch (k) {
    case StatKind::xi: return "xi";
    case StatKind::zeta: return "zeta";
    case StatKind::eta: return "eta";
  }
  return "?";
}

inline StatKind parse_stat_kind(std::string_view s) {
  if (s == "xi") return StatKind::xi;
  if (s == "zeta") return StatKind::zeta;
  if (s == "eta") return StatKind::eta;
  throw DomainError("unknown statistic '" + std::string(s) + "' (allowed: xi, zeta, eta)");
}

/// Which variance enters the standardizing denominators.
enum class VarianceMode {
  diagonal,     // u_kk / v_kk^2 only
  with_shared,  // plus u_2n2n / v_2n2n^2 and s_n^2 / v_2n2n^2
};

/// 1-based node pair.
struct IndexPair {
  std::size_t i = 0;
  std::size_t j = 0;
  friend bool operator==(const IndexPair&, const IndexPair&) = default;
};

namespace detail {

struct Contrast {
  std::size_t k1, k2;  // free coordinates (0-based)
  bool sum;            // theta_k1 + theta_k2 instead of the difference
};

inline Contrast contrast_for(std::size_t n, IndexPair p, StatKind kind) {
  const auto in_range = [&](std::size_t v, std::size_t hi) { return v >= 1 && v <= hi; };
  switch (kind) {
    case StatKind::xi:
      if (!in_range(p.i, n) || !in_range(p.j, n)) break;
      return {p.i - 1, p.j - 1, false};
    case StatKind::zeta:
      if (!in_range(p.i, n) || !in_range(p.j, n - 1)) break;
      return {p.i - 1, n + p.j - 1, true};
    case StatKind::eta:
      if (!in_range(p.i, n - 1) || !in_range(p.j, n - 1)) break;
      return {n + p.i - 1, n + p.j - 1, false};
  }
  throw ContractError("pair (" + std::to_string(p.i) + "," + std::to_string(p.j) + ") invalid for statistic " +
                      std::string(to_string(kind)) + " at n = " + std::to_string(n));
}

inline void require_existing(const FitResult& fit) {
  if (!fit.exists) throw ContractError("estimate does not exist (" + std::string(to_string(fit.reason)) + ")");
  if (!fit.has_variance()) throw ContractError("fit has no variance estimates attached");
}

inline double contrast_value(const ParameterVector& t, const Contrast& c) {
  return c.sum ? t.free(c.k1) + t.free(c.k2) : t.free(c.k1) - t.free(c.k2);
}

inline double contrast_se(const FitResult& fit, const Contrast& c, VarianceMode mode) {
  double extra = mode == VarianceMode::with_shared ? fit.shared_var + fit.privacy_var : 0.0;
  return std::sqrt(fit.var_diag[c.k1] + fit.var_diag[c.k2] + 2.0 * extra);
}

}  // namespace detail

/// Checks that `pair` is valid for `kind` at node count n.
inline void validate_pair(std::size_t n, IndexPair pair, StatKind kind) { (void)detail::contrast_for(n, pair, kind); }

/// xi:   (a_i - a_j - (a*_i - a*_j)) / sqrt(z_ii + z_jj)
/// zeta: (a_i + b_j - (a*_i + b*_j)) / sqrt(z_ii + z_{n+j,n+j})
/// eta:  (b_i - b_j - (b*_i - b*_j)) / sqrt(z_{n+i,n+i} + z_{n+j,n+j})
inline std::vector<double> standardized_stats(const FitResult& fit, const ParameterVector& theta_star,
                                              std::span<const IndexPair> pairs, StatKind kind,
                                              VarianceMode mode = VarianceMode::diagonal) {
  detail::require_existing(fit);
  if (theta_star.size() != fit.n()) throw ContractError("theta_star has the wrong size");
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const IndexPair& p : pairs) {
    const auto c = detail::contrast_for(fit.n(), p, kind);
    out.push_back((detail::contrast_value(fit.theta_hat, c) - detail::contrast_value(theta_star, c)) /
                  detail::contrast_se(fit, c, mode));
  }
  return out;
}

struct ConfidenceInterval {
  double estimate = 0.0;
  double se = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double length = 0.0;       // hi - lo
  double half_length = 0.0;  // (hi - lo) / 2

  bool covers(double value) const noexcept { return lo <= value && value <= hi; }
};

/// Normal-theory interval for the contrast of `kind` (alpha_i - alpha_j for xi).
inline ConfidenceInterval confidence_interval(const FitResult& fit, IndexPair pair, double level = 0.95,
                                              StatKind kind = StatKind::xi,
                                              VarianceMode mode = VarianceMode::diagonal) {
  detail::require_existing(fit);
  if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must lie in (0,1)");
  const auto c = detail::contrast_for(fit.n(), pair, kind);
  const double zq = normal_quantile(0.5 + level / 2.0);
  ConfidenceInterval ci;
  ci.estimate = detail::contrast_value(fit.theta_hat, c);
  ci.se = detail::contrast_se(fit, c, mode);
  ci.lo = ci.estimate - zq * ci.se;
  ci.hi = ci.estimate + zq * ci.se;
  ci.length = 2.0 * zq * ci.se;
  ci.half_length = zq * ci.se;
  return ci;
}

inline double true_contrast(const ParameterVector& theta, std::size_t n, IndexPair pair, StatKind kind) {
  return detail::contrast_value(theta, detail::contrast_for(n, pair, kind));
}

struct ConvergenceDiagnostics {
  double r = 0.0;       // ||V(theta*)^{-1} F(theta*)||_inf
  double rho = 0.0;
  double rho_r = 0.0;
  double K1 = 0.0;      // 4 eta1 (n - 1)
  double K2 = 0.0;      // 2 eta1 (n - 1)
  ModelBounds bounds;
  bool contraction = false;  // rho r < 1/2
};

/// Newton-Kantorovich quantities at the true parameter, with the unknown
/// universal constant in the S-approximation bound set to 1:
///   rho = (2n-1) M^2 K1 / (2 m^3 n^2) + K2 / ((n-1) m).
template <EdgeMeanModel Model>
ConvergenceDiagnostics convergence_diagnostics(const DegreeTargets& z, const ParameterVector& theta_star,
                                               const Model& model, double Q) {
  const std::size_t n = theta_star.size();
  const double nn = static_cast<double>(n);
  ConvergenceDiagnostics d;
  d.bounds = bounds_for(model, Q);
  const Eigen::VectorXd F = moment_residual(theta_star, z, model);
  const Eigen::VectorXd step = jacobian(theta_star, model).dense().partialPivLu().solve(F);
  d.r = step.cwiseAbs().maxCoeff();
  d.K1 = 4.0 * d.bounds.eta1 * (nn - 1.0);
  d.K2 = 2.0 * d.bounds.eta1 * (nn - 1.0);
  const double m = d.bounds.m, M = d.bounds.M;
  d.rho = (2.0 * nn - 1.0) * M * M * d.K1 / (2.0 * m * m * m * nn * nn) + d.K2 / ((nn - 1.0) * m);
  d.rho_r = d.rho * d.r;
  d.contraction = d.rho_r < 0.5;
  return d;
}

/// {"n", "model", "epsilon", "alpha", "beta", "se_alpha", "se_beta", "converged",
///  "exists", "iterations", "residual_norm"}; se_k = sqrt(z_kk). se_beta has
/// length n with a trailing 0 for the pinned beta_n. Non-existent fits carry
/// empty se arrays and a "reason" field.
inline nlohmann::json to_json(const FitResult& fit) {
  const std::size_t n = fit.n();
  nlohmann::json j;
  j["n"] = n;
  j["model"] = fit.model;
  j["epsilon"] = fit.epsilon ? nlohmann::json(*fit.epsilon) : nlohmann::json(nullptr);
  j["alpha"] = std::vector<double>(fit.theta_hat.alpha().begin(), fit.theta_hat.alpha().end());
  j["beta"] = std::vector<double>(fit.theta_hat.beta().begin(), fit.theta_hat.beta().end());
  std::vector<double> se_a, se_b;
  if (fit.has_variance()) {
    for (std::size_t k = 0; k < n; ++k) se_a.push_back(std::sqrt(fit.var_diag[k]));
    for (std::size_t k = n; k < 2 * n - 1; ++k) se_b.push_back(std::sqrt(fit.var_diag[k]));
    se_b.push_back(0.0);
  }
  j["se_alpha"] = se_a;
  j["se_beta"] = se_b;
  j["converged"] = fit.converged;
  j["exists"] = fit.exists;
  j["iterations"] = fit.iterations;
  j["residual_norm"] = fit.residual_norm;
  if (!fit.exists) j["reason"] = std::string(to_string(fit.reason));
  return j;
}

}  // namespace dpgraph
