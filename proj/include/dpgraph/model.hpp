#pragma once

// Edge-mean families mu(alpha_i + beta_j) = E(a_ij) for directed graphs whose
// edge law depends on node parameters only through their sum.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>

#include <boost/math/special_functions/erf.hpp>

#include "dpgraph/errors.hpp"

namespace dpgraph {

namespace detail {

inline void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw DomainError(std::string(what) + ": non-finite argument");
}

}  // namespace detail

inline constexpr double inv_sqrt_2pi = 0.39894228040143267794;  // 1/sqrt(2 pi)
inline constexpr double inv_sqrt_2pie = 0.24197072451914334980;  // 1/sqrt(2 pi e)

/// Standard normal CDF.
///
/// Evaluated as 0.5 * erfc(-x / sqrt(2)) through the C library erfc, which is
/// accurate to a few ulp over the whole real line (relative accuracy is kept
/// in the lower tail, where 1 - erf would cancel). The absolute error is far
/// below 1e-12; tests check it against Gauss-Legendre quadrature of the density.
inline double normal_cdf(double x) {
  detail::require_finite(x, "normal_cdf");
  return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0);
}

inline double normal_pdf(double x) {
  detail::require_finite(x, "normal_pdf");
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

/// Inverse of the standard normal CDF, p in (0, 1).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile: p must lie in (0,1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

template <typename M>
concept EdgeMeanModel = requires(const M& m, double x) {
  { M::name } -> std::convertible_to<std::string_view>;
  { m.mu(x) } -> std::convertible_to<double>;
  { m.mu_prime(x) } -> std::convertible_to<double>;
  { m.mu_second(x) } -> std::convertible_to<double>;
};

/// mu = Phi, the standard normal CDF.
struct Probit {
  static constexpr std::string_view name = "probit";

  double mu(double x) const { return normal_cdf(x); }
  double mu_prime(double x) const { return normal_pdf(x); }
  // |mu''| peaks at |x| = 1 with value 1/sqrt(2 pi e).
  double mu_second(double x) const { return -x * normal_pdf(x); }
};

/// mu(x) = 1 / (1 + exp(-x)).
struct Logit {
  static constexpr std::string_view name = "logit";

  double mu(double x) const {
    detail::require_finite(x, "logit mu");
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  double mu_prime(double x) const {
    const double p = mu(x);
    return p * (1.0 - p);
  }
  double mu_second(double x) const {
    const double p = mu(x);
    return p * (1.0 - p) * (1.0 - 2.0 * p);
  }
};

struct ModelBounds {
  double Q = 0.0;     // radius of |alpha_i + beta_j|
  double m = 0.0;     // min of mu' on [-Q, Q]
  double M = 0.0;     // max of mu' on [-Q, Q]
  double eta1 = 0.0;  // bound on |mu''|
};

inline constexpr double bounds_grid_step = 1e-3;
inline constexpr double bounds_outward_pad = 1e-9;

/// Derivative bounds by scanning [-Q, Q] with step <= 1e-3, widened outward by 1e-9.
template <EdgeMeanModel Model>
ModelBounds bounds_for(const Model& model, double Q) {
  if (!(Q >= 0.0) || !std::isfinite(Q)) throw DomainError("bounds_for: Q must be finite and >= 0");
  const auto steps = static_cast<long>(std::ceil(2.0 * Q / bounds_grid_step));
  double lo = model.mu_prime(-Q);
  double hi = lo;
  double curv = std::abs(model.mu_second(-Q));
  for (long k = 1; k <= steps; ++k) {
    const double x = std::min(Q, -Q + 2.0 * Q * static_cast<double>(k) / static_cast<double>(steps));
    const double d1 = model.mu_prime(x);
    lo = std::min(lo, d1);
    hi = std::max(hi, d1);
    curv = std::max(curv, std::abs(model.mu_second(x)));
  }
  return {Q, std::max(0.0, lo - bounds_outward_pad), hi + bounds_outward_pad, curv + bounds_outward_pad};
}

/// Closed form for the probit family: m = phi(Q), M = phi(0), eta1 = 1/sqrt(2 pi e).
inline ModelBounds bounds_for(const Probit& model, double Q) {
  if (!(Q >= 0.0) || !std::isfinite(Q)) throw DomainError("bounds_for: Q must be finite and >= 0");
  return {Q, model.mu_prime(Q), inv_sqrt_2pi, inv_sqrt_2pie};
}

/// Calls fn(model) with the model named by id ("probit" or "logit").
template <typename Fn>
decltype(auto) with_model(std::string_view id, Fn&& fn) {
  if (id == Probit::name) return std::forward<Fn>(fn)(Probit{});
  if (id == Logit::name) return std::forward<Fn>(fn)(Logit{});
  throw DomainError("unknown model '" + std::string(id) + "' (allowed: probit, logit)");
}

inline bool is_known_model(std::string_view id) { return id == Probit::name || id == Logit::name; }

}  // namespace dpgraph
