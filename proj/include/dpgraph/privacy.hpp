#pragma once

// Edge-differentially-private release of bi-degree sequences with discrete
// Laplace noise.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "dpgraph/errors.hpp"
#include "dpgraph/graph.hpp"
#include "dpgraph/rng.hpp"

namespace dpgraph {

/// Adding or removing one edge moves one out-degree and one in-degree by 1.
inline constexpr int bidegree_sensitivity = 2;

struct PrivacyParams {
  double epsilon = 0.0;
  double lambda = 0.0;  // exp(-epsilon / 2)
  double kappa = 0.0;   // 2 / (-log lambda) = 4 / epsilon
  int sensitivity = bidegree_sensitivity;

  static PrivacyParams from_epsilon(double epsilon) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw DomainError("epsilon must be finite and > 0");
    return {epsilon, std::exp(-epsilon / 2.0), 4.0 / epsilon, bidegree_sensitivity};
  }

  /// log(lambda) without underflow for large epsilon.
  double log_lambda() const noexcept { return -epsilon / 2.0; }

  /// Variance of one noise draw, 2 lambda / (1 - lambda)^2.
  double noise_variance() const {
    const double one_minus = -std::expm1(log_lambda());
    return 2.0 * lambda / (one_minus * one_minus);
  }
};

struct NoisyBiDegree {
  std::vector<std::int64_t> z_out;
  std::vector<std::int64_t> z_in;
  PrivacyParams params;
  std::optional<std::uint64_t> seed;

  std::size_t size() const noexcept { return z_out.size(); }
};

/// P(X = x) = (1 - lambda) / (1 + lambda) * lambda^|x|.
inline double discrete_laplace_pmf(std::int64_t x, double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw DomainError("discrete Laplace: lambda must lie in (0,1)");
  return (1.0 - lambda) / (1.0 + lambda) * std::pow(lambda, static_cast<double>(x < 0 ? -x : x));
}

namespace detail {

// Failures before the first success, success probability 1 - lambda, by
// inversion: floor(log U / log lambda) with U in (0, 1].
inline std::int64_t geometric_failures(double log_lambda, RandomStream& rng) {
  return static_cast<std::int64_t>(std::floor(std::log(rng.uniform_pos()) / log_lambda));
}

inline std::int64_t discrete_laplace_from_log(double log_lambda, RandomStream& rng) {
  const std::int64_t a = geometric_failures(log_lambda, rng);
  const std::int64_t b = geometric_failures(log_lambda, rng);
  return a - b;
}

}  // namespace detail

/// One draw as the difference of two i.i.d. geometric counts, which has
/// exactly the discrete Laplace pmf. Consumes two uniforms.
inline std::int64_t discrete_laplace_sample(double lambda, RandomStream& rng) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw DomainError("discrete Laplace: lambda must lie in (0,1)");
  return detail::discrete_laplace_from_log(std::log(lambda), rng);
}

/// z+ = d+ + e+, z- = d- + e- with 2n independent draws at lambda = exp(-epsilon/2):
/// first all out-degree noise, then all in-degree noise. Every in-degree is
/// perturbed, including the n-th.
inline NoisyBiDegree privatize(const BiDegree& d, double epsilon, RandomStream& rng) {
  const PrivacyParams params = PrivacyParams::from_epsilon(epsilon);
  const double log_lambda = params.log_lambda();
  NoisyBiDegree z{d.out_deg, d.in_deg, params, std::nullopt};
  for (auto& v : z.z_out) v += detail::discrete_laplace_from_log(log_lambda, rng);
  for (auto& v : z.z_in) v += detail::discrete_laplace_from_log(log_lambda, rng);
  return z;
}

/// sqrt(n log n) + kappa sqrt(log n), the high-probability bound on
/// max_i |z_i - E z_i| over both degree sequences.
inline double deviation_bound(std::size_t n, double epsilon) {
  if (n < 2) throw DomainError("deviation_bound: n must be >= 2");
  if (!(epsilon > 0.0)) throw DomainError("deviation_bound: epsilon must be > 0");
  const double nn = static_cast<double>(n);
  const double logn = std::log(nn);
  const double kappa = std::isinf(epsilon) ? 0.0 : 4.0 / epsilon;
  return std::sqrt(nn * logn) + kappa * std::sqrt(logn);
}

/// Largest deviation of a release from its expectation over both sequences.
inline double max_deviation(const NoisyBiDegree& z, const std::vector<double>& expected_out,
                            const std::vector<double>& expected_in) {
  double r = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    r = std::max(r, std::abs(static_cast<double>(z.z_out[i]) - expected_out[i]));
    r = std::max(r, std::abs(static_cast<double>(z.z_in[i]) - expected_in[i]));
  }
  return r;
}

// {"n", "epsilon", "z_out", "z_in", "seed"}; seed is null when unknown.
inline nlohmann::json to_json(const NoisyBiDegree& z) {
  nlohmann::json j;
  j["n"] = z.size();
  j["epsilon"] = z.params.epsilon;
  j["z_out"] = z.z_out;
  j["z_in"] = z.z_in;
  j["seed"] = z.seed ? nlohmann::json(*z.seed) : nlohmann::json(nullptr);
  return j;
}

inline NoisyBiDegree noisy_bidegree_from_json(const nlohmann::json& j) {
  try {
    NoisyBiDegree z;
    const auto n = j.at("n").get<std::size_t>();
    z.z_out = j.at("z_out").get<std::vector<std::int64_t>>();
    z.z_in = j.at("z_in").get<std::vector<std::int64_t>>();
    if (z.z_out.size() != n || z.z_in.size() != n) throw ParseError(0, "z_out/z_in length differs from n");
    if (n < 2) throw ParseError(0, "n must be >= 2");
    z.params = PrivacyParams::from_epsilon(j.at("epsilon").get<double>());
    if (j.contains("seed") && !j["seed"].is_null()) z.seed = j["seed"].get<std::uint64_t>();
    return z;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("bad degree JSON: ") + e.what());
  }
}

}  // namespace dpgraph
