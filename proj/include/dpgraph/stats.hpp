#pragma once

// Goodness-of-fit helpers used by the Monte-Carlo checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "dpgraph/errors.hpp"
#include "dpgraph/model.hpp"

namespace dpgraph::stats {

/// Survival function of the Kolmogorov distribution,
/// Q(t) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 t^2).
inline double kolmogorov_sf(double t) {
  if (t <= 0.0) return 1.0;
  if (t < 0.2) return 1.0;  // series converges slowly; the value is 1 to double precision
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * t * t);
    sum += (k % 2 ? term : -term);
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;  // sup |F_n - F|
  double p_value = 1.0;
};

/// One-sample Kolmogorov-Smirnov test with Stephens' small-sample correction
/// of the asymptotic p-value.
inline KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.size() < 2) throw ContractError("ks_test: need at least 2 values");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t k = 0; k < sample.size(); ++k) {
    const double f = cdf(sample[k]);
    d = std::max({d, static_cast<double>(k + 1) / n - f, f - static_cast<double>(k) / n});
  }
  const double sn = std::sqrt(n);
  return {d, kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)};
}

inline KsResult ks_test_normal(std::vector<double> sample) {
  return ks_test(std::move(sample), [](double x) { return normal_cdf(x); });
}

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

/// Pearson chi-square test of observed counts against expected counts
/// (same binning, expected summing to the sample size).
inline ChiSquareResult chi_square_test(std::span<const double> observed, std::span<const double> expected) {
  if (observed.size() != expected.size() || observed.size() < 2)
    throw ContractError("chi_square_test: need matching bins, at least 2");
  double stat = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    if (!(expected[k] > 0.0)) throw ContractError("chi_square_test: empty expected bin");
    const double diff = observed[k] - expected[k];
    stat += diff * diff / expected[k];
  }
  const int dof = static_cast<int>(observed.size()) - 1;
  const boost::math::chi_squared dist(dof);
  return {stat, dof, boost::math::cdf(boost::math::complement(dist, stat))};
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw ContractError("median of empty sample");
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2) return *mid;
  const double hi = *mid;
  return 0.5 * (hi + *std::max_element(v.begin(), mid));
}

inline double mean(std::span<const double> v) {
  if (v.empty()) throw ContractError("mean of empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double variance(std::span<const double> v) {
  if (v.size() < 2) throw ContractError("variance needs at least 2 values");
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace dpgraph::stats
