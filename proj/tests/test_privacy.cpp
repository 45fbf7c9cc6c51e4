#include <cmath>
#include <map>
#include <vector>

#include <gtest/gtest.h>

#include "dpgraph/privacy.hpp"
#include "dpgraph/stats.hpp"

using namespace dpgraph;

TEST(PrivacyParams, FromEpsilon) {
  const auto p = PrivacyParams::from_epsilon(2.0);
  EXPECT_DOUBLE_EQ(p.lambda, std::exp(-1.0));
  EXPECT_DOUBLE_EQ(p.kappa, 2.0);
  EXPECT_EQ(p.sensitivity, 2);
  EXPECT_NEAR(p.noise_variance(), 1.8414, 1e-4);
  EXPECT_THROW(PrivacyParams::from_epsilon(0.0), DomainError);
  EXPECT_THROW(PrivacyParams::from_epsilon(-1.0), DomainError);
  EXPECT_THROW(PrivacyParams::from_epsilon(INFINITY), DomainError);
}

TEST(DiscreteLaplace, PmfSumsToOne) {
  for (double lambda : {0.05, 0.5, 0.95}) {
    double s = 0.0;
    for (std::int64_t x = -2000; x <= 2000; ++x) s += discrete_laplace_pmf(x, lambda);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  EXPECT_THROW(discrete_laplace_pmf(0, 1.0), DomainError);
  EXPECT_THROW(discrete_laplace_pmf(0, 0.0), DomainError);
}

class DiscreteLaplaceFit : public ::testing::TestWithParam<double> {};

TEST_P(DiscreteLaplaceFit, ChiSquareAndMoments) {
  const double lambda = GetParam();
  RandomStream rng(1234);
  const int draws = 200000;
  std::map<std::int64_t, double> counts;
  double sum = 0.0, sumsq = 0.0;
  for (int k = 0; k < draws; ++k) {
    const auto x = discrete_laplace_sample(lambda, rng);
    counts[x] += 1;
    sum += static_cast<double>(x);
    sumsq += static_cast<double>(x * x);
  }
  // Bins: each x with expected count >= 5, tails pooled.
  std::int64_t cut = 0;
  while (draws * discrete_laplace_pmf(cut + 1, lambda) >= 5.0) ++cut;
  std::vector<double> obs, expd;
  double tail_p = 1.0, tail = 0.0;
  for (std::int64_t x = -cut; x <= cut; ++x) {
    obs.push_back(counts[x]);
    expd.push_back(draws * discrete_laplace_pmf(x, lambda));
    tail_p -= discrete_laplace_pmf(x, lambda);
  }
  for (const auto& [x, c] : counts)
    if (x < -cut || x > cut) tail += c;
  obs.push_back(tail);
  expd.push_back(draws * tail_p);
  const auto chi = stats::chi_square_test(obs, expd);
  EXPECT_GT(chi.p_value, 1e-3) << "chi2 = " << chi.statistic << " dof = " << chi.dof;

  const double mean = sum / draws;
  const double var = sumsq / draws - mean * mean;
  const double target = 2 * lambda / ((1 - lambda) * (1 - lambda));
  EXPECT_NEAR(mean, 0.0, 5.0 * std::sqrt(target / draws));
  EXPECT_NEAR(var / target, 1.0, 0.03);
}

INSTANTIATE_TEST_SUITE_P(Lambdas, DiscreteLaplaceFit, ::testing::Values(0.2, std::exp(-1.0), 0.8));

TEST(DiscreteLaplace, TinyLambdaIsZero) {
  RandomStream rng(8);
  for (int k = 0; k < 10000; ++k) EXPECT_EQ(discrete_laplace_sample(1e-300, rng), 0);
  EXPECT_THROW(discrete_laplace_sample(1.0, rng), DomainError);
}

TEST(Privatize, HugeEpsilonReturnsDegrees) {
  const BiDegree d{{3, 0, 7, 1}, {2, 5, 1, 3}};
  RandomStream rng(99);
  const auto z = privatize(d, 1e6, rng);
  EXPECT_EQ(z.z_out, d.out_deg);
  EXPECT_EQ(z.z_in, d.in_deg);
}

TEST(Privatize, OutNoiseThenInNoise) {
  const BiDegree d{{10, 20, 30}, {5, 6, 7}};
  RandomStream a(17), b(17);
  const auto z = privatize(d, 1.3, a);
  const double lambda = std::exp(-0.65);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(z.z_out[i], d.out_deg[i] + discrete_laplace_sample(lambda, b));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(z.z_in[i], d.in_deg[i] + discrete_laplace_sample(lambda, b));
  EXPECT_THROW(privatize(d, 0.0, a), DomainError);
}

TEST(DeviationBound, FormulaValues) {
  // sqrt(100 log 100) + 2 sqrt(log 100) = 21.4597 + 4.2919
  EXPECT_NEAR(deviation_bound(100, 2.0), 25.7516, 1e-4);
  // kappa = 8.6859: 21.4597 + 18.6396
  EXPECT_NEAR(deviation_bound(100, std::log(100.0) / 10.0), 40.0993, 1e-4);
  EXPECT_NEAR(deviation_bound(100, INFINITY), std::sqrt(100 * std::log(100.0)), 1e-12);
  EXPECT_THROW(deviation_bound(1, 1.0), DomainError);
}

TEST(NoisyJson, RoundTrip) {
  NoisyBiDegree z{{1, -2, 3}, {0, 4, 5}, PrivacyParams::from_epsilon(0.5), 77};
  const auto back = noisy_bidegree_from_json(to_json(z));
  EXPECT_EQ(back.z_out, z.z_out);
  EXPECT_EQ(back.z_in, z.z_in);
  EXPECT_DOUBLE_EQ(back.params.epsilon, 0.5);
  EXPECT_EQ(back.seed, std::optional<std::uint64_t>(77));
  EXPECT_THROW(noisy_bidegree_from_json(nlohmann::json::parse(R"({"n":2,"z_out":[1],"z_in":[1,2],"epsilon":1})")),
               ParseError);
  EXPECT_THROW(noisy_bidegree_from_json(nlohmann::json::parse(R"({"n":2})")), ParseError);
}

TEST(Stats, KolmogorovAndKs) {
  EXPECT_NEAR(stats::kolmogorov_sf(1.3580986393225505), 0.05, 1e-6);
  EXPECT_NEAR(stats::kolmogorov_sf(1.6276236115189502), 0.01, 1e-6);
  RandomStream rng(4);
  std::vector<double> u(5000);
  for (auto& v : u) v = rng.uniform();
  EXPECT_GT(stats::ks_test(u, [](double x) { return std::clamp(x, 0.0, 1.0); }).p_value, 0.001);
  for (auto& v : u) v = v * v;
  EXPECT_LT(stats::ks_test(u, [](double x) { return std::clamp(x, 0.0, 1.0); }).p_value, 1e-6);
}
