// Acceptance checks. Prints one [PASS]/[FAIL] line per check; a criterion
// with several clauses gets one line per clause. Exit status is the number of
// failed lines (capped at 1).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "dpgraph/dpgraph.hpp"
#include "dpgraph/stats.hpp"

using namespace dpgraph;

namespace {

constexpr std::uint64_t kSeed = 20261018;

int failures = 0;

void report(const std::string& id, bool ok, const std::string& detail) {
  std::printf("[%s] %s: %s\n", ok ? "PASS" : "FAIL", id.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += !ok;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExperimentConfig cell(std::size_t n, LSpec L, EpsSpec eps, std::size_t reps) {
  ExperimentConfig cfg;
  cfg.n = n;
  cfg.L = L;
  cfg.eps = eps;
  cfg.reps = reps;
  cfg.seed = kSeed;
  cfg.pairs = {{1, 2}};
  return cfg;
}

// Expected degrees summed directly from the normal CDF.
DegreeTargets oracle_targets(const ParameterVector& t) {
  const std::size_t n = t.size();
  DegreeTargets z{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) {
        const double p = 0.5 * std::erfc(-(t.alpha(i) + t.beta(j)) / std::sqrt(2.0));
        z.out[i] += p;
        z.in[j] += p;
      }
  return z;
}

void oracle_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(kSeed);
  std::uniform_real_distribution<double> u(-0.75, 0.75);  // |alpha_i + beta_j| <= 1.5
  double worst_err = 0.0;
  int worst_iter = 0;
  bool all_exist = true;
  for (std::size_t n : {10u, 30u, 60u}) {
    std::vector<double> a(n), b(n - 1);
    for (auto& v : a) v = u(gen);
    for (auto& v : b) v = u(gen);
    const ParameterVector theta(a, b);
    const auto fit = newton_solve(oracle_targets(theta), Probit{});
    all_exist = all_exist && fit.exists;
    worst_err = std::max(worst_err, max_abs_diff(fit.theta_hat, theta));
    worst_iter = std::max(worst_iter, fit.iterations);
  }
  const double secs = seconds_since(t0);
  report("1 oracle recovery", all_exist && worst_err <= 1e-8 && worst_iter <= 25 && secs < 5.0,
         fmt("max error %.3g (<= 1e-8), max iterations %d (<= 25), %.2f s (< 5)", worst_err, worst_iter, secs));
}

void discrete_laplace_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  const double lambda = std::exp(-1.0);
  const int draws = 1'000'000;
  RandomStream rng(kSeed);
  std::map<std::int64_t, double> counts;
  double sum = 0.0, sumsq = 0.0;
  for (int k = 0; k < draws; ++k) {
    const auto x = discrete_laplace_sample(lambda, rng);
    counts[x] += 1;
    sum += static_cast<double>(x);
    sumsq += static_cast<double>(x) * static_cast<double>(x);
  }
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
  const double mean = sum / draws;
  const double var = (sumsq - draws * mean * mean) / (draws - 1);
  const double target = 2 * lambda / ((1 - lambda) * (1 - lambda));
  const double rel = std::abs(var / target - 1.0);
  const double secs = seconds_since(t0);
  report("2 discrete Laplace chi-square", chi.p_value > 1e-3,
         fmt("chi2 %.2f on %d dof, p = %.4f (> 0.001)", chi.statistic, chi.dof, chi.p_value));
  report("2 discrete Laplace variance", rel <= 0.01 && secs < 5.0,
         fmt("variance %.5f vs %.5f, rel. diff %.4f (<= 0.01), %.2f s (< 5)", var, target, rel, secs));
}

void anchor_cell() {
  const auto res = run_experiment(cell(100, LSpec::zero, EpsSpec::fixed(2.0), 1000));
  const auto& r = res.report;
  const auto& row = r.rows.at(0);
  const bool fast = r.runtime_seconds <= 300.0;
  report("3 anchor cell coverage", row.coverage >= 0.92 && row.coverage <= 0.96 && fast,
         fmt("coverage %.4f in [0.92, 0.96], %.1f s (<= 300)", row.coverage, r.runtime_seconds));
  report("3 anchor cell non-existence", r.nonexist_freq == 0.0,
         fmt("non-existence %.4f (= 0)", r.nonexist_freq));
  report("3 anchor cell half length", std::abs(row.ci_length_half - 0.349) <= 0.03,
         fmt("half CI length %.4f within 0.03 of 0.349", row.ci_length_half));
}

void privacy_degradation() {
  const auto eps = parse_eps_spec("logn_n12");
  const auto zero = run_experiment(cell(100, LSpec::zero, eps, 1000)).report;
  report("4 strong privacy coverage", zero.rows.at(0).coverage <= 0.85 && zero.runtime_seconds <= 300.0,
         fmt("coverage %.4f (<= 0.85; non-existence %.4f), %.1f s", zero.rows.at(0).coverage, zero.nonexist_freq,
             zero.runtime_seconds));
  const auto steep = run_experiment(cell(100, LSpec::sqrtlogn, eps, 1000)).report;
  report("4 strong privacy non-existence", steep.nonexist_freq >= 0.70 && steep.runtime_seconds <= 300.0,
         fmt("non-existence %.4f (>= 0.70), %.1f s", steep.nonexist_freq, steep.runtime_seconds));
}

void normality() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto mild = run_experiment(cell(100, LSpec::zero, EpsSpec::fixed(2.0), 2000));
  const auto ks_mild = stats::ks_test_normal(mild.stats.at(0).values);
  const auto strong = run_experiment(cell(100, LSpec::zero, parse_eps_spec("logn_n12"), 2000));
  const auto ks_strong = stats::ks_test_normal(strong.stats.at(0).values);
  const double secs = seconds_since(t0);
  report("5 normality at epsilon = 2", ks_mild.p_value > 0.01 && secs <= 600.0,
         fmt("KS D = %.4f on %zu values, p = %.4g (> 0.01)", ks_mild.statistic, mild.stats.at(0).values.size(),
             ks_mild.p_value));
  report("5 non-normality at epsilon = log n / sqrt n", ks_strong.p_value < 0.01 && secs <= 600.0,
         fmt("KS D = %.4f on %zu values, p = %.4g (< 0.01), %.1f s total", ks_strong.statistic,
             strong.stats.at(0).values.size(), ks_strong.p_value, secs));
}

void deviation_bound_check() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = 100, reps = 1000;
  const ParameterVector theta(n);
  const auto [eout, ein] = expected_degrees(theta, Probit{});
  const double bound = deviation_bound(n, 2.0);
  std::size_t held = 0;
  double worst = 0.0;
  for (std::size_t r = 0; r < reps; ++r) {
    RandomStream rng(derive_stream_seed(kSeed, r));
    const auto z = privatize(degrees(sample_graph(theta, Probit{}, rng)), 2.0, rng);
    const double dev = max_deviation(z, eout, ein);
    worst = std::max(worst, dev);
    held += dev <= bound;
  }
  const double frac = static_cast<double>(held) / static_cast<double>(reps);
  const double secs = seconds_since(t0);
  report("6 deviation bound", frac >= 0.99 && secs < 60.0,
         fmt("held in %.4f of releases (>= 0.99), bound %.3f, worst %.3f, %.2f s", frac, bound, worst, secs));
}

void s_decay() {
  const auto t0 = std::chrono::steady_clock::now();
  double err[3];
  const std::size_t ns[3] = {20, 40, 80};
  for (int k = 0; k < 3; ++k) err[k] = s_approx_error(jacobian(ParameterVector(ns[k]), Probit{}));
  const double r1 = err[1] / err[0], r2 = err[2] / err[1];
  const double secs = seconds_since(t0);
  const auto in = [](double r) { return r >= 0.125 && r <= 0.5; };
  report("7 S-approximation decay", in(r1) && in(r2) && secs < 10.0,
         fmt("errors %.4g, %.4g, %.4g; ratios %.4f, %.4f in [1/8, 1/2], %.2f s", err[0], err[1], err[2], r1, r2, secs));
}

void consistency_scaling() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto small = run_experiment(cell(100, LSpec::zero, EpsSpec::fixed(2.0), 50));
  const auto large = run_experiment(cell(400, LSpec::zero, EpsSpec::fixed(2.0), 50));
  const double m100 = stats::median(small.theta_errors);
  const double m400 = stats::median(large.theta_errors);
  const double ratio = m100 / m400;
  const double secs = seconds_since(t0);
  report("8 consistency scaling", ratio >= 1.5 && ratio <= 3.0 && secs <= 300.0,
         fmt("median error %.4f (n=100, %zu fits) / %.4f (n=400, %zu fits) = %.3f in [1.5, 3.0], %.1f s", m100,
             small.theta_errors.size(), m400, large.theta_errors.size(), ratio, secs));
}

}  // namespace

int main() {
  std::printf("acceptance checks, seed %llu\n", static_cast<unsigned long long>(kSeed));
  const std::vector<std::function<void()>> checks{oracle_recovery,  discrete_laplace_fidelity, anchor_cell,
                                                  privacy_degradation, normality, deviation_bound_check,
                                                  s_decay, consistency_scaling};
  for (const auto& check : checks) {
    try {
      check();
    } catch (const std::exception& e) {
      report("exception", false, e.what());
    }
  }
  std::printf("%d check(s) failed\n", failures);
  return failures ? 1 : 0;
}
