#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "dpgraph/simulation.hpp"
#include "dpgraph/stats.hpp"

using namespace dpgraph;

namespace {

std::string csv_of(const ExperimentResult& r) {
  std::ostringstream os;
  write_coverage_csv(os, r.report);
  write_stats_dump(os, r.stats);
  return os.str();
}

ExperimentConfig small_config(std::size_t n, LSpec L, EpsSpec eps, std::size_t reps) {
  ExperimentConfig cfg;
  cfg.n = n;
  cfg.L = L;
  cfg.eps = eps;
  cfg.reps = reps;
  cfg.seed = 2024;
  cfg.pairs = {{1, 2}};
  return cfg;
}

}  // namespace

TEST(Design, TrueParameters) {
  const auto zero = make_true_params(100, LSpec::zero);
  EXPECT_EQ(zero.max_abs(), 0.0);
  const auto ll = make_true_params(100, LSpec::loglogn);
  EXPECT_NEAR(ll.alpha(0), 1.52718, 1e-5);
  EXPECT_EQ(ll.alpha(99), 0.0);
  EXPECT_EQ(ll.beta(0), ll.alpha(0));
  EXPECT_EQ(ll.beta(99), 0.0);
  EXPECT_NEAR(make_true_params(100, LSpec::sqrtlogn).alpha(0), 2.14597, 1e-5);
  EXPECT_THROW(parse_lspec("loglog"), DomainError);
}

TEST(Design, EpsilonSchedules) {
  EXPECT_NEAR(parse_eps_spec("logn_n12").evaluate(100), 0.46052, 1e-5);
  EXPECT_NEAR(parse_eps_spec("logn_over_n14").evaluate(100), std::log(100.0) / std::pow(100.0, 0.25), 1e-12);
  EXPECT_EQ(parse_eps_spec("fixed:2").evaluate(7), 2.0);
  EXPECT_EQ(parse_eps_spec("fixed:0.5").token(), "fixed:0.5");
  EXPECT_EQ(parse_eps_spec("logn_n14").token(), "logn_n14");
  for (const char* bad : {"fixed:", "fixed:-1", "fixed:abc", "logn", "2"}) EXPECT_THROW(parse_eps_spec(bad), DomainError) << bad;
}

TEST(Config, Validation) {
  ExperimentConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.n = 3;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = {};
  cfg.model = "cloglog";
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = {};
  cfg.stat_kinds = {StatKind::eta};  // default pair (n-1, n) has no free beta_n
  EXPECT_THROW(cfg.validate(), ContractError);
  cfg.pairs = {{1, 2}};
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(default_pairs(100), (std::vector<IndexPair>{{1, 2}, {50, 51}, {99, 100}}));
}

TEST(Replication, DeterministicAndExists) {
  ExperimentConfig cfg = small_config(100, LSpec::zero, EpsSpec::fixed(2.0), 1);
  const auto a = run_replication(cfg, 0);
  const auto b = run_replication(cfg, 0);
  EXPECT_TRUE(a.fit.exists);
  EXPECT_EQ(a.fit.theta_hat, b.fit.theta_hat);
  EXPECT_EQ(a.max_deviation, b.max_deviation);
  EXPECT_NE(run_replication(cfg, 1).fit.theta_hat, a.fit.theta_hat);

  cfg.eps = parse_eps_spec("logn_n12");
  EXPECT_NEAR(run_replication(cfg, 0).epsilon, 0.46052, 1e-5);
}

TEST(Experiment, SingleRepMatchesRecord) {
  const auto cfg = small_config(40, LSpec::zero, EpsSpec::fixed(2.0), 1);
  const auto res = run_experiment(cfg, true);
  const auto& rec = run_replication(cfg, 0);
  ASSERT_EQ(res.report.rows.size(), 1u);
  const auto& row = res.report.rows[0];
  EXPECT_EQ(row.nonexist_freq, rec.fit.exists ? 0.0 : 1.0);
  if (rec.fit.exists) {
    EXPECT_EQ(row.coverage, rec.outcomes[0].covered ? 1.0 : 0.0);
    EXPECT_EQ(row.ci_length_full, rec.outcomes[0].ci_length);
    EXPECT_EQ(row.ci_length_half, rec.outcomes[0].ci_length / 2);
    EXPECT_EQ(res.stats[0].values, std::vector<double>{rec.outcomes[0].value});
  }
  EXPECT_EQ(res.report.deviation_ok_freq, rec.deviation_ok ? 1.0 : 0.0);
  ASSERT_EQ(res.records.size(), 1u);
}

TEST(Experiment, IndependentOfWorkerCount) {
  auto cfg = small_config(30, LSpec::loglogn, EpsSpec::fixed(1.0), 40);
  cfg.stat_kinds = {StatKind::xi, StatKind::zeta, StatKind::eta};
  cfg.threads = 1;
  const auto serial = csv_of(run_experiment(cfg));
  cfg.threads = 4;
  EXPECT_EQ(csv_of(run_experiment(cfg)), serial);
  cfg.threads = 3;
  EXPECT_EQ(csv_of(run_experiment(cfg)), serial);
}

TEST(Experiment, LZeroInvariants) {
  const auto fixed2 = EpsSpec::fixed(2.0);
  const auto strong = parse_eps_spec("logn_n12");

  const auto c100 = run_experiment(small_config(100, LSpec::zero, fixed2, 300)).report;
  const auto c200 = run_experiment(small_config(200, LSpec::zero, fixed2, 300)).report;
  EXPECT_EQ(c200.nonexist_freq, 0.0);
  EXPECT_LT(c200.rows[0].ci_length_full, c100.rows[0].ci_length_full);

  const auto s100 = run_experiment(small_config(100, LSpec::zero, strong, 300)).report;
  const auto s200 = run_experiment(small_config(200, LSpec::zero, strong, 300)).report;
  EXPECT_LT(s200.rows[0].ci_length_full, s100.rows[0].ci_length_full);

  EXPECT_GE(c100.rows[0].coverage, s100.rows[0].coverage - 0.02);
}

TEST(QQ, ThreePointFixture) {
  const auto q = qq_export({1.0, -1.0, 0.0});
  ASSERT_EQ(q.size(), 3u);
  EXPECT_NEAR(q[0].theoretical, -0.96742, 1e-5);
  EXPECT_NEAR(q[1].theoretical, 0.0, 1e-15);
  EXPECT_NEAR(q[2].theoretical, 0.96742, 1e-5);
  EXPECT_EQ(q[0].empirical, -1.0);
  EXPECT_EQ(q[2].rank, 3u);
  EXPECT_THROW(qq_export({1.0}), ContractError);
  EXPECT_THROW(qq_export({1.0, NAN}), ContractError);
}

TEST(QQ, NormalSampleHugsDiagonal) {
  RandomStream rng(31);
  std::vector<double> v(10000);
  for (auto& x : v) x = normal_quantile(rng.uniform_pos() * (1 - 1e-12));
  double worst = 0.0;
  for (const auto& p : qq_export(v))
    if (std::abs(p.theoretical) < 2.5) worst = std::max(worst, std::abs(p.empirical - p.theoretical));
  EXPECT_LT(worst, 0.1);
  EXPECT_GT(stats::ks_test_normal(v).p_value, 0.001);
}

TEST(Formats, CoverageCsv) {
  const auto res = run_experiment(small_config(20, LSpec::zero, EpsSpec::fixed(2.0), 5));
  std::ostringstream os;
  write_coverage_csv(os, res.report);
  std::istringstream is(os.str());
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  EXPECT_EQ(header, coverage_csv_header);
  EXPECT_EQ(row.rfind("20,zero,fixed:2,1,2,xi,", 0), 0u) << row;
  EXPECT_EQ(row.substr(row.rfind(',') + 1), "5");
  EXPECT_EQ(format_double(NAN), "nan");
  EXPECT_EQ(format_double(0.1), "0.1");
}

TEST(Formats, StatsDumpRoundTrip) {
  auto cfg = small_config(25, LSpec::zero, EpsSpec::fixed(3.0), 12);
  cfg.pairs = {{1, 2}, {3, 4}};
  cfg.stat_kinds = {StatKind::xi, StatKind::zeta};
  const auto res = run_experiment(cfg);
  std::stringstream ss;
  write_stats_dump(ss, res.stats);
  const auto back = read_stats_dump(ss);
  ASSERT_EQ(back.size(), res.stats.size());
  for (std::size_t k = 0; k < back.size(); ++k) {
    EXPECT_EQ(back[k].pair, res.stats[k].pair);
    EXPECT_EQ(back[k].kind, res.stats[k].kind);
    EXPECT_EQ(back[k].values, res.stats[k].values);
    EXPECT_EQ(back[k].rep_index, res.stats[k].rep_index);
  }

  std::istringstream bare("0.5\n-1.25\n\n2\n");
  const auto single = read_stats_dump(bare);
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0].values, (std::vector<double>{0.5, -1.25, 2.0}));

  std::istringstream bad("rep,pair_i,pair_j,stat_kind,value\n0,1,2,xi,1.0\n1,1,2,rho,2.0\n");
  try {
    read_stats_dump(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}
