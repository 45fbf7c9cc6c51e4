#pragma once

// Monte-Carlo harness: linear true-parameter designs, epsilon schedules,
// replication (sample -> privatize -> fit -> test), coverage tables and QQ data.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <istream>
#include <limits>
#include <map>
#include <tuple>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "dpgraph/errors.hpp"
#include "dpgraph/estimator.hpp"
#include "dpgraph/graph.hpp"
#include "dpgraph/model.hpp"
#include "dpgraph/privacy.hpp"
#include "dpgraph/rng.hpp"

namespace dpgraph {

/// Slope of the linear design: alpha*_1 = L down to alpha*_n = 0.
enum class LSpec { zero, loglogn, sqrtlogn };

inline std::string_view to_string(LSpec s) {
  switch (s) {
    case LSpec::zero: return "zero";
    case LSpec::loglogn: return "loglogn";
    case LSpec::sqrtlogn: return "sqrtlogn";
  }
  return "?";
}

inline LSpec parse_lspec(std::string_view s) {
  if (s == "zero" || s == "0") return LSpec::zero;
  if (s == "loglogn") return LSpec::loglogn;
  if (s == "sqrtlogn") return LSpec::sqrtlogn;
  throw DomainError("unknown L spec '" + std::string(s) + "' (allowed: zero, loglogn, sqrtlogn)");
}

inline double evaluate(LSpec s, std::size_t n) {
  const double logn = std::log(static_cast<double>(n));
  switch (s) {
    case LSpec::zero: return 0.0;
    case LSpec::loglogn: return std::log(logn);
    case LSpec::sqrtlogn: return std::sqrt(logn);
  }
  return 0.0;
}

/// Privacy budget as a function of n.
struct EpsSpec {
  enum class Kind { fixed, logn_n14, logn_n12 };
  Kind kind = Kind::fixed;
  double value = 2.0;  // used by fixed only

  static EpsSpec fixed(double v) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("fixed epsilon must be finite and > 0");
    return {Kind::fixed, v};
  }

  /// log(n) / n^{1/4}, log(n) / n^{1/2}, or the fixed value.
  double evaluate(std::size_t n) const {
    const double nn = static_cast<double>(n);
    switch (kind) {
      case Kind::fixed: return value;
      case Kind::logn_n14: return std::log(nn) / std::pow(nn, 0.25);
      case Kind::logn_n12: return std::log(nn) / std::sqrt(nn);
    }
    return value;
  }

  std::string token() const {
    switch (kind) {
      case Kind::logn_n14: return "logn_n14";
      case Kind::logn_n12: return "logn_n12";
      case Kind::fixed: break;
    }
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return "fixed:" + std::string(buf, p);
  }
};

/// Accepts "fixed:<v>", "logn_n14", "logn_n12" (and the long aliases
/// "logn_over_n14", "logn_over_n12").
inline EpsSpec parse_eps_spec(std::string_view s) {
  if (s == "logn_n14" || s == "logn_over_n14") return {EpsSpec::Kind::logn_n14, 0.0};
  if (s == "logn_n12" || s == "logn_over_n12") return {EpsSpec::Kind::logn_n12, 0.0};
  if (s.starts_with("fixed:")) {
    const std::string_view num = s.substr(6);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
    if (ec == std::errc{} && p == num.data() + num.size()) return EpsSpec::fixed(v);
  }
  throw DomainError("unknown epsilon spec '" + std::string(s) + "' (allowed: fixed:<value>, logn_n14, logn_n12)");
}

/// alpha*_{i+1} = (n - 1 - i) L / (n - 1), beta*_i = alpha*_i for i < n, beta*_n = 0.
inline ParameterVector make_true_params(std::size_t n, LSpec spec) {
  if (n < 2) throw DomainError("make_true_params: n must be >= 2");
  const double L = evaluate(spec, n);
  std::vector<double> alpha(n), beta(n);
  for (std::size_t i = 0; i < n; ++i) alpha[i] = static_cast<double>(n - 1 - i) * L / static_cast<double>(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) beta[i] = alpha[i];
  beta[n - 1] = 0.0;
  return ParameterVector(std::move(alpha), std::move(beta));
}

/// (1,2), (n/2, n/2+1), (n-1, n).
inline std::vector<IndexPair> default_pairs(std::size_t n) {
  return {{1, 2}, {n / 2, n / 2 + 1}, {n - 1, n}};
}

struct ExperimentConfig {
  std::size_t n = 100;
  LSpec L = LSpec::zero;
  EpsSpec eps = EpsSpec::fixed(2.0);
  std::size_t reps = 1000;
  std::uint64_t seed = 0;
  std::vector<IndexPair> pairs;  // empty: default_pairs(n)
  std::string model = "probit";
  std::vector<StatKind> stat_kinds{StatKind::xi};
  VarianceMode variance_mode = VarianceMode::diagonal;
  double level = 0.95;
  unsigned threads = 0;  // 0: hardware concurrency
  SolveOptions solve;

  std::vector<IndexPair> effective_pairs() const { return pairs.empty() ? default_pairs(n) : pairs; }

  void validate() const {
    if (n < 4) throw DomainError("experiment needs n >= 4");
    if (reps < 1) throw DomainError("experiment needs reps >= 1");
    if (!is_known_model(model)) throw DomainError("unknown model '" + model + "' (allowed: probit, logit)");
    if (stat_kinds.empty()) throw DomainError("no statistics selected");
    for (const auto& p : effective_pairs())
      for (StatKind k : stat_kinds) validate_pair(n, p, k);
  }
};

inline constexpr std::size_t full_study_reps = 10000;

/// Outcome of one (pair, statistic) inside a replication.
struct StatOutcome {
  IndexPair pair;
  StatKind kind = StatKind::xi;
  double value = std::numeric_limits<double>::quiet_NaN();
  bool covered = false;
  double ci_length = std::numeric_limits<double>::quiet_NaN();
};

struct ReplicationRecord {
  std::size_t rep_index = 0;
  double epsilon = 0.0;
  FitResult fit;
  std::vector<StatOutcome> outcomes;  // empty when the estimate does not exist
  double max_deviation = 0.0;
  double deviation_bound = 0.0;
  bool deviation_ok = false;
  double theta_error = std::numeric_limits<double>::infinity();  // ||theta_hat - theta*||_inf
};

namespace detail {

template <EdgeMeanModel Model>
ReplicationRecord run_replication_with(const ExperimentConfig& cfg, const Model& model,
                                       const ParameterVector& theta_star, std::size_t rep_index) {
  RandomStream rng(derive_stream_seed(cfg.seed, rep_index));
  ReplicationRecord rec;
  rec.rep_index = rep_index;
  rec.epsilon = cfg.eps.evaluate(cfg.n);

  const DirectedGraph g = sample_graph(theta_star, model, rng);
  const NoisyBiDegree z = privatize(degrees(g), rec.epsilon, rng);

  const auto [eout, ein] = expected_degrees(theta_star, model);
  rec.max_deviation = max_deviation(z, eout, ein);
  rec.deviation_bound = deviation_bound(cfg.n, rec.epsilon);
  rec.deviation_ok = rec.max_deviation <= rec.deviation_bound;

  rec.fit = fit_degrees(DegreeTargets::from(z), model, z.params, cfg.solve);
  if (!rec.fit.exists) return rec;
  rec.theta_error = max_abs_diff(rec.fit.theta_hat, theta_star);

  for (StatKind kind : cfg.stat_kinds) {
    for (const IndexPair& p : cfg.effective_pairs()) {
      const IndexPair one[] = {p};
      StatOutcome o{p, kind};
      o.value = standardized_stats(rec.fit, theta_star, one, kind, cfg.variance_mode).front();
      const auto ci = confidence_interval(rec.fit, p, cfg.level, kind, cfg.variance_mode);
      o.covered = ci.covers(true_contrast(theta_star, cfg.n, p, kind));
      o.ci_length = ci.length;
      rec.outcomes.push_back(o);
    }
  }
  return rec;
}

}  // namespace detail

/// Replication `rep_index` of `cfg`, drawn from its own stream
/// derive_stream_seed(cfg.seed, rep_index): graph edges first, then 2n noise draws.
inline ReplicationRecord run_replication(const ExperimentConfig& cfg, std::size_t rep_index) {
  cfg.validate();
  const ParameterVector theta_star = make_true_params(cfg.n, cfg.L);
  return with_model(cfg.model, [&](const auto& model) {
    return detail::run_replication_with(cfg, model, theta_star, rep_index);
  });
}

struct CoverageRow {
  IndexPair pair;
  StatKind kind = StatKind::xi;
  double coverage = 0.0;          // over existing estimates only
  double ci_length_full = 0.0;    // mean full length over existing estimates
  double ci_length_half = 0.0;
  double nonexist_freq = 0.0;
  std::size_t reps_used = 0;      // replications with an existing estimate
  std::size_t reps = 0;
};

struct CoverageReport {
  std::size_t n = 0;
  LSpec L = LSpec::zero;
  EpsSpec eps;
  double epsilon = 0.0;
  std::vector<CoverageRow> rows;
  double nonexist_freq = 0.0;
  double deviation_ok_freq = 0.0;
  double runtime_seconds = 0.0;
};

/// Standardized statistics of one (pair, kind) across existing replications,
/// in replication order.
struct StatSeries {
  IndexPair pair;
  StatKind kind = StatKind::xi;
  std::vector<std::size_t> rep_index;
  std::vector<double> values;
};

struct ExperimentResult {
  CoverageReport report;
  std::vector<StatSeries> stats;
  std::vector<double> theta_errors;  // existing replications only
  std::vector<ReplicationRecord> records;
};

namespace detail {

inline unsigned resolve_threads(unsigned requested, std::size_t tasks) {
  unsigned t = requested ? requested : std::max(1U, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(t, tasks));
}

}  // namespace detail

/// Runs every replication (concurrently when cfg.threads allows) and
/// aggregates in replication order, so the output does not depend on the
/// number of workers.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, bool keep_records = false) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const ParameterVector theta_star = make_true_params(cfg.n, cfg.L);

  std::vector<ReplicationRecord> records(cfg.reps);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    with_model(cfg.model, [&](const auto& model) {
      for (;;) {
        const std::size_t r = next.fetch_add(1);
        if (r >= cfg.reps) return;
        try {
          records[r] = detail::run_replication_with(cfg, model, theta_star, r);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = cfg.reps;
          return;
        }
      }
    });
  };

  const unsigned nthreads = detail::resolve_threads(cfg.threads, cfg.reps);
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(nthreads);
    for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentResult out;
  CoverageReport& rep = out.report;
  rep.n = cfg.n;
  rep.L = cfg.L;
  rep.eps = cfg.eps;
  rep.epsilon = cfg.eps.evaluate(cfg.n);

  std::size_t existing = 0, deviation_ok = 0;
  for (const auto& r : records) {
    existing += r.fit.exists;
    deviation_ok += r.deviation_ok;
    if (r.fit.exists) out.theta_errors.push_back(r.theta_error);
  }
  const double total = static_cast<double>(cfg.reps);
  rep.nonexist_freq = static_cast<double>(cfg.reps - existing) / total;
  rep.deviation_ok_freq = static_cast<double>(deviation_ok) / total;

  const auto pairs = cfg.effective_pairs();
  std::size_t slot = 0;
  for (StatKind kind : cfg.stat_kinds) {
    for (const IndexPair& p : pairs) {
      CoverageRow row{p, kind};
      row.reps = cfg.reps;
      row.reps_used = existing;
      row.nonexist_freq = rep.nonexist_freq;
      StatSeries series{p, kind, {}, {}};
      std::size_t covered = 0;
      double length_sum = 0.0;
      for (const auto& r : records) {
        if (!r.fit.exists) continue;
        const StatOutcome& o = r.outcomes[slot];
        covered += o.covered;
        length_sum += o.ci_length;
        series.rep_index.push_back(r.rep_index);
        series.values.push_back(o.value);
      }
      const double used = static_cast<double>(existing);
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.coverage = existing ? static_cast<double>(covered) / used : nan;
      row.ci_length_full = existing ? length_sum / used : nan;
      row.ci_length_half = row.ci_length_full / 2.0;
      rep.rows.push_back(row);
      out.stats.push_back(std::move(series));
      ++slot;
    }
  }
  if (keep_records) out.records = std::move(records);
  rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

struct QQPoint {
  std::size_t rank = 0;  // 1-based
  double empirical = 0.0;
  double theoretical = 0.0;
};

/// Sorted values against Phi^{-1}((k - 0.5) / R).
inline std::vector<QQPoint> qq_export(std::vector<double> values) {
  if (values.size() < 2) throw ContractError("qq_export: need at least 2 values");
  for (double v : values)
    if (!std::isfinite(v)) throw ContractError("qq_export: non-finite value");
  std::sort(values.begin(), values.end());
  const double R = static_cast<double>(values.size());
  std::vector<QQPoint> out(values.size());
  for (std::size_t k = 0; k < values.size(); ++k)
    out[k] = {k + 1, values[k], normal_quantile((static_cast<double>(k) + 0.5) / R)};
  return out;
}

// ---- text formats ---------------------------------------------------------

/// Shortest round-trip representation; "nan" for NaN, "0" for either zero.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (v == 0.0) return "0";
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

inline constexpr std::string_view coverage_csv_header =
    "n,L_spec,eps_spec,pair_i,pair_j,stat_kind,coverage,ci_length_full,ci_length_half,nonexist_freq,reps";

inline void write_coverage_csv(std::ostream& os, const CoverageReport& r, bool header = true) {
  if (header) os << coverage_csv_header << '\n';
  for (const auto& row : r.rows) {
    os << r.n << ',' << to_string(r.L) << ',' << r.eps.token() << ',' << row.pair.i << ',' << row.pair.j << ','
       << to_string(row.kind) << ',' << format_double(row.coverage) << ',' << format_double(row.ci_length_full)
       << ',' << format_double(row.ci_length_half) << ',' << format_double(row.nonexist_freq) << ',' << row.reps
       << '\n';
  }
}

inline constexpr std::string_view stats_dump_header = "rep,pair_i,pair_j,stat_kind,value";

inline void write_stats_dump(std::ostream& os, const std::vector<StatSeries>& stats) {
  os << stats_dump_header << '\n';
  for (const auto& s : stats)
    for (std::size_t k = 0; k < s.values.size(); ++k)
      os << s.rep_index[k] << ',' << s.pair.i << ',' << s.pair.j << ',' << to_string(s.kind) << ','
         << format_double(s.values[k]) << '\n';
}

/// Reads a stats dump back into series keyed by (pair, kind), in file order.
/// A file of bare numbers (one per line) is read as a single unnamed series.
inline std::vector<StatSeries> read_stats_dump(std::istream& is) {
  std::vector<StatSeries> out;
  std::map<std::tuple<std::size_t, std::size_t, int>, std::size_t> index;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#' || line == stats_dump_header) continue;

    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);

    auto num = [&](const std::string& s) {
      double v = 0.0;
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || p != s.data() + s.size()) throw ParseError(lineno, "bad number '" + s + "'");
      return v;
    };
    auto count = [&](const std::string& s) {
      std::uint64_t v = 0;
      if (!detail::parse_u64(s, v)) throw ParseError(lineno, "bad integer '" + s + "'");
      return static_cast<std::size_t>(v);
    };

    if (cols.size() == 1) {
      if (out.empty()) out.push_back({});
      out.front().rep_index.push_back(out.front().values.size());
      out.front().values.push_back(num(cols[0]));
      continue;
    }
    if (cols.size() != 5) throw ParseError(lineno, "expected 5 columns: " + std::string(stats_dump_header));
    StatKind kind{};
    try {
      kind = parse_stat_kind(cols[3]);
    } catch (const DomainError& e) {
      throw ParseError(lineno, e.what());
    }
    const IndexPair pair{count(cols[1]), count(cols[2])};
    const auto key = std::make_tuple(pair.i, pair.j, static_cast<int>(kind));
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      out.push_back({pair, kind, {}, {}});
    }
    out[it->second].rep_index.push_back(count(cols[0]));
    out[it->second].values.push_back(num(cols[4]));
  }
  return out;
}

inline void write_qq_csv(std::ostream& os, const std::vector<QQPoint>& pts) {
  os << "rank,empirical,theoretical\n";
  for (const auto& p : pts) os << p.rank << ',' << format_double(p.empirical) << ',' << format_double(p.theoretical) << '\n';
}

}  // namespace dpgraph
