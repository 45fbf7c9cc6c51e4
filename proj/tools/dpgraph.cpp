// dpgraph: private bi-degree release, moment estimation and coverage studies.
//
// Exit codes: 0 success, 1 I/O or input error, 2 estimate does not exist,
// 3 numerical failure, 64 usage error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#ifdef DPGRAPH_SYSTEM_CLI11
#include <CLI/CLI.hpp>
#else
#include "CLI11.hpp"
#endif
#include "dpgraph/dpgraph.hpp"

namespace {

enum ExitCode : int {
  kOk = 0,
  kInputError = 1,
  kNonExistent = 2,
  kNumericalFailure = 3,
  kUsage = 64,
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

bool looks_like_json(const std::string& text) {
  const auto p = text.find_first_not_of(" \t\r\n");
  return p != std::string::npos && text[p] == '{';
}

std::vector<dpgraph::IndexPair> parse_pairs(const std::vector<std::string>& specs) {
  std::vector<dpgraph::IndexPair> out;
  for (const std::string& s : specs) {
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ';')) {
      const auto comma = item.find(',');
      if (comma == std::string::npos) throw UsageError("pair '" + item + "' must look like i,j");
      try {
        out.push_back({std::stoul(item.substr(0, comma)), std::stoul(item.substr(comma + 1))});
      } catch (const std::exception&) {
        throw UsageError("pair '" + item + "' must look like i,j");
      }
    }
  }
  return out;
}

std::vector<dpgraph::StatKind> parse_kinds(const std::string& spec) {
  std::vector<dpgraph::StatKind> out;
  std::stringstream ss(spec);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(dpgraph::parse_stat_kind(item));
  return out;
}

unsigned threads_from_env() {
  const char* v = std::getenv("DPGRAPH_THREADS");
  if (!v || !*v) return 0;
  try {
    return static_cast<unsigned>(std::stoul(v));
  } catch (const std::exception&) {
    throw UsageError(std::string("DPGRAPH_THREADS must be a non-negative integer, got '") + v + "'");
  }
}

// ---- privatize --------------------------------------------------------------

struct PrivatizeArgs {
  std::string input, output = "-";
  double epsilon = 0.0;
  std::uint64_t seed = 0;
};

int cmd_privatize(const PrivatizeArgs& a) {
  if (!(a.epsilon > 0.0)) throw UsageError("--epsilon must be > 0");
  dpgraph::EdgeListStats st;
  const auto g = dpgraph::parse_edge_list(read_file(a.input), &st);
  dpgraph::RandomStream rng(a.seed);
  auto z = dpgraph::privatize(dpgraph::degrees(g), a.epsilon, rng);
  z.seed = a.seed;
  write_file(a.output, dpgraph::to_json(z).dump(2) + "\n");
  std::cerr << "n=" << g.size() << " edges=" << g.edge_count() << " epsilon=" << a.epsilon
            << " lambda=" << z.params.lambda;
  if (st.duplicates) std::cerr << " duplicates_collapsed=" << st.duplicates;
  std::cerr << '\n';
  return kOk;
}

// ---- estimate ---------------------------------------------------------------

struct EstimateArgs {
  std::string input, output = "-", model = "probit", variance = "diagonal";
  bool raw = false, priv = false;
};

int cmd_estimate(const EstimateArgs& a) {
  if (!dpgraph::is_known_model(a.model)) throw UsageError("unknown --model '" + a.model + "' (allowed: probit, logit)");
  const std::string text = read_file(a.input);

  dpgraph::DegreeTargets targets;
  std::optional<dpgraph::PrivacyParams> privacy;
  if (looks_like_json(text)) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
      const auto n = j.at("n").get<std::size_t>();
      targets.out = j.at("z_out").get<std::vector<double>>();
      targets.in = j.at("z_in").get<std::vector<double>>();
      if (n < 2 || targets.out.size() != n || targets.in.size() != n)
        throw dpgraph::ParseError(0, "z_out/z_in must both have length n >= 2");
    } catch (const nlohmann::json::exception& e) {
      throw dpgraph::ParseError(0, std::string("bad degree JSON: ") + e.what());
    }
    const bool has_eps = j.contains("epsilon") && !j["epsilon"].is_null();
    if (a.priv && !has_eps) throw UsageError("--private needs \"epsilon\" in the input JSON");
    if (has_eps && !a.raw) privacy = dpgraph::PrivacyParams::from_epsilon(j["epsilon"].get<double>());
  } else {
    if (a.priv) throw UsageError("--private needs a degree JSON input, not an edge list");
    targets = dpgraph::DegreeTargets::from(dpgraph::degrees(dpgraph::parse_edge_list(text)));
  }

  const auto fit = dpgraph::with_model(a.model, [&](const auto& model) {
    return dpgraph::fit_degrees(targets, model, privacy);
  });
  auto j = dpgraph::to_json(fit);
  if (a.variance == "shared" && fit.exists) {
    std::vector<double> sa, sb;
    const double extra = fit.shared_var + fit.privacy_var;
    for (std::size_t k = 0; k < fit.n(); ++k) sa.push_back(std::sqrt(fit.var_diag[k] + extra));
    for (std::size_t k = fit.n(); k < 2 * fit.n() - 1; ++k) sb.push_back(std::sqrt(fit.var_diag[k] + extra));
    sb.push_back(0.0);
    j["se_alpha"] = sa;
    j["se_beta"] = sb;
  }
  write_file(a.output, j.dump(2) + "\n");
  if (!fit.exists) {
    std::cerr << "estimate does not exist: " << dpgraph::to_string(fit.reason) << '\n';
    return kNonExistent;
  }
  std::cerr << "n=" << fit.n() << " iterations=" << fit.iterations << " residual=" << fit.residual_norm << '\n';
  return kOk;
}

// ---- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::size_t n = 100;
  std::string L = "zero", eps = "fixed:2", model = "probit", stats = "xi", variance = "diagonal";
  std::size_t reps = 1000;
  std::uint64_t seed = 0;
  std::vector<std::string> pairs;
  bool full_study_reps = false;
  std::string output = "-", dump_stats;
};

int cmd_simulate(const SimulateArgs& a) {
  dpgraph::ExperimentConfig cfg;
  try {
    cfg.n = a.n;
    cfg.L = dpgraph::parse_lspec(a.L);
    cfg.eps = dpgraph::parse_eps_spec(a.eps);
    cfg.reps = a.full_study_reps ? dpgraph::full_study_reps : a.reps;
    cfg.seed = a.seed;
    cfg.pairs = parse_pairs(a.pairs);
    cfg.model = a.model;
    cfg.stat_kinds = parse_kinds(a.stats);
    if (a.variance != "diagonal" && a.variance != "shared")
      throw UsageError("unknown --variance '" + a.variance + "' (allowed: diagonal, shared)");
    cfg.variance_mode = a.variance == "shared" ? dpgraph::VarianceMode::with_shared : dpgraph::VarianceMode::diagonal;
    cfg.threads = threads_from_env();
    cfg.validate();
  } catch (const dpgraph::DomainError& e) {
    throw UsageError(e.what());
  } catch (const dpgraph::ContractError& e) {
    throw UsageError(e.what());
  }

  const auto result = dpgraph::run_experiment(cfg);
  std::ostringstream csv;
  dpgraph::write_coverage_csv(csv, result.report);
  write_file(a.output, csv.str());
  if (!a.dump_stats.empty()) {
    std::ostringstream dump;
    dpgraph::write_stats_dump(dump, result.stats);
    write_file(a.dump_stats, dump.str());
  }
  std::cerr << "reps=" << cfg.reps << " epsilon=" << result.report.epsilon
            << " nonexist_freq=" << result.report.nonexist_freq
            << " deviation_bound_held=" << result.report.deviation_ok_freq
            << " runtime_s=" << result.report.runtime_seconds << '\n';
  return kOk;
}

// ---- qq ---------------------------------------------------------------------

struct QqArgs {
  std::string input, output = "-", pair, stat;
};

int cmd_qq(const QqArgs& a) {
  std::istringstream in(read_file(a.input));
  auto series = dpgraph::read_stats_dump(in);

  if (!a.pair.empty() || !a.stat.empty()) {
    std::optional<dpgraph::IndexPair> want_pair;
    if (!a.pair.empty()) want_pair = parse_pairs({a.pair}).at(0);
    std::optional<dpgraph::StatKind> want_kind;
    if (!a.stat.empty()) want_kind = dpgraph::parse_stat_kind(a.stat);
    std::erase_if(series, [&](const dpgraph::StatSeries& s) {
      return (want_pair && !(s.pair == *want_pair)) || (want_kind && s.kind != *want_kind);
    });
  }
  if (series.empty()) throw dpgraph::ContractError("no statistics in '" + a.input + "'");
  if (series.size() > 1) {
    std::string names;
    for (const auto& s : series)
      names += " " + std::to_string(s.pair.i) + "," + std::to_string(s.pair.j) + ":" +
               std::string(dpgraph::to_string(s.kind));
    throw UsageError("dump holds several series; select one with --pair/--stat:" + names);
  }
  std::ostringstream out;
  dpgraph::write_qq_csv(out, dpgraph::qq_export(series.front().values));
  write_file(a.output, out.str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edge-differentially-private bi-degree release and node-parameter estimation"};
  app.require_subcommand(1);

  PrivatizeArgs pa;
  auto* priv = app.add_subcommand("privatize", "Release a noisy bi-degree sequence of an edge list");
  priv->add_option("input", pa.input, "Edge list: '<src> <dst>' per line, 1-based ids, '#' comments, optional 'n=<count>' first line")
      ->required();
  priv->add_option("-e,--epsilon", pa.epsilon, "Privacy budget (> 0); noise is discrete Laplace with lambda = exp(-epsilon/2)")
      ->required();
  priv->add_option("-s,--seed", pa.seed, "RNG seed");
  priv->add_option("-o,--output", pa.output, "Output JSON {n, epsilon, z_out, z_in, seed} ('-' = stdout)");

  EstimateArgs ea;
  auto* est = app.add_subcommand("estimate", "Fit node parameters to (noisy) degrees by moment equations");
  est->add_option("input", ea.input, "Degree JSON {n, z_out, z_in, epsilon?} or an edge list")->required();
  est->add_option("-m,--model", ea.model, "Edge-mean model: probit | logit");
  est->add_option("-o,--output", ea.output,
                  "Output JSON {n, model, epsilon, alpha, beta (beta_n = 0), se_alpha, se_beta, converged, exists, "
                  "iterations, residual_norm}; se_k = sqrt(u_kk / v_kk^2)");
  auto* raw_flag = est->add_flag("--raw", ea.raw, "Ignore epsilon in the input; no privacy variance term");
  est->add_flag("--private", ea.priv, "Require epsilon in the input JSON")->excludes(raw_flag);
  est->add_option("--variance", ea.variance, "Standard errors: diagonal | shared (adds the common variance term)");

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Monte-Carlo coverage study on the linear parameter design");
  sim->add_option("--n", sa.n, "Node count (>= 4)");
  sim->add_option("--L", sa.L, "Design slope: zero | loglogn | sqrtlogn");
  sim->add_option("--eps", sa.eps, "Privacy schedule: fixed:<v> | logn_n14 | logn_n12");
  sim->add_option("--reps", sa.reps, "Replications");
  sim->add_flag("--full-paper-reps", sa.full_study_reps, "Run 10000 replications");
  sim->add_option("--seed", sa.seed, "Master seed; replication r uses splitmix64(seed ^ splitmix64(r))");
  sim->add_option("--pairs", sa.pairs, "Node pairs 'i,j' (repeatable or ';'-separated); default (1,2) (n/2,n/2+1) (n-1,n)");
  sim->add_option("--stats", sa.stats, "Comma-separated statistics: xi,zeta,eta");
  sim->add_option("--model", sa.model, "Edge-mean model: probit | logit");
  sim->add_option("--variance", sa.variance, "Standardization: diagonal | shared");
  sim->add_option("-o,--output", sa.output,
                  "Coverage CSV: n,L_spec,eps_spec,pair_i,pair_j,stat_kind,coverage,ci_length_full,ci_length_half,"
                  "nonexist_freq,reps");
  sim->add_option("--dump-stats", sa.dump_stats, "Write standardized statistics CSV: rep,pair_i,pair_j,stat_kind,value");
  sim->footer("DPGRAPH_THREADS caps worker threads (0 or unset = all cores).");

  QqArgs qa;
  auto* qq = app.add_subcommand("qq", "QQ table of a statistics dump against N(0,1)");
  qq->add_option("input", qa.input, "File from 'simulate --dump-stats' (or one number per line)")->required();
  qq->add_option("-o,--output", qa.output, "Output CSV: rank,empirical,theoretical");
  qq->add_option("--pair", qa.pair, "Select pair 'i,j' from the dump");
  qq->add_option("--stat", qa.stat, "Select statistic xi | zeta | eta");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*priv) return cmd_privatize(pa);
    if (*est) return cmd_estimate(ea);
    if (*sim) return cmd_simulate(sa);
    if (*qq) return cmd_qq(qa);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const dpgraph::NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const dpgraph::ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kUsage;
}
