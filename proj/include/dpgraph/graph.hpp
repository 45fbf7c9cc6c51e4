#pragma once

// Directed simple graphs, bi-degree sequences, node parameters, model-based
// sampling and the plain-text edge-list format.
//
// Nodes are 0-based in memory and 1-based in files.

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dpgraph/errors.hpp"
#include "dpgraph/model.hpp"
#include "dpgraph/rng.hpp"

namespace dpgraph {

/// Dense directed graph without self-loops, rows bit-packed. Immutable once
/// built; use DirectedGraph::Builder to construct one.
class DirectedGraph {
 public:
  class Builder;

  std::size_t size() const noexcept { return n_; }
  std::size_t edge_count() const noexcept { return edges_; }

  bool has_edge(std::size_t i, std::size_t j) const noexcept {
    return (bits_[i * words_ + j / 64] >> (j % 64)) & 1U;
  }

  std::size_t out_degree(std::size_t i) const noexcept {
    std::size_t d = 0;
    for (std::size_t w = 0; w < words_; ++w) d += static_cast<std::size_t>(std::popcount(bits_[i * words_ + w]));
    return d;
  }

  /// (src, dst) pairs in row-major order, 0-based.
  std::vector<std::pair<std::size_t, std::size_t>> edges() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    out.reserve(edges_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j)
        if (has_edge(i, j)) out.emplace_back(i, j);
    return out;
  }

  friend bool operator==(const DirectedGraph&, const DirectedGraph&) = default;

 private:
  explicit DirectedGraph(std::size_t n) : n_(n), words_((n + 63) / 64), bits_(n * words_, 0) {}

  std::size_t n_;
  std::size_t words_;
  std::vector<std::uint64_t> bits_;
  std::size_t edges_ = 0;
};

class DirectedGraph::Builder {
 public:
  explicit Builder(std::size_t n) : g_(n) {
    if (n < 2) throw DomainError("graph needs at least 2 nodes");
  }

  std::size_t size() const noexcept { return g_.n_; }

  /// Adds i -> j. Returns false if the edge was already present.
  bool add_edge(std::size_t i, std::size_t j) {
    if (i >= g_.n_ || j >= g_.n_) throw ContractError("edge endpoint out of range");
    if (i == j) throw DomainError("self-loop on node " + std::to_string(i + 1));
    std::uint64_t& word = g_.bits_[i * g_.words_ + j / 64];
    const std::uint64_t mask = std::uint64_t{1} << (j % 64);
    if (word & mask) return false;
    word |= mask;
    ++g_.edges_;
    return true;
  }

  DirectedGraph build() && { return std::move(g_); }

 private:
  DirectedGraph g_;
};

struct BiDegree {
  std::vector<std::int64_t> out_deg;  // d+
  std::vector<std::int64_t> in_deg;   // d-

  std::size_t size() const noexcept { return out_deg.size(); }
};

/// Node parameters (alpha_1..alpha_n, beta_1..beta_n) with beta_n pinned to 0.
/// The free coordinates, in solver order, are alpha_1..alpha_n, beta_1..beta_{n-1}.
class ParameterVector {
 public:
  ParameterVector() = default;
  explicit ParameterVector(std::size_t n) : alpha_(n, 0.0), beta_(n, 0.0) {}

  /// beta must have length n (its last entry must be 0) or n - 1.
  ParameterVector(std::vector<double> alpha, std::vector<double> beta)
      : alpha_(std::move(alpha)), beta_(std::move(beta)) {
    if (beta_.size() + 1 == alpha_.size()) beta_.push_back(0.0);
    if (beta_.size() != alpha_.size()) throw ContractError("alpha and beta lengths differ");
    if (beta_.empty()) return;
    if (beta_.back() != 0.0) throw ContractError("beta_n must be 0");
    for (double v : alpha_) detail::require_finite(v, "ParameterVector");
    for (double v : beta_) detail::require_finite(v, "ParameterVector");
  }

  /// From the 2n-1 free coordinates.
  static ParameterVector from_free(std::span<const double> free, std::size_t n) {
    if (free.size() != 2 * n - 1) throw ContractError("free vector must have length 2n-1");
    ParameterVector p(n);
    std::copy_n(free.begin(), n, p.alpha_.begin());
    std::copy_n(free.begin() + static_cast<std::ptrdiff_t>(n), n - 1, p.beta_.begin());
    return p;
  }

  std::size_t size() const noexcept { return alpha_.size(); }
  std::span<const double> alpha() const noexcept { return alpha_; }
  std::span<const double> beta() const noexcept { return beta_; }
  double alpha(std::size_t i) const { return alpha_[i]; }
  double beta(std::size_t j) const { return beta_[j]; }

  /// Free coordinate k in [0, 2n-1).
  double free(std::size_t k) const { return k < size() ? alpha_[k] : beta_[k - size()]; }

  std::vector<double> free_vector() const {
    std::vector<double> v(alpha_);
    v.insert(v.end(), beta_.begin(), beta_.end() - 1);
    return v;
  }

  double max_abs() const {
    double r = 0.0;
    for (double v : alpha_) r = std::max(r, std::abs(v));
    for (double v : beta_) r = std::max(r, std::abs(v));
    return r;
  }

  friend bool operator==(const ParameterVector&, const ParameterVector&) = default;

 private:
  std::vector<double> alpha_;
  std::vector<double> beta_;
};

inline double max_abs_diff(const ParameterVector& a, const ParameterVector& b) {
  if (a.size() != b.size()) throw ContractError("parameter vectors differ in size");
  double r = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    r = std::max(r, std::abs(a.alpha(i) - b.alpha(i)));
    r = std::max(r, std::abs(a.beta(i) - b.beta(i)));
  }
  return r;
}

/// Independent Bernoulli(mu(alpha_i + beta_j)) edges for every ordered pair i != j,
/// drawn in row-major order from `rng`.
template <EdgeMeanModel Model>
DirectedGraph sample_graph(const ParameterVector& theta, const Model& model, RandomStream& rng) {
  const std::size_t n = theta.size();
  DirectedGraph::Builder b(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (rng.bernoulli(model.mu(theta.alpha(i) + theta.beta(j)))) b.add_edge(i, j);
    }
  }
  return std::move(b).build();
}

inline BiDegree degrees(const DirectedGraph& g) {
  const std::size_t n = g.size();
  BiDegree d{std::vector<std::int64_t>(n, 0), std::vector<std::int64_t>(n, 0)};
  for (std::size_t i = 0; i < n; ++i) {
    d.out_deg[i] = static_cast<std::int64_t>(g.out_degree(i));
    for (std::size_t j = 0; j < n; ++j)
      if (g.has_edge(i, j)) ++d.in_deg[j];
  }
  return d;
}

/// Expected out- and in-degrees, sum_{k != i} mu(alpha_i + beta_k) and
/// sum_{k != j} mu(alpha_k + beta_j).
template <EdgeMeanModel Model>
std::pair<std::vector<double>, std::vector<double>> expected_degrees(const ParameterVector& theta,
                                                                     const Model& model) {
  const std::size_t n = theta.size();
  std::vector<double> out(n, 0.0), in(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double p = model.mu(theta.alpha(i) + theta.beta(j));
      out[i] += p;
      in[j] += p;
    }
  }
  return {std::move(out), std::move(in)};
}

struct EdgeListStats {
  std::size_t lines = 0;
  std::size_t duplicates = 0;  // edges seen more than once, collapsed
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

inline bool parse_u64(std::string_view tok, std::uint64_t& out) {
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc{} && p == tok.data() + tok.size();
}

}  // namespace detail

/// Parses the edge-list format:
///   - one "<src> <dst>" pair per line, whitespace separated, ids >= 1;
///   - lines starting with '#' and blank lines are skipped;
///   - an optional first line "n=<count>" fixes the node count (otherwise
///     the largest id seen);
///   - duplicate edges collapse into one and are counted in `stats`.
inline DirectedGraph parse_edge_list(std::string_view text, EdgeListStats* stats = nullptr) {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> edges;
  std::uint64_t declared = 0;
  std::uint64_t max_id = 0;
  bool seen_content = false;
  std::size_t lineno = 0;

  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++lineno;

    const std::string_view line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;

    if (!seen_content && line.starts_with("n=")) {
      seen_content = true;
      if (!detail::parse_u64(detail::trim(line.substr(2)), declared) || declared < 2)
        throw ParseError(lineno, "bad node-count header '" + std::string(line) + "'");
      continue;
    }
    seen_content = true;

    std::istringstream in{std::string(line)};
    std::string a, b, extra;
    in >> a >> b;
    if (b.empty() || (in >> extra))
      throw ParseError(lineno, "expected '<src> <dst>', got '" + std::string(line) + "'");
    if (a.starts_with('-') || b.starts_with('-'))
      throw ParseError(lineno, "node ids must be >= 1");
    std::uint64_t src = 0, dst = 0;
    if (!detail::parse_u64(a, src) || !detail::parse_u64(b, dst))
      throw ParseError(lineno, "non-integer node id in '" + std::string(line) + "'");
    if (src == 0 || dst == 0) throw ParseError(lineno, "node ids must be >= 1");
    if (src == dst) throw ParseError(lineno, "self-loop on node " + std::to_string(src));
    if (declared && (src > declared || dst > declared))
      throw ParseError(lineno, "node id exceeds declared n=" + std::to_string(declared));
    max_id = std::max({max_id, src, dst});
    edges.emplace_back(src, dst);
  }

  const std::uint64_t n = declared ? declared : max_id;
  if (n < 2) throw ParseError(0, "edge list defines fewer than 2 nodes");

  DirectedGraph::Builder builder(static_cast<std::size_t>(n));
  std::size_t dups = 0;
  for (const auto& [s, d] : edges)
    if (!builder.add_edge(static_cast<std::size_t>(s - 1), static_cast<std::size_t>(d - 1))) ++dups;
  if (stats) *stats = {lineno, dups};
  return std::move(builder).build();
}

/// Inverse of parse_edge_list; always writes the "n=" header so isolated
/// trailing nodes survive a round trip.
inline std::string to_edge_list(const DirectedGraph& g) {
  std::string out = "n=" + std::to_string(g.size()) + "\n";
  for (const auto& [i, j] : g.edges()) out += std::to_string(i + 1) + " " + std::to_string(j + 1) + "\n";
  return out;
}

}  // namespace dpgraph
