#pragma once

// Reachability questions on a community assembly graph.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <json.hpp>

#include "cag/assembly_graph.hpp"
#include "cag/text.hpp"

namespace cag {

/// Tolerance on outgoing probability sums of explored non-sink nodes.
inline constexpr double kRowNormTolerance = 1e-9;

/// Explored nodes with no edge to a different node. Explored nodes whose
/// edges only reach frontier nodes are not sinks; the traversal stopped
/// before their successors were explored.
inline std::vector<std::size_t> sinks(const AssemblyGraph& g) {
  std::vector<std::size_t> out;
  for (const auto& n : g.nodes()) {
    if (n.status != NodeStatus::explored) continue;
    bool leaves = false;
    for (auto ei : g.out_edges(n.id)) leaves = leaves || g.edges()[ei].target != n.id;
    if (!leaves) out.push_back(n.id);
  }
  return out;
}

/// Nodes reachable from `from` (including itself). Walks stop at nodes
/// flagged in `absorbing`.
inline std::vector<bool> reachable_set(const AssemblyGraph& g, std::size_t from,
                                       const std::vector<bool>& absorbing = {}) {
  g.check_node(from);
  std::vector<bool> seen(g.size(), false);
  std::deque<std::size_t> todo{from};
  seen[from] = true;
  while (!todo.empty()) {
    const auto u = todo.front();
    todo.pop_front();
    if (!absorbing.empty() && absorbing[u]) continue;
    for (auto ei : g.out_edges(u)) {
      const auto v = g.edges()[ei].target;
      if (!seen[v]) {
        seen[v] = true;
        todo.push_back(v);
      }
    }
  }
  return seen;
}

/// Nodes that can reach any node in `targets` (including the targets).
inline std::vector<bool> co_reachable_set(const AssemblyGraph& g, const std::vector<std::size_t>& targets) {
  std::vector<std::vector<std::size_t>> in(g.size());
  for (const auto& e : g.edges()) in[e.target].push_back(e.source);
  std::vector<bool> seen(g.size(), false);
  std::deque<std::size_t> todo;
  for (auto t : targets) {
    g.check_node(t);
    if (!seen[t]) {
      seen[t] = true;
      todo.push_back(t);
    }
  }
  while (!todo.empty()) {
    const auto v = todo.front();
    todo.pop_front();
    for (auto u : in[v])
      if (!seen[u]) {
        seen[u] = true;
        todo.push_back(u);
      }
  }
  return seen;
}

inline bool reachable(const AssemblyGraph& g, std::size_t from, std::size_t to) {
  g.check_node(to);
  return reachable_set(g, from)[to];
}

/// True iff a target is reachable from `from` and every explored node a
/// walk can visit before its first target is a target or can still reach
/// one.
inline bool guaranteed(const AssemblyGraph& g, std::size_t from, const std::vector<std::size_t>& targets) {
  if (targets.empty()) return false;
  std::vector<bool> is_target(g.size(), false);
  for (auto t : targets) {
    g.check_node(t);
    is_target[t] = true;
  }
  const auto fwd = reachable_set(g, from, is_target);
  const auto back = co_reachable_set(g, targets);
  if (!back[from]) return false;
  for (std::size_t u = 0; u < g.size(); ++u)
    if (fwd[u] && g.node(u).status == NodeStatus::explored && !back[u]) return false;
  return true;
}

inline bool guaranteed(const AssemblyGraph& g, std::size_t from, std::size_t target) {
  return guaranteed(g, from, std::vector<std::size_t>{target});
}

namespace detail {

inline void check_normalized(const AssemblyGraph& g) {
  for (const auto& n : g.nodes()) {
    const auto out = g.out_edges(n.id);
    if (out.empty()) continue;
    double sum = 0.0;
    for (auto ei : out) sum += g.edges()[ei].probability;
    if (std::abs(sum - 1.0) > kRowNormTolerance)
      throw std::invalid_argument("outgoing probabilities of node " + std::to_string(n.id) + " sum to " +
                                  text::format_double(sum));
  }
}

}  // namespace detail

/// Maximum residual |h - P h - b| accepted from the linear solve.
inline constexpr double kHittingResidual = 1e-10;

/// Probability, for every node, that a walk started there visits any of
/// `targets`. Walks follow edge probabilities and halt at sinks and frontier
/// nodes (counted as misses); targets are absorbing.
///
/// Nodes that cannot reach a target are 0. On the rest the absorbing system
/// h(u) = sum_v p(u,v) h(v) is nonsingular and solved directly.
inline std::vector<double> hitting_probabilities(const AssemblyGraph& g, const std::vector<std::size_t>& targets) {
  detail::check_normalized(g);
  std::vector<double> h(g.size(), 0.0);
  if (targets.empty()) return h;
  std::vector<bool> is_target(g.size(), false);
  for (auto t : targets) {
    g.check_node(t);
    is_target[t] = true;
  }

  // Backward reachability in the graph with target out-edges removed.
  std::vector<std::vector<std::size_t>> in(g.size());
  for (const auto& e : g.edges())
    if (!is_target[e.source]) in[e.target].push_back(e.source);
  std::vector<bool> live(g.size(), false);
  std::deque<std::size_t> todo;
  for (auto t : targets)
    if (!live[t]) {
      live[t] = true;
      todo.push_back(t);
    }
  while (!todo.empty()) {
    const auto v = todo.front();
    todo.pop_front();
    for (auto u : in[v])
      if (!live[u]) {
        live[u] = true;
        todo.push_back(u);
      }
  }

  std::vector<std::ptrdiff_t> slot(g.size(), -1);
  std::vector<std::size_t> unknowns;
  for (std::size_t u = 0; u < g.size(); ++u) {
    if (is_target[u]) h[u] = 1.0;
    else if (live[u]) {
      slot[u] = static_cast<std::ptrdiff_t>(unknowns.size());
      unknowns.push_back(u);
    }
  }
  if (unknowns.empty()) return h;

  const auto m = static_cast<Eigen::Index>(unknowns.size());
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto u = unknowns[static_cast<std::size_t>(r)];
    triplets.emplace_back(r, r, 1.0);
    for (auto ei : g.out_edges(u)) {
      const auto& e = g.edges()[ei];
      if (is_target[e.target]) rhs[r] += e.probability;
      else if (slot[e.target] >= 0) triplets.emplace_back(r, slot[e.target], -e.probability);
    }
  }
  Eigen::SparseMatrix<double> a(m, m);
  a.setFromTriplets(triplets.begin(), triplets.end());  // duplicates (self loops) are summed
  a.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
  solver.compute(a);
  if (solver.info() != Eigen::Success) throw std::runtime_error("hitting probability system is singular");
  Eigen::VectorXd x = solver.solve(rhs);
  // One refinement step.
  Eigen::VectorXd residual = rhs - a * x;
  if (residual.lpNorm<Eigen::Infinity>() > 0.0) {
    x += solver.solve(residual);
    residual = rhs - a * x;
  }
  if (!(residual.lpNorm<Eigen::Infinity>() < kHittingResidual))
    throw std::runtime_error("hitting probability solve did not reach the residual bound");
  for (Eigen::Index r = 0; r < m; ++r)
    h[unknowns[static_cast<std::size_t>(r)]] = std::clamp(x[r], 0.0, 1.0);
  return h;
}

inline double hitting_probability(const AssemblyGraph& g, std::size_t start, std::size_t target) {
  g.check_node(start);
  if (start == target) {
    g.check_node(target);
    return 1.0;
  }
  return hitting_probabilities(g, {target})[start];
}

/// Power-iteration PageRank with uniform teleport (1 - damping) and
/// uniform redistribution of mass from nodes without out-edges. Iterates
/// until the L1 change drops below `tolerance`.
inline std::vector<double> pagerank(const AssemblyGraph& g, double damping = 0.85, double tolerance = 1e-12,
                                    std::size_t max_iterations = 100000) {
  if (!(damping > 0.0 && damping <= 1.0)) throw std::invalid_argument("damping must lie in (0,1]");
  if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
  detail::check_normalized(g);
  const std::size_t n = g.size();
  if (n == 0) return {};
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> rank(n, inv_n), next(n);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    double dangling = 0.0;
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t u = 0; u < n; ++u) {
      const auto out = g.out_edges(u);
      if (out.empty()) {
        dangling += rank[u];
        continue;
      }
      for (auto ei : out) next[g.edges()[ei].target] += rank[u] * g.edges()[ei].probability;
    }
    const double base = (1.0 - damping) * inv_n + damping * dangling * inv_n;
    double sum = 0.0;
    for (auto& v : next) {
      v = damping * v + base;
      sum += v;
    }
    double change = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
      next[u] /= sum;
      change += std::abs(next[u] - rank[u]);
    }
    rank.swap(next);
    if (change < tolerance) return rank;
  }
  throw std::runtime_error("pagerank did not converge");
}

// ---------------------------------------------------------------------------
// Reports

struct ReachabilityReport {
  std::size_t start = 0;
  bool optimum_requested = false;
  std::optional<PhenotypeId> optimum_phenotype;  // set when an optimum exists
  bool target_present = false;                    // some target node exists in the graph
  std::vector<std::size_t> targets;
  bool target_reachable = false;
  std::vector<std::size_t> sinks;
  std::vector<std::size_t> reachable_sinks;
  bool non_target_sinks_reachable = false;
  bool guaranteed = false;
  double hitting_probability = 0.0;
};

/// Phenotype scoring the maximum of every criterion at once, if any.
inline std::optional<PhenotypeId> optimum_phenotype(const PhenotypeTable& table) {
  if (table.scores.empty()) return std::nullopt;
  ScoreVector best = table.scores.front();
  for (const auto& s : table.scores)
    for (std::size_t c = 0; c < best.size(); ++c) best[c] = std::max(best[c], s[c]);
  for (std::size_t i = 0; i < table.scores.size(); ++i)
    if (table.scores[i] == best) return static_cast<PhenotypeId>(i);
  return std::nullopt;
}

/// Nodes whose community contains the optimum phenotype.
inline std::vector<std::size_t> optimum_nodes(const AssemblyGraph& g) {
  std::vector<std::size_t> out;
  if (auto opt = optimum_phenotype(g.phenotypes))
    for (const auto& n : g.nodes())
      if (n.community.contains(*opt)) out.push_back(n.id);
  return out;
}

namespace detail {

inline ReachabilityReport assemble_report(const AssemblyGraph& g, std::size_t start,
                                          std::vector<std::size_t> targets) {
  ReachabilityReport r;
  r.start = start;
  r.targets = std::move(targets);
  r.target_present = !r.targets.empty();
  r.sinks = sinks(g);
  const auto fwd = reachable_set(g, start);
  for (auto s : r.sinks) {
    if (!fwd[s]) continue;
    r.reachable_sinks.push_back(s);
    if (std::find(r.targets.begin(), r.targets.end(), s) == r.targets.end()) r.non_target_sinks_reachable = true;
  }
  if (!r.target_present) return r;
  for (auto t : r.targets) r.target_reachable = r.target_reachable || fwd[t];
  r.guaranteed = guaranteed(g, start, r.targets);
  if (std::find(r.targets.begin(), r.targets.end(), start) != r.targets.end()) r.hitting_probability = 1.0;
  else r.hitting_probability = hitting_probabilities(g, r.targets)[start];
  return r;
}

}  // namespace detail

inline ReachabilityReport report(const AssemblyGraph& g, std::size_t start, std::size_t target) {
  g.check_node(start);
  g.check_node(target);
  return detail::assemble_report(g, start, {target});
}

/// Report with the optimum as target: every node holding the phenotype that
/// is maximal on all criteria. Without such a phenotype (or node) the report
/// marks the target absent.
inline ReachabilityReport report_optimum(const AssemblyGraph& g, std::size_t start) {
  g.check_node(start);
  auto r = detail::assemble_report(g, start, optimum_nodes(g));
  r.optimum_requested = true;
  r.optimum_phenotype = optimum_phenotype(g.phenotypes);
  return r;
}

inline nlohmann::ordered_json report_to_json(const ReachabilityReport& r) {
  nlohmann::ordered_json j;
  j["start"] = r.start;
  j["target"] = r.optimum_requested ? nlohmann::ordered_json("optimum") : nlohmann::ordered_json(r.targets.empty() ? 0 : r.targets.front());
  if (r.optimum_requested) {
    j["optimum_phenotype"] = r.optimum_phenotype ? nlohmann::ordered_json(*r.optimum_phenotype) : nlohmann::ordered_json(nullptr);
  }
  j["target_present"] = r.target_present;
  j["target_nodes"] = r.targets;
  j["target_reachable"] = r.target_reachable;
  j["sinks"] = r.sinks;
  j["reachable_sinks"] = r.reachable_sinks;
  j["non_target_sinks_reachable"] = r.non_target_sinks_reachable;
  j["guaranteed"] = r.guaranteed;
  j["hitting_probability"] = r.hitting_probability;
  return j;
}

inline void write_report(std::ostream& out, const ReachabilityReport& r,
                         const nlohmann::ordered_json& manifest = nullptr) {
  nlohmann::ordered_json doc;
  if (!manifest.is_null()) doc["manifest"] = manifest;
  doc["format"] = "reachability-report";
  doc["version"] = 1;
  const auto fields = report_to_json(r);
  for (const auto& [k, v] : fields.items()) doc[k] = v;
  out << doc.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// DOT export

struct DotOverlays {
  std::optional<std::vector<double>> pagerank;
  double damping = 0.85;
  std::optional<std::vector<std::size_t>> highlight;  // e.g. target nodes
};

/// Shortest edge count from `from` to every node; -1 if unreachable.
inline std::vector<long> bfs_distance(const AssemblyGraph& g, std::size_t from) {
  std::vector<long> dist(g.size(), -1);
  if (g.size() == 0) return dist;
  std::deque<std::size_t> todo{from};
  dist[from] = 0;
  while (!todo.empty()) {
    const auto u = todo.front();
    todo.pop_front();
    for (auto ei : g.out_edges(u)) {
      const auto v = g.edges()[ei].target;
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        todo.push_back(v);
      }
    }
  }
  return dist;
}

namespace detail {

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

/// Yellow (low) to dark red (high) for t in [0,1].
inline std::string heat_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(255 - 120 * t));
  const int gr = static_cast<int>(std::lround(235 * (1.0 - t)));
  const int b = static_cast<int>(std::lround(160 * (1.0 - t)));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, gr, b);
  return buf;
}

inline std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace detail

/// Graphviz rendering: the start node filled blue, sinks outlined red,
/// frontier nodes dashed, node size and color by PageRank when given, edge
/// color by probability, and nodes ranked by BFS distance from the start.
inline void export_dot(std::ostream& out, const AssemblyGraph& g, const DotOverlays& overlays = {},
                       const nlohmann::ordered_json& manifest = nullptr) {
  if (!manifest.is_null()) out << "// manifest: " << manifest.dump() << '\n';
  const auto sink_list = sinks(g);
  std::vector<bool> is_sink(g.size(), false), is_highlight(g.size(), false);
  for (auto s : sink_list) is_sink[s] = true;
  if (overlays.highlight)
    for (auto h : *overlays.highlight) is_highlight.at(h) = true;
  const auto dist = bfs_distance(g, g.start());
  double max_pr = 0.0;
  if (overlays.pagerank) {
    if (overlays.pagerank->size() != g.size()) throw std::invalid_argument("pagerank overlay size mismatch");
    for (double v : *overlays.pagerank) max_pr = std::max(max_pr, v);
  }

  out << "digraph cag {\n";
  out << "  graph [rankdir=BT";
  if (overlays.pagerank) out << ", pagerank_damping=\"" << text::format_double(overlays.damping) << "\"";
  out << "];\n";
  out << "  node [shape=ellipse, style=filled, fillcolor=\"#ffffff\"];\n";
  for (const auto& n : g.nodes()) {
    out << "  n" << n.id << " [label=\"" << detail::dot_escape(n.community.to_string()) << "\"";
    out << ", status=\"" << to_string(n.status) << "\"";
    out << ", priority=\"" << detail::fixed(n.hit_priority, 6) << "\"";
    if (dist[n.id] >= 0) out << ", rank=\"" << dist[n.id] << "\"";
    std::optional<std::string> fill;
    if (overlays.pagerank) {
      const double pr = (*overlays.pagerank)[n.id];
      const double t = max_pr > 0.0 ? pr / max_pr : 0.0;
      out << ", pagerank=\"" << detail::fixed(pr, 8) << "\", width=\"" << detail::fixed(0.5 + 1.5 * t, 4) << "\"";
      fill = detail::heat_color(t);
    }
    if (n.id == g.start()) out << ", fillcolor=\"#4f81bd\", fontcolor=\"#ffffff\"";
    else if (fill) out << ", fillcolor=\"" << *fill << "\"";
    if (n.status == NodeStatus::frontier) out << ", style=\"filled,dashed\"";
    if (is_sink[n.id]) out << ", sink=\"true\", color=\"#d62728\", penwidth=\"3\"";
    if (is_highlight[n.id]) out << ", peripheries=\"2\"";
    out << "];\n";
  }
  long max_dist = 0;
  for (auto d : dist) max_dist = std::max(max_dist, d);
  for (long d = 0; d <= max_dist && g.size() > 0; ++d) {
    std::string members;
    for (const auto& n : g.nodes())
      if (dist[n.id] == d) members += " n" + std::to_string(n.id) + ";";
    if (!members.empty()) out << "  { rank=same;" << members << " }\n";
  }
  for (const auto& e : g.edges()) {
    out << "  n" << e.source << " -> n" << e.target << " [label=\"+" << e.invader << "\", probability=\""
        << text::format_double(e.probability) << "\", color=\"" << detail::heat_color(e.probability)
        << "\"];\n";
  }
  out << "}\n";
}

inline std::string export_dot(const AssemblyGraph& g, const DotOverlays& overlays = {},
                              const nlohmann::ordered_json& manifest = nullptr) {
  std::ostringstream out;
  export_dot(out, g, overlays, manifest);
  return out.str();
}

}  // namespace cag
