#pragma once

// Shared test helpers: independent oracles, small graph fixtures, a DOT
// grammar checker and a CLI runner. Nothing here calls the code it checks.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "cag/assembly_graph.hpp"
#include "cag/lexicase.hpp"
#include "cag/rng.hpp"

namespace testing_support {

using cag::Rational;
using cag::ScoreVector;

inline std::string data_path(const std::string& rel) { return std::string(CAG_TEST_DATA) + "/" + rel; }

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void spit(const std::filesystem::path& p, const std::string& contents) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << contents;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static int counter = 0;
    std::random_device rd;
    path = std::filesystem::temp_directory_path() /
           ("cagtest-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

// ---------------------------------------------------------------------------
// CLI runner

struct RunResult {
  int status = -1;
  std::string out;
  std::string err;
};

inline std::string shell_quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) {
    if (c == '\'') q += "'\\''";
    else q += c;
  }
  return q + "'";
}

/// Runs the CLI with `args` in directory `cwd` (or the current one).
inline RunResult run_cagtool(const std::vector<std::string>& args, const std::string& cwd = {}) {
  TempDir scratch;
  const auto out_file = scratch / "stdout";
  const auto err_file = scratch / "stderr";
  std::string cmd;
  if (!cwd.empty()) cmd += "cd " + shell_quote(cwd) + " && ";
  cmd += shell_quote(CAGTOOL_PATH);
  for (const auto& a : args) cmd += " " + shell_quote(a);
  cmd += " >" + shell_quote(out_file) + " 2>" + shell_quote(err_file);
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

// ---------------------------------------------------------------------------
// Selection oracles

/// Average over every ordering of the criteria of elite filtering followed by
/// a uniform pick among the survivors.
inline std::vector<Rational> plex_permutation_oracle(const std::vector<ScoreVector>& pool) {
  const std::size_t n = pool.size();
  const std::size_t m = pool.front().size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Rational> out(n, Rational(0));
  std::size_t permutations = 0;
  do {
    ++permutations;
    std::vector<std::size_t> alive(n);
    std::iota(alive.begin(), alive.end(), std::size_t{0});
    for (auto c : order) {
      double best = pool[alive.front()][c];
      for (auto i : alive) best = std::max(best, pool[i][c]);
      std::vector<std::size_t> next;
      for (auto i : alive)
        if (pool[i][c] == best) next.push_back(i);
      alive = next;
    }
    for (auto i : alive) out[i] += Rational(1, static_cast<long>(alive.size()));
  } while (std::next_permutation(order.begin(), order.end()));
  for (auto& v : out) v /= Rational(static_cast<long>(permutations));
  return out;
}

/// Textbook recursion: uniform over the pool when it has one member or no
/// criteria are left, otherwise the mean over remaining criteria of the
/// probability within that criterion's elites.
inline Rational plex_naive_member(const std::vector<ScoreVector>& scores, const std::vector<std::size_t>& pool,
                                  const std::vector<std::size_t>& criteria, std::size_t who) {
  if (std::find(pool.begin(), pool.end(), who) == pool.end()) return Rational(0);
  if (pool.size() == 1) return Rational(1);
  if (criteria.empty()) return Rational(1, static_cast<long>(pool.size()));
  Rational total(0);
  for (std::size_t ci = 0; ci < criteria.size(); ++ci) {
    const auto c = criteria[ci];
    double best = scores[pool.front()][c];
    for (auto i : pool) best = std::max(best, scores[i][c]);
    std::vector<std::size_t> elite;
    for (auto i : pool)
      if (scores[i][c] == best) elite.push_back(i);
    std::vector<std::size_t> rest = criteria;
    rest.erase(rest.begin() + static_cast<long>(ci));
    total += plex_naive_member(scores, elite, rest, who);
  }
  return total / Rational(static_cast<long>(criteria.size()));
}

inline std::vector<Rational> plex_naive(const std::vector<ScoreVector>& pool) {
  std::vector<std::size_t> all(pool.size()), criteria(pool.front().size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::iota(criteria.begin(), criteria.end(), std::size_t{0});
  std::vector<Rational> out;
  for (std::size_t i = 0; i < pool.size(); ++i) out.push_back(plex_naive_member(pool, all, criteria, i));
  return out;
}

/// Fixed point of simultaneous removal using the naive recursion each round.
inline std::vector<cag::PhenotypeId> stabilize_oracle(std::vector<cag::PhenotypeId> members,
                                                      const std::vector<ScoreVector>& scores_by_id,
                                                      const cag::StabilityConfig& cfg) {
  while (!members.empty()) {
    std::vector<ScoreVector> pool;
    for (auto id : members) pool.push_back(scores_by_id[id]);
    const auto probs = plex_naive(pool);
    std::vector<cag::PhenotypeId> kept;
    for (std::size_t i = 0; i < members.size(); ++i) {
      const double p = probs[i].convert_to<double>();
      const double survive = std::pow(1.0 - std::pow(1.0 - p, double(cfg.population_size)), double(cfg.generations));
      if (survive >= cfg.survival_threshold) kept.push_back(members[i]);
    }
    if (kept.size() == members.size()) break;
    members = kept;
  }
  return members;
}

inline std::vector<ScoreVector> random_pool(std::mt19937_64& rng, std::size_t max_members, std::size_t max_criteria,
                                            int max_score) {
  std::uniform_int_distribution<std::size_t> members(1, max_members), criteria(1, max_criteria);
  std::uniform_int_distribution<int> score(0, max_score);
  const auto n = members(rng), m = criteria(rng);
  std::vector<ScoreVector> pool(n, ScoreVector(m));
  for (auto& v : pool)
    for (auto& x : v) x = score(rng);
  return pool;
}

// ---------------------------------------------------------------------------
// Network fuzzing

/// Valid network with awkward doubles (subnormals, huge and negative
/// values, long mantissas) and labels that need escaping.
inline cag::PhenotypeNetwork random_network(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> criteria(1, 6), count(1, 12);
  std::uniform_int_distribution<int> kind(0, 5), small(-3, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto m = criteria(rng), n = count(rng);
  auto score = [&]() -> double {
    switch (kind(rng)) {
      case 0: return small(rng);
      case 1: return unit(rng);
      case 2: return -unit(rng) * 1e300;
      case 3: return 4.9406564584124654e-324 * double(1 + small(rng) * small(rng));
      case 4: return unit(rng) * 1e-200;
      default: return 0.1 + unit(rng);
    }
  };
  const std::vector<std::string> labels{"", "g0,g3", "quote\"inside", "tab\there", "back\\slash", "\u00e9t\u00e9",
                                        "line\nbreak"};
  std::set<ScoreVector> used;
  std::vector<cag::Phenotype> ph;
  while (ph.size() < n) {
    ScoreVector v(m);
    for (auto& x : v) x = score();
    if (!used.insert(v).second) continue;
    ph.push_back({static_cast<cag::PhenotypeId>(ph.size()), v, labels[rng() % labels.size()]});
  }
  std::shuffle(ph.begin(), ph.end(), rng);
  std::vector<cag::PhenotypeNetwork::EdgeSpec> edges;
  for (cag::PhenotypeId a = 0; a < n; ++a) {
    double budget = 1.0;
    for (cag::PhenotypeId b = 0; b < n; ++b) {
      if (a == b || unit(rng) < 0.5) continue;
      const double p = budget * unit(rng) * 0.5;
      budget -= p;
      edges.push_back({a, b, p});
    }
  }
  std::shuffle(edges.begin(), edges.end(), rng);
  return cag::PhenotypeNetwork(m, std::move(ph), std::move(edges));
}

// ---------------------------------------------------------------------------
// Graph fixtures

struct EdgeSpec {
  std::size_t source;
  std::size_t target;
  double probability;
};

/// Node i holds community {i}. Nodes listed in `frontier` are left
/// unexplored; the rest are explored. Edge invaders are the target ids.
inline cag::AssemblyGraph make_graph(std::size_t nodes, const std::vector<EdgeSpec>& edges,
                                     const std::set<std::size_t>& frontier = {}) {
  cag::AssemblyGraph g;
  for (std::size_t i = 0; i < nodes; ++i) {
    g.add_node(cag::Community{static_cast<cag::PhenotypeId>(i)}, cag::NodeStatus::frontier, i == 0 ? 1.0 : 0.0);
    if (!frontier.count(i)) g.mark_explored(i, i);
  }
  g.set_start(0);
  for (const auto& e : edges) g.add_edge({e.source, e.target, static_cast<cag::PhenotypeId>(e.target), e.probability});
  g.phenotypes.criteria_count = 1;
  for (std::size_t i = 0; i < nodes; ++i) {
    g.phenotypes.scores.push_back({static_cast<double>(i)});
    g.phenotypes.labels.push_back("");
  }
  return g;
}

/// Random graph on explored nodes; each node gets 0..max_out distinct
/// successors with normalized probabilities. Probabilities are dyadic so
/// normalization is exact.
inline cag::AssemblyGraph random_graph(std::mt19937_64& rng, std::size_t nodes, std::size_t max_out,
                                       double sink_share = 0.25) {
  std::vector<EdgeSpec> edges;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> outdeg(1, max_out), pick(0, nodes - 1);
  std::uniform_int_distribution<int> weight(1, 8);
  for (std::size_t u = 0; u < nodes; ++u) {
    if (unit(rng) < sink_share) continue;
    std::set<std::size_t> targets;
    const auto k = outdeg(rng);
    for (std::size_t j = 0; j < k; ++j) {
      const auto v = pick(rng);
      if (v != u) targets.insert(v);
    }
    if (targets.empty()) continue;
    std::vector<int> w;
    int total = 0;
    for (std::size_t j = 0; j < targets.size(); ++j) {
      w.push_back(weight(rng));
      total += w.back();
    }
    std::size_t j = 0;
    for (auto v : targets) edges.push_back({u, v, double(w[j++]) / double(total)});
  }
  return make_graph(nodes, edges);
}

inline std::vector<std::vector<bool>> transitive_closure(const cag::AssemblyGraph& g) {
  const auto n = g.size();
  std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) r[i][i] = true;
  for (const auto& e : g.edges()) r[e.source][e.target] = true;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      if (r[i][k])
        for (std::size_t j = 0; j < n; ++j)
          if (r[k][j]) r[i][j] = true;
  return r;
}

/// Walks from `start`, stopping at `target` (hit), at a node without
/// outgoing edges or at a node with no path to `target` (miss). Walks longer
/// than `max_steps` count as misses.
inline double monte_carlo_hitting(const cag::AssemblyGraph& g, std::size_t start, std::size_t target,
                                  std::size_t walks, std::uint64_t seed, std::size_t max_steps = 100000) {
  const auto closure = transitive_closure(g);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t hits = 0;
  for (std::size_t w = 0; w < walks; ++w) {
    std::size_t u = start;
    for (std::size_t step = 0; step < max_steps; ++step) {
      if (u == target) {
        ++hits;
        break;
      }
      const auto out = g.out_edges(u);
      if (out.empty() || !closure[u][target]) break;
      double r = unit(rng), acc = 0.0;
      std::size_t next = g.edges()[out.back()].target;
      for (auto ei : out) {
        acc += g.edges()[ei].probability;
        if (r < acc) {
          next = g.edges()[ei].target;
          break;
        }
      }
      u = next;
    }
  }
  return double(hits) / double(walks);
}

/// Dense Google-matrix power iteration.
inline std::vector<double> dense_pagerank(const cag::AssemblyGraph& g, double damping, std::size_t iterations = 5000) {
  const auto n = static_cast<Eigen::Index>(g.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : g.edges()) m(Eigen::Index(e.target), Eigen::Index(e.source)) += e.probability;
  for (Eigen::Index j = 0; j < n; ++j)
    if (m.col(j).sum() == 0.0) m.col(j).setConstant(1.0 / double(n));
  Eigen::MatrixXd google = damping * m + Eigen::MatrixXd::Constant(n, n, (1.0 - damping) / double(n));
  Eigen::VectorXd r = Eigen::VectorXd::Constant(n, 1.0 / double(n));
  for (std::size_t i = 0; i < iterations; ++i) r = google * r;
  r /= r.sum();
  return {r.data(), r.data() + n};
}

// ---------------------------------------------------------------------------
// DOT grammar checker (graphviz language: graph, stmt_list, node/edge/attr
// statements, subgraphs, ID forms, comments)

class DotChecker {
 public:
  explicit DotChecker(std::string text) : s_(std::move(text)) {}

  bool valid(std::string* why = nullptr) {
    try {
      graph();
      skip();
      if (i_ != s_.size()) fail("trailing content");
      return true;
    } catch (const std::runtime_error& e) {
      if (why) *why = e.what();
      return false;
    }
  }

 private:
  [[noreturn]] void fail(const std::string& what) {
    throw std::runtime_error(what + " at offset " + std::to_string(i_));
  }

  void skip() {
    while (i_ < s_.size()) {
      if (std::isspace(static_cast<unsigned char>(s_[i_]))) {
        ++i_;
      } else if (s_.compare(i_, 2, "//") == 0 || ((i_ == 0 || s_[i_ - 1] == '\n') && s_[i_] == '#')) {
        while (i_ < s_.size() && s_[i_] != '\n') ++i_;
      } else if (s_.compare(i_, 2, "/*") == 0) {
        const auto end = s_.find("*/", i_ + 2);
        if (end == std::string::npos) fail("unterminated comment");
        i_ = end + 2;
      } else {
        break;
      }
    }
  }

  bool peek(char c) {
    skip();
    return i_ < s_.size() && s_[i_] == c;
  }
  bool peek_str(const char* t) {
    skip();
    return s_.compare(i_, std::strlen(t), t) == 0;
  }
  void expect(char c) {
    if (!peek(c)) fail(std::string("expected '") + c + "'");
    ++i_;
  }

  bool id_start() {
    skip();
    if (i_ >= s_.size()) return false;
    const char c = s_[i_];
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '"' || c == '-' || c == '.' ||
           std::isdigit(static_cast<unsigned char>(c));
  }

  std::string id() {
    skip();
    if (i_ >= s_.size()) fail("expected ID");
    const std::size_t begin = i_;
    const char c = s_[i_];
    if (c == '"') {
      ++i_;
      while (i_ < s_.size() && s_[i_] != '"') {
        if (s_[i_] == '\\') ++i_;
        ++i_;
      }
      if (i_ >= s_.size()) fail("unterminated string");
      ++i_;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_')) ++i_;
    } else if (c == '-' || c == '.' || std::isdigit(static_cast<unsigned char>(c))) {
      if (c == '-') ++i_;
      bool digits = false, dot = false;
      while (i_ < s_.size()) {
        if (std::isdigit(static_cast<unsigned char>(s_[i_]))) digits = true;
        else if (s_[i_] == '.' && !dot) dot = true;
        else break;
        ++i_;
      }
      if (!digits) fail("bad numeral");
    } else {
      fail("expected ID");
    }
    return s_.substr(begin, i_ - begin);
  }

  void graph() {
    auto kw = id();
    if (kw == "strict") kw = id();
    if (kw != "graph" && kw != "digraph") fail("expected graph or digraph");
    directed_ = kw == "digraph";
    if (!peek('{')) id();
    expect('{');
    stmt_list();
    expect('}');
  }

  void stmt_list() {
    while (!peek('}')) {
      stmt();
      if (peek(';')) ++i_;
    }
  }

  void attr_list() {
    while (peek('[')) {
      ++i_;
      while (!peek(']')) {
        id();
        if (peek('=')) {
          ++i_;
          id();
        }
        if (peek(',') || peek(';')) ++i_;
      }
      expect(']');
    }
  }

  void node_or_subgraph() {
    if (peek('{') || peek_str("subgraph")) {
      subgraph();
    } else {
      id();
      if (peek(':')) {
        ++i_;
        id();
        if (peek(':')) {
          ++i_;
          id();
        }
      }
    }
  }

  void subgraph() {
    if (peek_str("subgraph")) {
      id();
      if (!peek('{')) id();
    }
    expect('{');
    stmt_list();
    expect('}');
  }

  bool edge_op() {
    skip();
    if (s_.compare(i_, 2, directed_ ? "->" : "--") == 0) {
      i_ += 2;
      return true;
    }
    return false;
  }

  void stmt() {
    skip();
    if (peek_str("graph") || peek_str("node") || peek_str("edge")) {
      const auto save = i_;
      const auto kw = id();
      if ((kw == "graph" || kw == "node" || kw == "edge") && peek('[')) {
        attr_list();
        return;
      }
      i_ = save;
    }
    node_or_subgraph();
    if (peek('=')) {
      ++i_;
      id();
      return;
    }
    bool edge = false;
    while (edge_op()) {
      edge = true;
      node_or_subgraph();
    }
    (void)edge;
    attr_list();
  }

  std::string s_;
  std::size_t i_ = 0;
  bool directed_ = true;
};

}  // namespace testing_support
