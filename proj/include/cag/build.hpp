#pragma once

// Building community assembly graphs.
//
// A node is a stable community; an edge is a successful single-phenotype
// invasion. Two traversals share one transition function:
//  * explore_full   breadth-first closure of everything reachable;
//  * explore_bounded best-first by cycle-free hitting probability, stopping
//    after a fixed number of nodes are explored.

#include <algorithm>
#include <cstddef>
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cag/assembly_graph.hpp"
#include "cag/lexicase.hpp"
#include "cag/parallel.hpp"
#include "cag/phenonet.hpp"
#include "cag/updatable_max_queue.hpp"

namespace cag {

struct Transition {
  PhenotypeId invader = 0;
  Community result;
  double probability = 0.0;
};

struct BuildOptions {
  StabilityConfig stability;
  SelfLoopPolicy self_loops = SelfLoopPolicy::drop;
  std::size_t workers = 1;  // candidate invasions evaluated in parallel
};

class node_cap_exceeded : public std::runtime_error {
 public:
  explicit node_cap_exceeded(std::size_t reached)
      : std::runtime_error("node cap exceeded after discovering " + std::to_string(reached) + " nodes"),
        reached_(reached) {}
  std::size_t reached() const noexcept { return reached_; }

 private:
  std::size_t reached_;
};

/// Invasions out of a stable community.
///
/// Candidates are phenotypes outside `c` with positive mutation weight from
/// some member; a candidate's raw weight is the sum over members. Each is
/// resolved with invade(). Under SelfLoopPolicy::drop, failed invasions are
/// discarded; under keep they become transitions back to `c`. Survivors are
/// renormalized to sum to 1. An empty result marks a sink.
inline std::vector<Transition> transition_probabilities(const Community& c, const PhenotypeNetwork& net,
                                                        const BuildOptions& opt = {}) {
  const auto scores = net.scores();
  if (!is_stable(c, scores, opt.stability))
    throw std::invalid_argument("community " + c.to_string() + " is not stable");

  std::map<PhenotypeId, double> raw;
  for (auto m : c.members())
    for (const auto& e : net.out_edges(m))
      if (e.probability > 0.0 && !c.contains(e.target)) raw[e.target] += e.probability;

  std::vector<std::pair<PhenotypeId, double>> candidates(raw.begin(), raw.end());
  std::vector<std::optional<Community>> outcomes(candidates.size());
  parallel_for(candidates.size(), opt.workers, [&](std::size_t i) {
    outcomes[i] = invade(c, candidates[i].first, scores, opt.stability);
  });

  std::vector<Transition> out;
  double total = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const bool failed = *outcomes[i] == c;
    if (failed && opt.self_loops == SelfLoopPolicy::drop) continue;
    out.push_back({candidates[i].first, std::move(*outcomes[i]), candidates[i].second});
    total += candidates[i].second;
  }
  for (auto& t : out) t.probability /= total;
  return out;
}

/// One pop of the bounded traversal: the node, its priority when popped, and
/// the highest priority still queued right after the pop (0 if none).
struct ExplorationStep {
  std::size_t node = 0;
  double priority = 0.0;
  double next_best = 0.0;
};

/// Breadth-first closure from `start`. Node ids follow discovery order.
/// hit_priority accumulates the same cycle-free path sums as the bounded
/// traversal, in breadth-first order.
template <class TransitionFn>
AssemblyGraph explore_full(const Community& start, TransitionFn&& transitions, std::size_t node_cap) {
  if (node_cap == 0) throw std::invalid_argument("node cap must be positive");
  AssemblyGraph g;
  g.add_node(start, NodeStatus::frontier, 1.0);
  g.set_start(0);
  std::deque<std::size_t> fifo{0};
  std::size_t rank = 0;
  while (!fifo.empty()) {
    const std::size_t u = fifo.front();
    fifo.pop_front();
    g.mark_explored(u, rank++);
    const double hu = g.node(u).hit_priority;
    const Community community = g.node(u).community;
    for (auto& t : transitions(community)) {
      auto v = g.find(t.result);
      if (!v) {
        if (g.size() >= node_cap) throw node_cap_exceeded(g.size() + 1);
        v = g.add_node(t.result, NodeStatus::frontier, 0.0);
        fifo.push_back(*v);
      }
      g.add_edge({u, *v, t.invader, t.probability});
      if (g.node(*v).status != NodeStatus::explored)
        g.set_priority(*v, std::min(1.0, g.node(*v).hit_priority + hu * t.probability));
    }
  }
  return g;
}

/// Best-first traversal by hitting probability, ignoring cycles.
///
/// The start has priority 1. Exploring u (priority H) adds H * p to each
/// successor not yet explored; explored nodes keep the priority they had
/// when popped. Equal priorities pop in canonical community order. Stops
/// once `budget` nodes are explored; discovered but unexplored nodes stay
/// in the graph with status frontier.
template <class TransitionFn>
AssemblyGraph explore_bounded(const Community& start, TransitionFn&& transitions, std::size_t budget,
                              std::vector<ExplorationStep>* trace = nullptr) {
  if (budget == 0) throw std::invalid_argument("node budget must be positive");
  AssemblyGraph g;
  g.add_node(start, NodeStatus::frontier, 1.0);
  g.set_start(0);

  auto community_less = [&g](std::size_t a, std::size_t b) {
    return g.node(a).community < g.node(b).community;
  };
  updatable_max_queue<double, decltype(community_less)> queue(community_less);
  queue.insert(0, 1.0);

  std::size_t explored = 0;
  while (explored < budget && !queue.empty()) {
    const auto [u, hu] = queue.pop_max();
    if (trace) trace->push_back({u, hu, queue.empty() ? 0.0 : queue.top().second});
    g.mark_explored(u, explored++);
    const Community community = g.node(u).community;
    for (auto& t : transitions(community)) {
      auto v = g.find(t.result);
      if (!v) {
        v = g.add_node(t.result, NodeStatus::frontier, 0.0);
        const double p = std::min(1.0, hu * t.probability);
        g.set_priority(*v, p);
        queue.insert(*v, p);
      } else if (g.node(*v).status == NodeStatus::frontier) {
        const double p = std::min(1.0, g.node(*v).hit_priority + hu * t.probability);
        g.set_priority(*v, p);
        queue.increase_priority(*v, p);
      }
      g.add_edge({u, *v, t.invader, t.probability});
    }
  }
  return g;
}

namespace detail {

inline Community stable_start(const PhenotypeNetwork& net, const Community& start,
                              const StabilityConfig& cfg) {
  for (auto id : start.members())
    if (id >= net.size()) throw std::out_of_range("start phenotype " + std::to_string(id) + " not in network");
  auto s = stabilize(start, net.scores(), cfg);
  if (!s) throw std::invalid_argument("start community " + start.to_string() + " has no stable core");
  return std::move(*s);
}

}  // namespace detail

inline AssemblyGraph build_full(const PhenotypeNetwork& net, const Community& start,
                                const BuildOptions& opt, std::size_t node_cap) {
  const auto s = detail::stable_start(net, start, opt.stability);
  auto g = explore_full(s, [&](const Community& c) { return transition_probabilities(c, net, opt); },
                        node_cap);
  g.info = {BuildMode::full, node_cap, opt.stability, opt.self_loops};
  g.phenotypes = PhenotypeTable::from(net);
  return g;
}

inline AssemblyGraph build_bounded(const PhenotypeNetwork& net, const Community& start,
                                   const BuildOptions& opt, std::size_t budget,
                                   std::vector<ExplorationStep>* trace = nullptr) {
  const auto s = detail::stable_start(net, start, opt.stability);
  auto g = explore_bounded(
      s, [&](const Community& c) { return transition_probabilities(c, net, opt); }, budget, trace);
  g.info = {BuildMode::bounded, budget, opt.stability, opt.self_loops};
  g.phenotypes = PhenotypeTable::from(net);
  return g;
}

}  // namespace cag
