#pragma once

// Generational lexicase evolution on NK landscapes, used to check community
// assembly graph predictions against actual runs.

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cag/analysis.hpp"
#include "cag/assembly_graph.hpp"
#include "cag/landscape.hpp"
#include "cag/lexicase.hpp"
#include "cag/parallel.hpp"
#include "cag/rng.hpp"

namespace cag {

struct SimConfig {
  std::size_t population_size = 100;
  std::size_t generations = 500;
  double per_site_mutation_rate = 0.001;
  std::uint64_t seed = 0;
  /// Phenotypes below this share of the final population are left out of
  /// the filtered community.
  double abundance_floor = 0.02;
  bool record_trace = false;

  void validate() const {
    if (population_size == 0) throw std::invalid_argument("population size must be positive");
    if (generations == 0) throw std::invalid_argument("generations must be positive");
    if (!(per_site_mutation_rate >= 0.0 && per_site_mutation_rate < 1.0))
      throw std::invalid_argument("per-site mutation rate must lie in [0,1)");
    if (!(abundance_floor >= 0.0 && abundance_floor < 1.0))
      throw std::invalid_argument("abundance floor must lie in [0,1)");
  }
};

struct SimResult {
  Community final_community;     // every phenotype present at the end
  Community filtered_community;  // those at or above the abundance floor
  std::map<PhenotypeId, std::size_t> abundance;
  std::vector<Community> trace;  // per generation, when requested
};

namespace detail {

/// Lexicase over `size` candidates whose score on criterion c is
/// score(i, c). Criteria are shuffled, the pool is cut to the elites of each
/// in turn, and a remaining tie is broken uniformly.
template <class ScoreAt, class Eng>
std::size_t lexicase_select_by(std::size_t size, std::size_t criteria, ScoreAt&& score, Eng& eng,
                               std::vector<std::size_t>& order, std::vector<std::size_t>& pool) {
  order.resize(criteria);
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle(order, eng);
  pool.resize(size);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (auto c : order) {
    if (pool.size() == 1) break;
    double best = score(pool.front(), c);
    for (auto i : pool) best = std::max(best, score(i, c));
    std::erase_if(pool, [&](std::size_t i) { return score(i, c) != best; });
  }
  return pool[uniform_index(eng, pool.size())];
}

}  // namespace detail

template <class Eng>
std::size_t lexicase_select(std::span<const ScoreVector> population, Eng& eng) {
  if (population.empty()) throw std::invalid_argument("cannot select from an empty population");
  const std::size_t criteria = population.front().size();
  for (const auto& s : population)
    if (s.size() != criteria) throw std::invalid_argument("ragged score vectors");
  std::vector<std::size_t> order, pool;
  return detail::lexicase_select_by(
      population.size(), criteria, [&](std::size_t i, std::size_t c) { return population[i][c]; }, eng, order,
      pool);
}

namespace detail {

inline Community community_of(const std::vector<std::uint64_t>& population, const NkPhenotypes& groups) {
  std::vector<PhenotypeId> ids;
  for (auto g : population) ids.push_back(groups.phenotype_of[g]);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return Community(std::move(ids));
}

}  // namespace detail

/// One run from an all-zeros population. Each generation is refilled with
/// population_size offspring, each a lexicase-selected parent with every
/// site flipped independently at the mutation rate. Phenotype ids are those
/// of nk_phenotypes(landscape).
inline SimResult run_evolution(const NKLandscape& landscape, const NkPhenotypes& groups, const SimConfig& cfg) {
  cfg.validate();
  if (groups.phenotype_of.size() != (std::uint64_t{1} << landscape.n()))
    throw std::invalid_argument("phenotype grouping does not match the landscape");
  Engine eng(cfg.seed);
  const std::size_t n = landscape.n();
  std::vector<std::uint64_t> population(cfg.population_size, 0), next(cfg.population_size);
  std::vector<const ScoreVector*> scores(cfg.population_size);
  std::vector<std::size_t> order, pool;
  std::vector<Community> trace;

  for (std::size_t gen = 0; gen < cfg.generations; ++gen) {
    for (std::size_t i = 0; i < population.size(); ++i) scores[i] = &groups.scores[groups.phenotype_of[population[i]]];
    for (auto& child : next) {
      const std::size_t parent = detail::lexicase_select_by(
          scores.size(), n, [&](std::size_t i, std::size_t c) { return (*scores[i])[c]; }, eng, order, pool);
      child = population[parent];
      if (cfg.per_site_mutation_rate > 0.0)
        for (std::size_t s = 0; s < n; ++s)
          if (uniform_unit(eng) < cfg.per_site_mutation_rate) child ^= std::uint64_t{1} << s;
    }
    population.swap(next);
    if (cfg.record_trace) trace.push_back(detail::community_of(population, groups));
  }

  std::map<PhenotypeId, std::size_t> abundance;
  for (auto g : population) ++abundance[groups.phenotype_of[g]];
  std::vector<PhenotypeId> all, common;
  for (const auto& [id, count] : abundance) {
    all.push_back(id);
    if (static_cast<double>(count) >= cfg.abundance_floor * static_cast<double>(population.size()))
      common.push_back(id);
  }
  // Nothing clears the floor only when the population is spread thin.
  if (common.empty()) common = all;
  return {Community(std::move(all)), Community(std::move(common)), std::move(abundance), std::move(trace)};
}

inline SimResult run_evolution(const NKLandscape& landscape, const SimConfig& cfg) {
  return run_evolution(landscape, nk_phenotypes(landscape), cfg);
}

// ---------------------------------------------------------------------------
// Validation against a graph

struct ReplicateOutcome {
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  Community final_community;
  Community filtered_community;
  std::optional<std::size_t> exact_sink;     // sink node equal to final_community
  std::optional<std::size_t> filtered_sink;  // sink node equal to filtered_community
};

struct ValidationTally {
  std::vector<ReplicateOutcome> outcomes;
  std::vector<std::size_t> sinks;             // predicted sink node ids
  std::map<std::size_t, std::size_t> per_sink;  // filtered matches by sink node
  std::size_t other = 0;                       // filtered communities matching no sink
  std::size_t exact_matches = 0;

  std::size_t filtered_matches() const { return outcomes.size() - other; }
  double fraction_matched() const {
    return outcomes.empty() ? 0.0 : static_cast<double>(filtered_matches()) / static_cast<double>(outcomes.size());
  }
};

class landscape_graph_mismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Throws landscape_graph_mismatch unless the graph's phenotype table is the
/// landscape's phenotype grouping.
inline void check_compatible(const NkPhenotypes& groups, const AssemblyGraph& graph) {
  if (graph.phenotypes.scores != groups.scores)
    throw landscape_graph_mismatch("graph phenotypes do not match the landscape's phenotypes");
}

/// Seed of replicate r: derive_seed(cfg.seed, r).
inline ValidationTally validate(const NKLandscape& landscape, const SimConfig& cfg, std::size_t replicates,
                                const AssemblyGraph& graph, std::size_t workers = 1) {
  const auto groups = nk_phenotypes(landscape);
  check_compatible(groups, graph);
  cfg.validate();

  ValidationTally tally;
  tally.sinks = sinks(graph);
  std::vector<std::optional<ReplicateOutcome>> slots(replicates);
  parallel_for(replicates, workers, [&](std::size_t r) {
    SimConfig run = cfg;
    run.seed = derive_seed(cfg.seed, r);
    run.record_trace = false;
    auto result = run_evolution(landscape, groups, run);
    ReplicateOutcome o{r, run.seed, std::move(result.final_community), std::move(result.filtered_community),
                       std::nullopt, std::nullopt};
    for (auto s : tally.sinks) {
      const auto& c = graph.node(s).community;
      if (c == o.final_community) o.exact_sink = s;
      if (c == o.filtered_community) o.filtered_sink = s;
    }
    slots[r] = std::move(o);
  });
  for (auto& s : slots) {
    auto& o = *s;
    if (o.exact_sink) ++tally.exact_matches;
    if (o.filtered_sink) ++tally.per_sink[*o.filtered_sink];
    else ++tally.other;
    tally.outcomes.push_back(std::move(o));
  }
  return tally;
}

/// Replicates without a graph: final communities only.
inline std::vector<ReplicateOutcome> run_replicates(const NKLandscape& landscape, const SimConfig& cfg,
                                                    std::size_t replicates, std::size_t workers = 1) {
  const auto groups = nk_phenotypes(landscape);
  cfg.validate();
  std::vector<std::optional<ReplicateOutcome>> slots(replicates);
  parallel_for(replicates, workers, [&](std::size_t r) {
    SimConfig run = cfg;
    run.seed = derive_seed(cfg.seed, r);
    auto result = run_evolution(landscape, groups, run);
    slots[r] = ReplicateOutcome{r, run.seed, std::move(result.final_community),
                                std::move(result.filtered_community), std::nullopt, std::nullopt};
  });
  std::vector<ReplicateOutcome> out;
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace cag
