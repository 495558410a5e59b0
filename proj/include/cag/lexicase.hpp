#pragma once

// Exact lexicase selection probabilities, survival probabilities and stable
// communities.
//
// p_lex follows the recursive definition: average over the first criterion
// drawn of the probability under the pool of that criterion's elites, with
// uniform choice once one score vector (or no criterion) remains. Three
// reductions keep it tractable while staying exactly equal to the naive
// recursion:
//  * identical score vectors are merged and their probability split evenly;
//  * criteria on which the whole pool ties are dropped (filtering on them is
//    a no-op, and the relative order of the rest is still uniform);
//  * criteria inducing the same elite set are drawn as one group, since once
//    one is drawn the others tie on the surviving pool.
// Subproblems are memoized on (pool, remaining criteria) within one call.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "cag/phenonet.hpp"

namespace cag {

using Rational = boost::multiprecision::cpp_rational;

/// A set of phenotype ids in ascending order. Never empty.
class Community {
 public:
  explicit Community(std::vector<PhenotypeId> members) : members_(std::move(members)) {
    if (members_.empty()) throw std::invalid_argument("community must be non-empty");
    std::sort(members_.begin(), members_.end());
    if (std::adjacent_find(members_.begin(), members_.end()) != members_.end())
      throw std::invalid_argument("community has duplicate members");
  }
  Community(std::initializer_list<PhenotypeId> members)
      : Community(std::vector<PhenotypeId>(members)) {}

  std::span<const PhenotypeId> members() const noexcept { return members_; }
  std::size_t size() const noexcept { return members_.size(); }
  bool contains(PhenotypeId id) const {
    return std::binary_search(members_.begin(), members_.end(), id);
  }

  Community with(PhenotypeId id) const {
    if (contains(id)) throw std::invalid_argument("phenotype already in community");
    auto copy = members_;
    copy.push_back(id);
    return Community(std::move(copy));
  }

  std::string to_string() const {
    return "{" + text::join(members_, ",", [](PhenotypeId id) { return std::to_string(id); }) + "}";
  }

  /// Lexicographic on the member list; the canonical community order.
  auto operator<=>(const Community&) const = default;

 private:
  std::vector<PhenotypeId> members_;
};

struct SelectionDistribution {
  std::vector<PhenotypeId> members;
  std::vector<double> probability;

  double of(PhenotypeId id) const {
    for (std::size_t i = 0; i < members.size(); ++i)
      if (members[i] == id) return probability[i];
    return 0.0;
  }
};

struct StabilityConfig {
  std::size_t population_size = 100;
  std::size_t generations = 1;
  double survival_threshold = 0.5;

  void validate() const {
    if (population_size == 0) throw std::invalid_argument("population size must be positive");
    if (generations == 0) throw std::invalid_argument("generations must be positive");
    if (!(survival_threshold > 0.0 && survival_threshold < 1.0))
      throw std::invalid_argument("survival threshold must lie in (0,1)");
  }

  friend bool operator==(const StabilityConfig&, const StabilityConfig&) = default;
};

/// Above these sizes p_lex runs the recursion in double instead of Rational.
inline constexpr std::size_t kExactCriteriaLimit = 12;
inline constexpr std::size_t kExactPoolLimit = 32;

namespace detail {

inline void check_pool(std::span<const ScoreVector* const> pool) {
  if (pool.empty()) throw std::invalid_argument("p_lex needs a non-empty pool");
  const std::size_t width = pool.front()->size();
  if (width == 0) throw std::invalid_argument("score vectors must have at least one criterion");
  for (const auto* s : pool)
    if (s->size() != width) throw std::invalid_argument("ragged score vectors");
}

/// Distinct score vectors of a pool plus each member's group.
struct Dedup {
  std::vector<const ScoreVector*> reps;
  std::vector<std::size_t> group_of;
  std::vector<std::size_t> multiplicity;
};

inline Dedup dedup(std::span<const ScoreVector* const> pool) {
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return *pool[a] < *pool[b]; });
  Dedup d;
  d.group_of.assign(pool.size(), 0);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto* s = pool[order[i]];
    if (i == 0 || *d.reps.back() != *s) {
      d.reps.push_back(s);
      d.multiplicity.push_back(0);
    }
    d.group_of[order[i]] = d.reps.size() - 1;
    ++d.multiplicity.back();
  }
  return d;
}

/// Number of criteria on which the deduplicated pool is not all tied.
inline std::size_t informative_criteria(const std::vector<const ScoreVector*>& reps) {
  const std::size_t width = reps.front()->size();
  std::size_t count = 0;
  for (std::size_t c = 0; c < width; ++c) {
    const double v = (*reps.front())[c];
    for (const auto* r : reps)
      if ((*r)[c] != v) {
        ++count;
        break;
      }
  }
  return count;
}

template <class Value>
class PlexSolver {
 public:
  explicit PlexSolver(const std::vector<const ScoreVector*>& reps)
      : reps_(reps), width_(reps.front()->size()), words_((width_ + 63) / 64) {}

  /// Probability per representative (aligned with reps).
  std::vector<Value> solve_all() {
    std::vector<std::uint32_t> pool(reps_.size());
    std::iota(pool.begin(), pool.end(), 0U);
    std::vector<std::uint64_t> criteria(words_, 0);
    for (std::size_t c = 0; c < width_; ++c) criteria[c / 64] |= std::uint64_t{1} << (c % 64);
    return solve(pool, criteria);
  }

 private:
  struct Key {
    std::vector<std::uint32_t> pool;
    std::vector<std::uint64_t> criteria;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      std::uint64_t h = 0xcbf29ce484222325ULL;
      auto mix = [&](std::uint64_t v) { h = (h ^ v) * 0x100000001b3ULL; };
      for (auto p : k.pool) mix(p);
      mix(0xffffffffULL);
      for (auto c : k.criteria) mix(c);
      return static_cast<std::size_t>(h);
    }
  };

  bool has(const std::vector<std::uint64_t>& set, std::size_t c) const {
    return (set[c / 64] >> (c % 64)) & 1U;
  }

  std::vector<Value> solve(const std::vector<std::uint32_t>& pool,
                           const std::vector<std::uint64_t>& remaining) {
    if (pool.size() == 1) return {Value(1)};

    // Elite set of each informative criterion, grouped by elite set.
    std::map<std::vector<std::uint32_t>, std::vector<std::size_t>> groups;
    std::vector<std::uint64_t> informative(words_, 0);
    std::size_t informative_count = 0;
    for (std::size_t c = 0; c < width_; ++c) {
      if (!has(remaining, c)) continue;
      double best = (*reps_[pool.front()])[c];
      for (auto p : pool) best = std::max(best, (*reps_[p])[c]);
      std::vector<std::uint32_t> elite;
      for (auto p : pool)
        if ((*reps_[p])[c] == best) elite.push_back(p);
      if (elite.size() == pool.size()) continue;
      informative[c / 64] |= std::uint64_t{1} << (c % 64);
      ++informative_count;
      groups[std::move(elite)].push_back(c);
    }
    if (informative_count == 0) {
      // Unreachable for distinct representatives; kept for completeness.
      return std::vector<Value>(pool.size(), Value(1) / Value(pool.size()));
    }

    Key key{pool, informative};
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;

    std::vector<Value> result(pool.size(), Value(0));
    for (const auto& [elite, members] : groups) {
      auto next = informative;
      for (auto c : members) next[c / 64] &= ~(std::uint64_t{1} << (c % 64));
      const auto sub = solve(elite, next);
      const Value weight = Value(members.size()) / Value(informative_count);
      // elite is a sorted subsequence of pool.
      std::size_t j = 0;
      for (std::size_t i = 0; i < pool.size() && j < elite.size(); ++i) {
        if (pool[i] == elite[j]) {
          result[i] += weight * sub[j];
          ++j;
        }
      }
    }
    memo_.emplace(std::move(key), result);
    return result;
  }

  const std::vector<const ScoreVector*>& reps_;
  std::size_t width_;
  std::size_t words_;
  std::unordered_map<Key, std::vector<Value>, KeyHash> memo_;
};

template <class Value>
std::vector<Value> p_lex_with(std::span<const ScoreVector* const> pool) {
  check_pool(pool);
  const auto d = dedup(pool);
  PlexSolver<Value> solver(d.reps);
  const auto by_rep = solver.solve_all();
  std::vector<Value> out;
  out.reserve(pool.size());
  for (auto g : d.group_of) out.push_back(by_rep[g] / Value(d.multiplicity[g]));
  return out;
}

inline std::vector<const ScoreVector*> pointers(std::span<const ScoreVector> pool) {
  std::vector<const ScoreVector*> out;
  out.reserve(pool.size());
  for (const auto& s : pool) out.push_back(&s);
  return out;
}

inline std::vector<const ScoreVector*> community_pointers(const Community& community,
                                                          std::span<const ScoreVector> scores_by_id) {
  std::vector<const ScoreVector*> out;
  out.reserve(community.size());
  for (auto id : community.members()) {
    if (id >= scores_by_id.size())
      throw std::out_of_range("phenotype " + std::to_string(id) + " has no scores");
    out.push_back(&scores_by_id[id]);
  }
  return out;
}

}  // namespace detail

/// Exact selection probabilities, aligned with `pool`.
inline std::vector<Rational> p_lex_exact(std::span<const ScoreVector> pool) {
  const auto ptrs = detail::pointers(pool);
  return detail::p_lex_with<Rational>(ptrs);
}

/// Same recursion evaluated in double.
inline std::vector<double> p_lex_float(std::span<const ScoreVector> pool) {
  const auto ptrs = detail::pointers(pool);
  return detail::p_lex_with<double>(ptrs);
}

/// Rational evaluation rounded to double when the pool is small enough
/// (kExactCriteriaLimit informative criteria, kExactPoolLimit distinct
/// vectors); the double recursion otherwise.
inline std::vector<double> p_lex(std::span<const ScoreVector* const> pool) {
  detail::check_pool(pool);
  const auto d = detail::dedup(pool);
  if (d.reps.size() <= kExactPoolLimit &&
      detail::informative_criteria(d.reps) <= kExactCriteriaLimit) {
    const auto exact = detail::p_lex_with<Rational>(pool);
    std::vector<double> out;
    out.reserve(exact.size());
    for (const auto& v : exact) out.push_back(v.convert_to<double>());
    return out;
  }
  return detail::p_lex_with<double>(pool);
}

inline std::vector<double> p_lex(std::span<const ScoreVector> pool) {
  const auto ptrs = detail::pointers(pool);
  return p_lex(std::span<const ScoreVector* const>(ptrs));
}

inline SelectionDistribution p_lex(const Community& community,
                                   std::span<const ScoreVector> scores_by_id) {
  const auto ptrs = detail::community_pointers(community, scores_by_id);
  SelectionDistribution dist;
  dist.members.assign(community.members().begin(), community.members().end());
  dist.probability = p_lex(std::span<const ScoreVector* const>(ptrs));
  return dist;
}

/// Probability of persisting through G generations of S selection events:
/// (1 - (1 - p)^S)^G.
inline double p_survival(double selection_probability, const StabilityConfig& cfg) {
  if (!(selection_probability >= 0.0 && selection_probability <= 1.0))
    throw std::invalid_argument("selection probability must lie in [0,1]");
  const double per_generation =
      1.0 - std::pow(1.0 - selection_probability, static_cast<double>(cfg.population_size));
  return std::pow(per_generation, static_cast<double>(cfg.generations));
}

/// Repeatedly removes, all at once, every member whose survival probability
/// falls below the threshold, until nothing is removed. Returns nullopt if
/// every member is removed.
inline std::optional<Community> stabilize(const Community& candidate,
                                          std::span<const ScoreVector> scores_by_id,
                                          const StabilityConfig& cfg) {
  cfg.validate();
  std::vector<PhenotypeId> current(candidate.members().begin(), candidate.members().end());
  while (true) {
    std::vector<const ScoreVector*> ptrs;
    ptrs.reserve(current.size());
    for (auto id : current) {
      if (id >= scores_by_id.size())
        throw std::out_of_range("phenotype " + std::to_string(id) + " has no scores");
      ptrs.push_back(&scores_by_id[id]);
    }
    const auto probs = p_lex(std::span<const ScoreVector* const>(ptrs));
    std::vector<PhenotypeId> kept;
    for (std::size_t i = 0; i < current.size(); ++i)
      if (p_survival(probs[i], cfg) >= cfg.survival_threshold) kept.push_back(current[i]);
    if (kept.empty()) return std::nullopt;
    if (kept.size() == current.size()) return Community(std::move(kept));
    current = std::move(kept);
  }
}

inline bool is_stable(const Community& candidate, std::span<const ScoreVector> scores_by_id,
                      const StabilityConfig& cfg) {
  const auto fixed = stabilize(candidate, scores_by_id, cfg);
  return fixed && *fixed == candidate;
}

/// Stabilized community after `invader` joins. An invasion that would leave
/// nothing standing counts as failed and returns the residents unchanged.
inline Community invade(const Community& community, PhenotypeId invader,
                        std::span<const ScoreVector> scores_by_id, const StabilityConfig& cfg) {
  if (community.contains(invader))
    throw std::invalid_argument("invader " + std::to_string(invader) + " already present");
  auto result = stabilize(community.with(invader), scores_by_id, cfg);
  return result ? std::move(*result) : community;
}

}  // namespace cag
