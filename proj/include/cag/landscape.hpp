#pragma once

// NK fitness landscapes whose per-site contributions act as separate
// lexicase criteria.
//
// Conventions:
//  * Site i reads itself and its k successors with wraparound. The table
//    index is sum_j bit[(i + j) % n] << j, so site i is the low bit.
//  * Genotype index g has bit[i] = (g >> i) & 1; "000" is genotype 0 and
//    strings are written site 0 first.
//  * Tables are filled site-major from std::mt19937_64(seed), one draw per
//    entry, mapped to [0,1) as (draw >> 11) * 2^-53.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cag/phenonet.hpp"
#include "cag/rng.hpp"
#include "cag/text.hpp"

namespace cag {

class Genotype {
 public:
  Genotype() = default;

  explicit Genotype(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto b : bits_)
      if (b > 1) throw std::invalid_argument("genotype bits must be 0 or 1");
  }

  static Genotype from_string(std::string_view s) {
    std::vector<std::uint8_t> bits;
    bits.reserve(s.size());
    for (char c : s) {
      if (c != '0' && c != '1') throw std::invalid_argument("genotype string must be 0/1");
      bits.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    return Genotype(std::move(bits));
  }

  static Genotype from_index(std::uint64_t index, std::size_t n) {
    if (n < 64 && (index >> n) != 0) throw std::invalid_argument("genotype index exceeds 2^n");
    std::vector<std::uint8_t> bits(n);
    for (std::size_t i = 0; i < n && i < 64; ++i) bits[i] = (index >> i) & 1U;
    return Genotype(std::move(bits));
  }

  std::size_t size() const noexcept { return bits_.size(); }
  bool operator[](std::size_t site) const { return bits_.at(site) != 0; }

  std::uint64_t index() const {
    if (bits_.size() > 64) throw std::length_error("genotype longer than 64 sites has no index");
    std::uint64_t g = 0;
    for (std::size_t i = 0; i < bits_.size(); ++i) g |= std::uint64_t{bits_[i]} << i;
    return g;
  }

  Genotype flipped(std::size_t site) const {
    Genotype copy = *this;
    copy.bits_.at(site) ^= 1U;
    return copy;
  }

  std::string to_string() const {
    std::string s;
    for (auto b : bits_) s += static_cast<char>('0' + b);
    return s;
  }

  auto operator<=>(const Genotype&) const = default;

 private:
  std::vector<std::uint8_t> bits_;
};

class NKLandscape {
 public:
  /// Explicit tables; each must hold 2^(k+1) values in [0,1).
  NKLandscape(std::size_t n, std::size_t k, std::uint64_t seed,
              std::vector<std::vector<double>> tables)
      : n_(n), k_(k), seed_(seed), tables_(std::move(tables)) {
    check_shape(n_, k_);
    if (tables_.size() != n_) throw std::invalid_argument("expected one table per site");
    for (const auto& t : tables_) {
      if (t.size() != table_size()) throw std::invalid_argument("table must hold 2^(k+1) entries");
      for (double v : t)
        if (!(v >= 0.0 && v < 1.0)) throw std::invalid_argument("table entries must lie in [0,1)");
    }
  }

  static void check_shape(std::size_t n, std::size_t k) {
    if (n == 0) throw std::invalid_argument("n must be positive");
    if (k >= n) throw std::invalid_argument("k must be smaller than n");
    if (k + 1 > 24) throw std::invalid_argument("k too large for explicit lookup tables");
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t k() const noexcept { return k_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t table_size() const noexcept { return std::size_t{1} << (k_ + 1); }
  const std::vector<std::vector<double>>& tables() const noexcept { return tables_; }
  const std::vector<double>& table(std::size_t site) const { return tables_.at(site); }

  /// Lookup index for `site`, reading bits through `bit_at(site)`.
  template <class BitAt>
  std::size_t table_index(std::size_t site, BitAt&& bit_at) const {
    std::size_t idx = 0;
    for (std::size_t j = 0; j <= k_; ++j)
      if (bit_at((site + j) % n_)) idx |= std::size_t{1} << j;
    return idx;
  }

  friend bool operator==(const NKLandscape&, const NKLandscape&) = default;

 private:
  std::size_t n_;
  std::size_t k_;
  std::uint64_t seed_;
  std::vector<std::vector<double>> tables_;
};

inline NKLandscape generate_nk(std::size_t n, std::size_t k, std::uint64_t seed) {
  NKLandscape::check_shape(n, k);
  Engine eng(seed);
  const std::size_t size = std::size_t{1} << (k + 1);
  std::vector<std::vector<double>> tables(n, std::vector<double>(size));
  for (auto& table : tables)
    for (auto& v : table) v = uniform_unit(eng);
  return NKLandscape(n, k, seed, std::move(tables));
}

inline ScoreVector evaluate(const NKLandscape& landscape, const Genotype& g) {
  if (g.size() != landscape.n())
    throw std::invalid_argument("genotype length " + std::to_string(g.size()) +
                                " does not match landscape n=" + std::to_string(landscape.n()));
  ScoreVector out(landscape.n());
  for (std::size_t i = 0; i < landscape.n(); ++i)
    out[i] = landscape.table(i)[landscape.table_index(i, [&](std::size_t s) { return g[s]; })];
  return out;
}

/// Same as evaluate() on the genotype with index `g` (n <= 64).
inline ScoreVector evaluate_index(const NKLandscape& landscape, std::uint64_t g) {
  ScoreVector out(landscape.n());
  for (std::size_t i = 0; i < landscape.n(); ++i)
    out[i] = landscape.table(i)[landscape.table_index(i, [&](std::size_t s) { return (g >> s) & 1U; })];
  return out;
}

/// All single-bit mutants, in ascending site order.
inline std::vector<Genotype> neighbors(const Genotype& g) {
  std::vector<Genotype> out;
  out.reserve(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out.push_back(g.flipped(i));
  return out;
}

inline constexpr std::size_t kDefaultEnumerationCap = 20;

/// Exhaustive genotype -> phenotype grouping of a landscape.
///
/// Phenotype ids follow the first genotype index at which each score vector
/// appears, so genotype 0 always maps to phenotype 0.
struct NkPhenotypes {
  std::vector<ScoreVector> scores;                  // by phenotype id
  std::vector<std::vector<std::uint64_t>> members;  // genotype indices per phenotype
  std::vector<PhenotypeId> phenotype_of;            // by genotype index
};

inline NkPhenotypes nk_phenotypes(const NKLandscape& landscape,
                                  std::size_t enumeration_cap = kDefaultEnumerationCap) {
  const std::size_t n = landscape.n();
  if (n > enumeration_cap || n >= 63)
    throw std::invalid_argument("n=" + std::to_string(n) + " exceeds the enumeration cap of " +
                                std::to_string(enumeration_cap));
  const std::uint64_t count = std::uint64_t{1} << n;
  NkPhenotypes out;
  out.phenotype_of.resize(count);
  std::map<ScoreVector, PhenotypeId> ids;
  for (std::uint64_t g = 0; g < count; ++g) {
    auto scores = evaluate_index(landscape, g);
    auto [it, inserted] = ids.emplace(scores, static_cast<PhenotypeId>(out.scores.size()));
    if (inserted) {
      out.scores.push_back(std::move(scores));
      out.members.emplace_back();
    }
    out.phenotype_of[g] = it->second;
    out.members[it->second].push_back(g);
  }
  return out;
}

/// Phenotype network under the single-flip model: each adjacent genotype is
/// reached with probability rate * (1 - rate)^(n - 1), averaged over the
/// source phenotype's genotypes. Multi-flip mass is discarded.
inline PhenotypeNetwork nk_to_network(const NKLandscape& landscape, double per_site_mutation_rate,
                                      std::size_t enumeration_cap = kDefaultEnumerationCap) {
  if (!(per_site_mutation_rate > 0.0 && per_site_mutation_rate < 1.0))
    throw std::invalid_argument("per-site mutation rate must lie in (0,1)");
  const auto groups = nk_phenotypes(landscape, enumeration_cap);
  const std::size_t n = landscape.n();
  double single_flip = per_site_mutation_rate;
  for (std::size_t i = 1; i < n; ++i) single_flip *= 1.0 - per_site_mutation_rate;

  std::vector<Phenotype> phenotypes;
  std::vector<PhenotypeNetwork::EdgeSpec> edges;
  for (PhenotypeId a = 0; a < groups.scores.size(); ++a) {
    std::map<PhenotypeId, std::uint64_t> flips;
    for (auto g : groups.members[a]) {
      for (std::size_t i = 0; i < n; ++i) {
        const PhenotypeId b = groups.phenotype_of[g ^ (std::uint64_t{1} << i)];
        if (b != a) ++flips[b];
      }
    }
    const double genotypes = static_cast<double>(groups.members[a].size());
    for (const auto& [b, count] : flips)
      edges.push_back({a, b, static_cast<double>(count) * single_flip / genotypes});

    std::string label;
    for (auto g : groups.members[a]) label += (label.empty() ? "g" : ",g") + std::to_string(g);
    phenotypes.push_back({a, groups.scores[a], std::move(label)});
  }
  return PhenotypeNetwork(n, std::move(phenotypes), std::move(edges));
}

// ---------------------------------------------------------------------------
// Text format:
//
//   # optional comment lines (the run manifest goes here)
//   nk-landscape 1
//   n <n>
//   k <k>
//   seed <seed>
//   site <i> <v_0> ... <v_{2^(k+1)-1}>     (one line per site, in order)

inline void write_landscape(std::ostream& out, const NKLandscape& landscape,
                            std::string_view comment = {}) {
  if (!comment.empty()) {
    for (auto line : text::split(comment, '\n')) out << "# " << line << '\n';
  }
  out << "nk-landscape 1\n";
  out << "n " << landscape.n() << '\n';
  out << "k " << landscape.k() << '\n';
  out << "seed " << landscape.seed() << '\n';
  for (std::size_t i = 0; i < landscape.n(); ++i) {
    out << "site " << i;
    for (double v : landscape.table(i)) out << ' ' << text::format_double(v);
    out << '\n';
  }
}

inline NKLandscape read_landscape(std::istream& in) {
  std::vector<std::string> lines;
  std::string raw;
  while (std::getline(in, raw)) {
    const auto view = text::trim(raw);
    if (view.empty() || view.front() == '#') continue;
    lines.emplace_back(view);
  }
  auto fail = [](const std::string& what) -> NKLandscape {
    throw std::runtime_error("malformed landscape file: " + what);
  };
  if (lines.size() < 4 || lines[0] != "nk-landscape 1") return fail("missing 'nk-landscape 1' header");

  auto keyed = [&](std::size_t idx, std::string_view key) {
    std::istringstream row(lines[idx]);
    std::string k;
    std::uint64_t v = 0;
    std::string rest;
    if (!(row >> k >> v) || k != key || (row >> rest)) fail("expected '" + std::string(key) + " <int>'");
    return v;
  };
  const auto n = keyed(1, "n");
  const auto k = keyed(2, "k");
  const auto seed = keyed(3, "seed");
  NKLandscape::check_shape(n, k);
  if (lines.size() != 4 + n) return fail("expected " + std::to_string(n) + " site lines");

  const std::size_t size = std::size_t{1} << (k + 1);
  std::vector<std::vector<double>> tables(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::istringstream row(lines[4 + i]);
    std::string key, tok;
    std::size_t site = 0;
    if (!(row >> key >> site) || key != "site" || site != i)
      return fail("site line " + std::to_string(i) + " out of order");
    while (row >> tok) {
      double v = 0.0;
      if (!text::parse_double(tok, v)) return fail("bad value '" + tok + "'");
      tables[i].push_back(v);
    }
    if (tables[i].size() != size) return fail("site " + std::to_string(i) + " has wrong table size");
  }
  return NKLandscape(n, k, seed, std::move(tables));
}

}  // namespace cag
