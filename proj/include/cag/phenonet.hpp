#pragma once

// Phenotype mutation networks: the substrate community assembly graphs are
// built over. Networks come either from an exhaustively enumerated NK
// landscape or from externally sampled mutant data.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cag/text.hpp"

namespace cag {

using ScoreVector = std::vector<double>;
using PhenotypeId = std::uint32_t;

struct Phenotype {
  PhenotypeId id = 0;
  ScoreVector scores;
  std::string label;
};

struct MutationEdge {
  PhenotypeId target = 0;
  double probability = 0.0;

  friend bool operator==(const MutationEdge&, const MutationEdge&) = default;
};

enum class NetworkErrorKind {
  empty_document,
  syntax,
  not_an_object,
  wrong_format,
  unknown_field,
  missing_field,
  wrong_type,
  unsupported_version,
  bad_criteria_count,
  ragged_scores,
  non_finite_score,
  no_phenotypes,
  duplicate_id,
  non_dense_ids,
  duplicate_scores,
  unknown_endpoint,
  self_edge,
  duplicate_edge,
  weight_out_of_range,
  row_sum_exceeded,
};

inline std::string_view to_string(NetworkErrorKind kind) {
  switch (kind) {
    case NetworkErrorKind::empty_document: return "empty_document";
    case NetworkErrorKind::syntax: return "syntax";
    case NetworkErrorKind::not_an_object: return "not_an_object";
    case NetworkErrorKind::wrong_format: return "wrong_format";
    case NetworkErrorKind::unknown_field: return "unknown_field";
    case NetworkErrorKind::missing_field: return "missing_field";
    case NetworkErrorKind::wrong_type: return "wrong_type";
    case NetworkErrorKind::unsupported_version: return "unsupported_version";
    case NetworkErrorKind::bad_criteria_count: return "bad_criteria_count";
    case NetworkErrorKind::ragged_scores: return "ragged_scores";
    case NetworkErrorKind::non_finite_score: return "non_finite_score";
    case NetworkErrorKind::no_phenotypes: return "no_phenotypes";
    case NetworkErrorKind::duplicate_id: return "duplicate_id";
    case NetworkErrorKind::non_dense_ids: return "non_dense_ids";
    case NetworkErrorKind::duplicate_scores: return "duplicate_scores";
    case NetworkErrorKind::unknown_endpoint: return "unknown_endpoint";
    case NetworkErrorKind::self_edge: return "self_edge";
    case NetworkErrorKind::duplicate_edge: return "duplicate_edge";
    case NetworkErrorKind::weight_out_of_range: return "weight_out_of_range";
    case NetworkErrorKind::row_sum_exceeded: return "row_sum_exceeded";
  }
  return "unknown";
}

/// Raised for malformed network documents and invariant violations.
class network_error : public std::runtime_error {
 public:
  network_error(NetworkErrorKind kind, const std::string& what, std::size_t line = 0,
                std::size_t column = 0)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), line_(line),
        column_(column) {}

  NetworkErrorKind kind() const noexcept { return kind_; }
  /// 1-based position for syntax errors, 0 otherwise.
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  NetworkErrorKind kind_;
  std::size_t line_;
  std::size_t column_;
};

/// Row sums may exceed 1 by at most this much (accumulated rounding).
inline constexpr double kRowSumSlack = 1e-9;

/// Directed mutation-probability graph among phenotypes.
///
/// Ids are dense 0..P-1. weight(a->b) is the probability that one
/// reproduction of `a` yields `b`; the residual 1 - row sum is the chance of
/// no phenotypic change and is never stored as a self edge.
class PhenotypeNetwork {
 public:
  struct EdgeSpec {
    PhenotypeId source;
    PhenotypeId target;
    double probability;
  };

  PhenotypeNetwork(std::size_t criteria_count, std::vector<Phenotype> phenotypes,
                   std::vector<EdgeSpec> edges)
      : criteria_count_(criteria_count) {
    if (criteria_count_ == 0)
      throw network_error(NetworkErrorKind::bad_criteria_count, "criteria_count must be >= 1");
    if (phenotypes.empty())
      throw network_error(NetworkErrorKind::no_phenotypes, "network has no phenotypes");

    std::vector<bool> seen(phenotypes.size(), false);
    for (const auto& p : phenotypes) {
      if (p.id >= phenotypes.size()) {
        throw network_error(NetworkErrorKind::non_dense_ids,
                            "phenotype id " + std::to_string(p.id) + " outside 0.." +
                                std::to_string(phenotypes.size() - 1));
      }
      if (seen[p.id])
        throw network_error(NetworkErrorKind::duplicate_id,
                            "phenotype id " + std::to_string(p.id) + " listed twice");
      seen[p.id] = true;
      if (p.scores.size() != criteria_count_) {
        throw network_error(NetworkErrorKind::ragged_scores,
                            "phenotype " + std::to_string(p.id) + " has " +
                                std::to_string(p.scores.size()) + " scores, expected " +
                                std::to_string(criteria_count_));
      }
      for (double s : p.scores)
        if (!std::isfinite(s))
          throw network_error(NetworkErrorKind::non_finite_score,
                              "phenotype " + std::to_string(p.id) + " has a non-finite score");
    }

    scores_.resize(phenotypes.size());
    labels_.resize(phenotypes.size());
    for (auto& p : phenotypes) {
      scores_[p.id] = std::move(p.scores);
      labels_[p.id] = std::move(p.label);
    }
    std::map<ScoreVector, PhenotypeId> distinct;
    for (std::size_t i = 0; i < scores_.size(); ++i) {
      auto [it, fresh] = distinct.emplace(scores_[i], static_cast<PhenotypeId>(i));
      if (!fresh)
        throw network_error(NetworkErrorKind::duplicate_scores,
                            "phenotypes " + std::to_string(it->second) + " and " + std::to_string(i) +
                                " have identical scores");
    }

    out_.resize(scores_.size());
    for (const auto& e : edges) {
      if (e.source >= scores_.size() || e.target >= scores_.size()) {
        throw network_error(NetworkErrorKind::unknown_endpoint,
                            "edge " + std::to_string(e.source) + "->" + std::to_string(e.target) +
                                " references an unknown phenotype");
      }
      if (e.source == e.target)
        throw network_error(NetworkErrorKind::self_edge,
                            "self edge on phenotype " + std::to_string(e.source));
      if (!(e.probability >= 0.0 && e.probability <= 1.0)) {
        throw network_error(NetworkErrorKind::weight_out_of_range,
                            "edge " + std::to_string(e.source) + "->" + std::to_string(e.target) +
                                " from source " + std::to_string(e.source) +
                                " has probability outside [0,1]");
      }
      out_[e.source].push_back({e.target, e.probability});
    }
    for (std::size_t s = 0; s < out_.size(); ++s) {
      auto& row = out_[s];
      std::sort(row.begin(), row.end(),
                [](const MutationEdge& a, const MutationEdge& b) { return a.target < b.target; });
      double sum = 0.0;
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i > 0 && row[i].target == row[i - 1].target)
          throw network_error(NetworkErrorKind::duplicate_edge,
                              "edge " + std::to_string(s) + "->" + std::to_string(row[i].target) +
                                  " listed twice");
        sum += row[i].probability;
      }
      if (sum > 1.0 + kRowSumSlack)
        throw network_error(NetworkErrorKind::row_sum_exceeded,
                            "outgoing probabilities of source " + std::to_string(s) + " sum to " +
                                text::format_double(sum));
    }
  }

  std::size_t size() const noexcept { return scores_.size(); }
  std::size_t criteria_count() const noexcept { return criteria_count_; }

  /// Score vectors indexed by phenotype id.
  std::span<const ScoreVector> scores() const noexcept { return scores_; }
  const ScoreVector& scores(PhenotypeId id) const { return scores_.at(id); }
  const std::string& label(PhenotypeId id) const { return labels_.at(id); }

  /// Outgoing edges sorted by target.
  std::span<const MutationEdge> out_edges(PhenotypeId id) const { return out_.at(id); }

  double weight(PhenotypeId from, PhenotypeId to) const {
    const auto row = out_edges(from);
    auto it = std::lower_bound(row.begin(), row.end(), to,
                               [](const MutationEdge& e, PhenotypeId t) { return e.target < t; });
    return (it != row.end() && it->target == to) ? it->probability : 0.0;
  }

  std::size_t edge_count() const noexcept {
    std::size_t n = 0;
    for (const auto& row : out_) n += row.size();
    return n;
  }

  std::optional<PhenotypeId> find(const ScoreVector& scores) const {
    for (std::size_t i = 0; i < scores_.size(); ++i)
      if (scores_[i] == scores) return static_cast<PhenotypeId>(i);
    return std::nullopt;
  }

  friend bool operator==(const PhenotypeNetwork&, const PhenotypeNetwork&) = default;

 private:
  std::size_t criteria_count_;
  std::vector<ScoreVector> scores_;
  std::vector<std::string> labels_;
  std::vector<std::vector<MutationEdge>> out_;
};

// ---------------------------------------------------------------------------
// Mutant samples

struct MutantSampleRecord {
  ScoreVector source_scores;
  ScoreVector mutant_scores;
  std::uint64_t count = 0;
  std::uint64_t total_samples = 0;
};

enum class SampleErrorKind { syntax, empty_input, inconsistent_length, count_exceeds_total };

class sample_error : public std::runtime_error {
 public:
  sample_error(SampleErrorKind kind, const std::string& what, std::size_t line = 0)
      : std::runtime_error(what), kind_(kind), line_(line) {}
  SampleErrorKind kind() const noexcept { return kind_; }
  std::size_t line() const noexcept { return line_; }

 private:
  SampleErrorKind kind_;
  std::size_t line_;
};

/// Pools sampled mutation counts into a network.
///
/// Phenotypes are the distinct score vectors in the input, numbered in
/// lexicographic order of their scores. weight(a->b) is the summed count of
/// a->b records over the summed total_samples of every record whose source is
/// a. Records whose mutant equals the source only add to the denominator.
inline PhenotypeNetwork aggregate_samples(std::span<const MutantSampleRecord> records) {
  if (records.empty()) throw sample_error(SampleErrorKind::empty_input, "no sample records");
  const std::size_t width = records.front().source_scores.size();
  if (width == 0)
    throw sample_error(SampleErrorKind::inconsistent_length, "score vectors must be non-empty");

  std::map<ScoreVector, PhenotypeId> ids;
  for (const auto& r : records) {
    if (r.source_scores.size() != width || r.mutant_scores.size() != width)
      throw sample_error(SampleErrorKind::inconsistent_length,
                         "score vectors differ in length across records");
    if (r.count > r.total_samples)
      throw sample_error(SampleErrorKind::count_exceeds_total, "count exceeds total_samples");
    if (r.total_samples == 0)
      throw sample_error(SampleErrorKind::count_exceeds_total, "total_samples must be positive");
    ids.emplace(r.source_scores, 0);
    ids.emplace(r.mutant_scores, 0);
  }
  PhenotypeId next = 0;
  for (auto& [scores, id] : ids) id = next++;

  std::vector<std::uint64_t> denominators(ids.size(), 0);
  std::map<std::pair<PhenotypeId, PhenotypeId>, std::uint64_t> counts;
  for (const auto& r : records) {
    const PhenotypeId a = ids.at(r.source_scores);
    const PhenotypeId b = ids.at(r.mutant_scores);
    denominators[a] += r.total_samples;
    if (a != b && r.count > 0) counts[{a, b}] += r.count;
  }

  std::vector<Phenotype> phenotypes;
  phenotypes.reserve(ids.size());
  for (const auto& [scores, id] : ids) phenotypes.push_back({id, scores, {}});

  std::vector<PhenotypeNetwork::EdgeSpec> edges;
  edges.reserve(counts.size());
  for (const auto& [pair, count] : counts) {
    edges.push_back({pair.first, pair.second,
                     static_cast<double>(count) / static_cast<double>(denominators[pair.first])});
  }
  return PhenotypeNetwork(width, std::move(phenotypes), std::move(edges));
}

namespace detail {

inline ScoreVector parse_score_list(std::string_view field, std::size_t line) {
  ScoreVector out;
  for (auto part : text::split(field, ',')) {
    double v = 0.0;
    if (!text::parse_double(part, v))
      throw sample_error(SampleErrorKind::syntax,
                         "line " + std::to_string(line) + ": bad score '" + std::string(part) + "'",
                         line);
    out.push_back(v);
  }
  return out;
}

}  // namespace detail

/// Reads tab-separated records: source_scores, mutant_scores, count,
/// total_samples. Scores are comma-joined. Blank lines and lines starting
/// with '#' are skipped.
inline std::vector<MutantSampleRecord> parse_samples(std::istream& in) {
  std::vector<MutantSampleRecord> records;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto view = text::trim(raw);
    if (view.empty() || view.front() == '#') continue;
    std::string_view row = raw;
    if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
    const auto fields = text::split(row, '\t');
    if (fields.size() != 4)
      throw sample_error(SampleErrorKind::syntax,
                         "line " + std::to_string(line) + ": expected 4 tab-separated fields, got " +
                             std::to_string(fields.size()),
                         line);
    MutantSampleRecord r;
    r.source_scores = detail::parse_score_list(fields[0], line);
    r.mutant_scores = detail::parse_score_list(fields[1], line);
    if (!text::parse_uint(fields[2], r.count) || !text::parse_uint(fields[3], r.total_samples) ||
        r.total_samples == 0) {
      throw sample_error(SampleErrorKind::syntax,
                         "line " + std::to_string(line) +
                             ": count must be a non-negative integer and total_samples a positive one",
                         line);
    }
    if (r.count > r.total_samples)
      throw sample_error(SampleErrorKind::count_exceeds_total,
                         "line " + std::to_string(line) + ": count exceeds total_samples", line);
    records.push_back(std::move(r));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Network documents

inline constexpr int kNetworkFormatVersion = 1;

namespace detail {

inline std::string json_string(const std::string& s) { return nlohmann::json(s).dump(); }

inline std::string score_array(const ScoreVector& scores) {
  return "[" + text::join(scores, ",", [](double v) { return text::format_double(v); }) + "]";
}

inline std::pair<std::size_t, std::size_t> line_column(std::string_view doc, std::size_t byte) {
  std::size_t line = 1, column = 1;
  for (std::size_t i = 0; i < byte && i < doc.size(); ++i) {
    if (doc[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

/// Parses JSON, mapping library failures onto network_error(syntax).
inline nlohmann::json parse_json_document(const std::string& doc) {
  try {
    return nlohmann::json::parse(doc);
  } catch (const nlohmann::json::parse_error& e) {
    // e.byte is 1-based and points just past the offending character.
    const auto [line, column] = line_column(doc, e.byte == 0 ? 0 : e.byte - 1);
    throw network_error(NetworkErrorKind::syntax,
                        "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                            e.what(),
                        line, column);
  } catch (const nlohmann::json::out_of_range& e) {
    // Numbers beyond double range are rejected by the reader itself.
    throw network_error(NetworkErrorKind::non_finite_score, e.what());
  }
}

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key,
                                     const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw network_error(NetworkErrorKind::missing_field, where + " lacks field '" + key + "'");
  return *it;
}

inline std::uint64_t require_uint(const nlohmann::json& obj, const char* key,
                                  const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_number_unsigned())
    throw network_error(NetworkErrorKind::wrong_type,
                        where + " field '" + key + "' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

inline double require_number(const nlohmann::json& obj, const char* key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_number())
    throw network_error(NetworkErrorKind::wrong_type, where + " field '" + key + "' must be a number");
  return v.get<double>();
}

inline ScoreVector require_scores(const nlohmann::json& obj, const std::string& where) {
  const auto& v = require(obj, "scores", where);
  if (!v.is_array())
    throw network_error(NetworkErrorKind::wrong_type, where + " field 'scores' must be an array");
  ScoreVector out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number())
      throw network_error(NetworkErrorKind::wrong_type, where + " has a non-numeric score");
    out.push_back(x.get<double>());
  }
  return out;
}

inline void check_keys(const nlohmann::json& obj, std::initializer_list<std::string_view> allowed,
                       const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw network_error(NetworkErrorKind::unknown_field, where + " has unknown field '" + key + "'");
  }
}

inline std::vector<Phenotype> phenotypes_from_json(const nlohmann::json& doc) {
  const auto& arr = require(doc, "phenotypes", "document");
  if (!arr.is_array())
    throw network_error(NetworkErrorKind::wrong_type, "'phenotypes' must be an array");
  std::vector<Phenotype> out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& p = arr[i];
    const std::string where = "phenotypes[" + std::to_string(i) + "]";
    if (!p.is_object()) throw network_error(NetworkErrorKind::wrong_type, where + " must be an object");
    check_keys(p, {"id", "scores", "label"}, where);
    Phenotype ph;
    const auto id = require_uint(p, "id", where);
    if (id > UINT32_MAX) throw network_error(NetworkErrorKind::non_dense_ids, where + " id too large");
    ph.id = static_cast<PhenotypeId>(id);
    ph.scores = require_scores(p, where);
    if (auto it = p.find("label"); it != p.end()) {
      if (!it->is_string())
        throw network_error(NetworkErrorKind::wrong_type, where + " field 'label' must be a string");
      ph.label = it->get<std::string>();
    }
    out.push_back(std::move(ph));
  }
  return out;
}

inline std::string phenotype_line(PhenotypeId id, const ScoreVector& scores,
                                  const std::string& label) {
  std::string line = "{\"id\":" + std::to_string(id) + ",\"scores\":" + score_array(scores);
  if (!label.empty()) line += ",\"label\":" + json_string(label);
  return line + "}";
}

}  // namespace detail

/// Parses a network document (see docs/formats.md). Throws network_error.
inline PhenotypeNetwork parse_network(std::istream& in) {
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string doc = buffer.str();
  if (text::trim(doc).empty()) throw network_error(NetworkErrorKind::empty_document, "network document is empty");
  const nlohmann::json root = detail::parse_json_document(doc);
  if (!root.is_object())
    throw network_error(NetworkErrorKind::not_an_object, "network document must be a JSON object");
  detail::check_keys(root, {"manifest", "format", "version", "criteria_count", "phenotypes", "edges"}, "document");
  if (auto it = root.find("format"); it != root.end() && *it != "phenotype-network")
    throw network_error(NetworkErrorKind::wrong_format, "document is not a phenotype-network");

  const auto version = detail::require_uint(root, "version", "document");
  if (version != kNetworkFormatVersion)
    throw network_error(NetworkErrorKind::unsupported_version,
                        "unsupported network version " + std::to_string(version));
  const auto& cc = detail::require(root, "criteria_count", "document");
  if (!cc.is_number_integer())
    throw network_error(NetworkErrorKind::wrong_type, "'criteria_count' must be an integer");
  if (cc.get<std::int64_t>() <= 0)
    throw network_error(NetworkErrorKind::bad_criteria_count, "criteria_count must be >= 1");

  auto phenotypes = detail::phenotypes_from_json(root);

  const auto& arr = detail::require(root, "edges", "document");
  if (!arr.is_array()) throw network_error(NetworkErrorKind::wrong_type, "'edges' must be an array");
  std::vector<PhenotypeNetwork::EdgeSpec> edges;
  edges.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& e = arr[i];
    const std::string where = "edges[" + std::to_string(i) + "]";
    if (!e.is_object()) throw network_error(NetworkErrorKind::wrong_type, where + " must be an object");
    detail::check_keys(e, {"source", "target", "probability"}, where);
    const auto s = detail::require_uint(e, "source", where);
    const auto t = detail::require_uint(e, "target", where);
    const double p = detail::require_number(e, "probability", where);
    if (s > UINT32_MAX || t > UINT32_MAX)
      throw network_error(NetworkErrorKind::unknown_endpoint, where + " endpoint out of range");
    edges.push_back({static_cast<PhenotypeId>(s), static_cast<PhenotypeId>(t), p});
  }
  return PhenotypeNetwork(cc.get<std::size_t>(), std::move(phenotypes), std::move(edges));
}

inline PhenotypeNetwork parse_network(std::string_view doc) {
  std::istringstream in{std::string(doc)};
  return parse_network(in);
}

/// Canonical form: sorted ids, sorted edge targets, shortest round-trip
/// decimals, one phenotype or edge per line. `manifest`, when not null, is
/// embedded as the first field.
inline void serialize_network(std::ostream& out, const PhenotypeNetwork& net,
                              const nlohmann::ordered_json& manifest = nullptr) {
  out << "{\n";
  if (!manifest.is_null()) out << "\"manifest\":" << manifest.dump() << ",\n";
  out << "\"format\":\"phenotype-network\",\n";
  out << "\"version\":" << kNetworkFormatVersion << ",\n";
  out << "\"criteria_count\":" << net.criteria_count() << ",\n";
  out << "\"phenotypes\":[";
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto id = static_cast<PhenotypeId>(i);
    out << (i == 0 ? "\n" : ",\n") << detail::phenotype_line(id, net.scores(id), net.label(id));
  }
  out << "\n],\n\"edges\":[";
  bool first = true;
  for (std::size_t s = 0; s < net.size(); ++s) {
    for (const auto& e : net.out_edges(static_cast<PhenotypeId>(s))) {
      out << (first ? "\n" : ",\n") << "{\"source\":" << s << ",\"target\":" << e.target
          << ",\"probability\":" << text::format_double(e.probability) << "}";
      first = false;
    }
  }
  out << (first ? "]\n}\n" : "\n]\n}\n");
}

inline std::string serialize_network(const PhenotypeNetwork& net,
                                     const nlohmann::ordered_json& manifest = nullptr) {
  std::ostringstream out;
  serialize_network(out, net, manifest);
  return out.str();
}

}  // namespace cag
