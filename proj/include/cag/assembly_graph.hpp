#pragma once

// Community assembly graph storage and its text format.

#include <cmath>
#include <cstdint>
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
#include <vector>

#include <json.hpp>

#include "cag/lexicase.hpp"
#include "cag/phenonet.hpp"
#include "cag/text.hpp"

namespace cag {

enum class NodeStatus { explored, frontier, undiscovered };
enum class SelfLoopPolicy { drop, keep };
enum class BuildMode { full, bounded };

inline std::string_view to_string(NodeStatus s) {
  switch (s) {
    case NodeStatus::explored: return "explored";
    case NodeStatus::frontier: return "frontier";
    case NodeStatus::undiscovered: return "undiscovered";
  }
  return "unknown";
}
inline std::string_view to_string(SelfLoopPolicy p) { return p == SelfLoopPolicy::drop ? "drop" : "keep"; }
inline std::string_view to_string(BuildMode m) { return m == BuildMode::full ? "full" : "bounded"; }

struct CagNode {
  std::size_t id = 0;
  Community community;
  NodeStatus status = NodeStatus::frontier;
  double hit_priority = 0.0;
  std::optional<std::size_t> explore_rank;  // set once explored
};

struct CagEdge {
  std::size_t source = 0;
  std::size_t target = 0;
  PhenotypeId invader = 0;
  double probability = 0.0;
};

/// Echo of how a graph was built; serialized alongside it.
struct TraversalInfo {
  BuildMode mode = BuildMode::full;
  std::size_t limit = 0;  // node cap for full builds, exploration budget for bounded
  StabilityConfig stability;
  SelfLoopPolicy self_loops = SelfLoopPolicy::drop;
};

/// Phenotype scores and labels the graph's communities refer to.
struct PhenotypeTable {
  std::size_t criteria_count = 0;
  std::vector<ScoreVector> scores;
  std::vector<std::string> labels;

  static PhenotypeTable from(const PhenotypeNetwork& net) {
    PhenotypeTable t;
    t.criteria_count = net.criteria_count();
    t.scores.assign(net.scores().begin(), net.scores().end());
    for (PhenotypeId i = 0; i < net.size(); ++i) t.labels.push_back(net.label(i));
    return t;
  }
};

class AssemblyGraph {
 public:
  std::size_t add_node(Community community, NodeStatus status, double hit_priority) {
    if (status == NodeStatus::undiscovered)
      throw std::invalid_argument("undiscovered nodes are not stored");
    const std::size_t id = nodes_.size();
    auto [it, inserted] = index_.emplace(community, id);
    if (!inserted) throw std::invalid_argument("community " + community.to_string() + " already has a node");
    nodes_.push_back({id, std::move(community), status, hit_priority, std::nullopt});
    out_.emplace_back();
    return id;
  }

  void mark_explored(std::size_t id, std::size_t rank) {
    auto& n = nodes_.at(id);
    n.status = NodeStatus::explored;
    n.explore_rank = rank;
  }

  void set_priority(std::size_t id, double p) { nodes_.at(id).hit_priority = p; }

  void add_edge(const CagEdge& e) {
    if (e.source >= nodes_.size() || e.target >= nodes_.size())
      throw std::out_of_range("edge endpoint does not exist");
    if (nodes_[e.source].status != NodeStatus::explored)
      throw std::invalid_argument("edge source must be explored");
    if (!(e.probability > 0.0 && e.probability <= 1.0))
      throw std::invalid_argument("edge probability must lie in (0,1]");
    for (auto ei : out_[e.source]) {
      const auto& other = edges_[ei];
      if (other.target == e.target && other.invader == e.invader)
        throw std::invalid_argument("duplicate edge");
    }
    out_[e.source].push_back(edges_.size());
    edges_.push_back(e);
  }

  std::size_t start() const noexcept { return start_; }
  void set_start(std::size_t id) {
    if (id >= nodes_.size()) throw std::out_of_range("start node does not exist");
    start_ = id;
  }

  std::span<const CagNode> nodes() const noexcept { return nodes_; }
  const CagNode& node(std::size_t id) const { return nodes_.at(id); }
  std::size_t size() const noexcept { return nodes_.size(); }

  std::span<const CagEdge> edges() const noexcept { return edges_; }
  /// Indices into edges() for edges leaving `id`, in insertion order.
  std::span<const std::size_t> out_edges(std::size_t id) const { return out_.at(id); }

  std::optional<std::size_t> find(const Community& c) const {
    auto it = index_.find(c);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  NodeStatus status(const Community& c) const {
    auto id = find(c);
    return id ? nodes_[*id].status : NodeStatus::undiscovered;
  }

  std::size_t explored_count() const {
    std::size_t n = 0;
    for (const auto& node : nodes_) n += node.status == NodeStatus::explored;
    return n;
  }

  void check_node(std::size_t id) const {
    if (id >= nodes_.size()) throw std::out_of_range("unknown node id " + std::to_string(id));
  }

  TraversalInfo info;
  PhenotypeTable phenotypes;

 private:
  std::vector<CagNode> nodes_;
  std::vector<CagEdge> edges_;
  std::vector<std::vector<std::size_t>> out_;
  std::map<Community, std::size_t> index_;
  std::size_t start_ = 0;
};

// ---------------------------------------------------------------------------
// Text format (JSON, one record per line; see docs/formats.md)

inline constexpr int kGraphFormatVersion = 1;

inline void write_graph(std::ostream& out, const AssemblyGraph& g,
                        const nlohmann::ordered_json& manifest = nullptr) {
  using text::format_double;
  out << "{\n";
  if (!manifest.is_null()) out << "\"manifest\":" << manifest.dump() << ",\n";
  out << "\"format\":\"assembly-graph\",\n";
  out << "\"version\":" << kGraphFormatVersion << ",\n";
  out << "\"traversal\":{\"mode\":\"" << to_string(g.info.mode) << "\",\"limit\":" << g.info.limit
      << ",\"population_size\":" << g.info.stability.population_size
      << ",\"generations\":" << g.info.stability.generations
      << ",\"survival_threshold\":" << format_double(g.info.stability.survival_threshold)
      << ",\"self_loops\":\"" << to_string(g.info.self_loops) << "\"},\n";
  out << "\"criteria_count\":" << g.phenotypes.criteria_count << ",\n";
  out << "\"phenotypes\":[";
  for (std::size_t i = 0; i < g.phenotypes.scores.size(); ++i) {
    const std::string& label = i < g.phenotypes.labels.size() ? g.phenotypes.labels[i] : std::string();
    out << (i == 0 ? "\n" : ",\n")
        << detail::phenotype_line(static_cast<PhenotypeId>(i), g.phenotypes.scores[i], label);
  }
  out << (g.phenotypes.scores.empty() ? "],\n" : "\n],\n");
  out << "\"start\":" << g.start() << ",\n";
  out << "\"nodes\":[";
  for (const auto& n : g.nodes()) {
    out << (n.id == 0 ? "\n" : ",\n") << "{\"id\":" << n.id << ",\"members\":["
        << text::join(n.community.members(), ",", [](PhenotypeId p) { return std::to_string(p); })
        << "],\"status\":\"" << to_string(n.status) << "\",\"priority\":" << format_double(n.hit_priority);
    if (n.explore_rank) out << ",\"explore_rank\":" << *n.explore_rank;
    out << "}";
  }
  out << (g.size() == 0 ? "],\n" : "\n],\n");
  out << "\"edges\":[";
  bool first = true;
  for (const auto& e : g.edges()) {
    out << (first ? "\n" : ",\n") << "{\"source\":" << e.source << ",\"target\":" << e.target
        << ",\"invader\":" << e.invader << ",\"probability\":" << format_double(e.probability) << "}";
    first = false;
  }
  out << (first ? "]\n}\n" : "\n]\n}\n");
}

inline std::string write_graph(const AssemblyGraph& g, const nlohmann::ordered_json& manifest = nullptr) {
  std::ostringstream out;
  write_graph(out, g, manifest);
  return out.str();
}

inline AssemblyGraph read_graph(std::istream& in) {
  std::stringstream buffer;
  buffer << in.rdbuf();
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(buffer.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("malformed graph file: ") + e.what());
  }
  auto fail = [](const std::string& what) { return std::runtime_error("malformed graph file: " + what); };
  try {
    if (root.value("format", "") != "assembly-graph") throw fail("not an assembly-graph document");
    if (root.at("version").get<int>() != kGraphFormatVersion) throw fail("unsupported version");

    AssemblyGraph g;
    const auto& tr = root.at("traversal");
    const auto mode = tr.at("mode").get<std::string>();
    if (mode != "full" && mode != "bounded") throw fail("unknown traversal mode '" + mode + "'");
    g.info.mode = mode == "full" ? BuildMode::full : BuildMode::bounded;
    g.info.limit = tr.at("limit").get<std::size_t>();
    g.info.stability.population_size = tr.at("population_size").get<std::size_t>();
    g.info.stability.generations = tr.at("generations").get<std::size_t>();
    g.info.stability.survival_threshold = tr.at("survival_threshold").get<double>();
    const auto loops = tr.at("self_loops").get<std::string>();
    if (loops != "drop" && loops != "keep") throw fail("unknown self_loops policy '" + loops + "'");
    g.info.self_loops = loops == "drop" ? SelfLoopPolicy::drop : SelfLoopPolicy::keep;

    g.phenotypes.criteria_count = root.at("criteria_count").get<std::size_t>();
    for (const auto& p : root.at("phenotypes")) {
      if (p.at("id").get<std::size_t>() != g.phenotypes.scores.size()) throw fail("phenotype ids not dense");
      auto scores = p.at("scores").get<ScoreVector>();
      if (scores.size() != g.phenotypes.criteria_count) throw fail("ragged phenotype scores");
      g.phenotypes.scores.push_back(std::move(scores));
      g.phenotypes.labels.push_back(p.value("label", std::string()));
    }

    for (const auto& n : root.at("nodes")) {
      if (n.at("id").get<std::size_t>() != g.size()) throw fail("node ids not dense and ordered");
      const auto status = n.at("status").get<std::string>();
      NodeStatus s;
      if (status == "explored") s = NodeStatus::explored;
      else if (status == "frontier") s = NodeStatus::frontier;
      else throw fail("bad node status '" + status + "'");
      auto members = n.at("members").get<std::vector<PhenotypeId>>();
      for (auto m : members)
        if (!g.phenotypes.scores.empty() && m >= g.phenotypes.scores.size())
          throw fail("node member outside the phenotype table");
      const std::size_t id = g.add_node(Community(std::move(members)), NodeStatus::frontier,
                                        n.at("priority").get<double>());
      if (s == NodeStatus::explored) {
        if (!n.contains("explore_rank")) throw fail("explored node lacks explore_rank");
        g.mark_explored(id, n.at("explore_rank").get<std::size_t>());
      }
    }
    for (const auto& e : root.at("edges")) {
      g.add_edge({e.at("source").get<std::size_t>(), e.at("target").get<std::size_t>(),
                  e.at("invader").get<PhenotypeId>(), e.at("probability").get<double>()});
    }
    g.set_start(root.at("start").get<std::size_t>());
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw fail(e.what());
  } catch (const std::invalid_argument& e) {
    throw fail(e.what());
  } catch (const std::out_of_range& e) {
    throw fail(e.what());
  }
}

inline AssemblyGraph read_graph(std::string_view doc) {
  std::istringstream in{std::string(doc)};
  return read_graph(in);
}

}  // namespace cag
