// cagtool: generate or ingest phenotype networks, build community assembly
// graphs, analyze them, and check them against simulated evolution.
//
// Exit status: 0 success, 1 runtime failure, 2 usage error.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "cag/analysis.hpp"
#include "cag/build.hpp"
#include "cag/evosim.hpp"
#include "cag/landscape.hpp"
#include "cag/manifest.hpp"
#include "cag/phenonet.hpp"

namespace {

using cag::text::format_double;

class usage_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << contents;
  if (!out.flush()) throw std::runtime_error("failed writing '" + path + "'");
}

std::size_t worker_count(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<cag::PhenotypeId> parse_id_list(const std::string& s, const char* flag) {
  std::vector<cag::PhenotypeId> ids;
  for (auto part : cag::text::split(s, ',')) {
    std::uint64_t v = 0;
    if (!cag::text::parse_uint(cag::text::trim(part), v) || v > UINT32_MAX)
      throw usage_error(std::string(flag) + ": expected comma-separated ids, got '" + s + "'");
    ids.push_back(static_cast<cag::PhenotypeId>(v));
  }
  return ids;
}

std::string id_list(const std::vector<std::size_t>& ids) {
  return ids.empty() ? "-" : cag::text::join(ids, ",", [](std::size_t v) { return std::to_string(v); });
}

/// The all-zeros genotype's phenotype for NK-derived networks, otherwise the
/// phenotype minimal on every criterion.
std::optional<cag::PhenotypeId> default_start(const cag::PhenotypeNetwork& net) {
  for (cag::PhenotypeId id = 0; id < net.size(); ++id)
    for (auto tok : cag::text::split(net.label(id), ','))
      if (cag::text::trim(tok) == "g0") return id;
  if (net.size() == 0) return std::nullopt;
  cag::ScoreVector low = net.scores(0);
  for (cag::PhenotypeId id = 1; id < net.size(); ++id)
    for (std::size_t c = 0; c < low.size(); ++c) low[c] = std::min(low[c], net.scores(id)[c]);
  return net.find(low);
}

// ---------------------------------------------------------------------------

struct GenNk {
  std::size_t n = 0;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  double rate = 0.001;
  std::size_t cap = cag::kDefaultEnumerationCap;
  std::string out = "nk";

  void attach(CLI::App& sub) {
    sub.add_option("--n", n, "Number of sites")->required()->check(CLI::PositiveNumber);
    sub.add_option("--k", k, "Epistatic neighbours per site")->required();
    sub.add_option("--seed", seed, "Lookup table seed")->capture_default_str();
    sub.add_option("--mutation-rate", rate, "Per-site mutation rate, in (0,1)")->capture_default_str();
    sub.add_option("--enumeration-cap", cap, "Largest n to enumerate")->capture_default_str();
    sub.add_option("--out", out, "Output prefix for PREFIX.landscape.txt and PREFIX.network.json")
        ->capture_default_str();
  }

  int run() const {
    if (k >= n) throw usage_error("--k must be smaller than --n");
    if (!(rate > 0.0 && rate < 1.0)) throw usage_error("--mutation-rate must lie in (0,1)");
    if (n > cap) throw usage_error("--n exceeds --enumeration-cap");

    cag::RunManifest m{"gen-nk", {}};
    m.add("--n", std::to_string(n));
    m.add("--k", std::to_string(k));
    m.add("--seed", std::to_string(seed));
    m.add("--mutation-rate", format_double(rate));
    m.add("--enumeration-cap", std::to_string(cap));
    m.add("--out", out);

    const auto landscape = cag::generate_nk(n, k, seed);
    const auto net = cag::nk_to_network(landscape, rate, cap);
    std::ostringstream land;
    cag::write_landscape(land, landscape, "manifest: " + m.to_line());
    const std::string land_path = out + ".landscape.txt";
    const std::string net_path = out + ".network.json";
    write_file(land_path, land.str());
    write_file(net_path, cag::serialize_network(net, m.to_json()));
    std::cout << "file\tcontents\n"
              << land_path << "\tn=" << n << " k=" << k << " seed=" << seed << "\n"
              << net_path << "\t" << net.size() << " phenotypes, " << net.edge_count() << " edges\n";
    return 0;
  }
};

struct Ingest {
  std::string samples;
  std::string out;

  void attach(CLI::App& sub) {
    sub.add_option("--samples", samples, "Mutant sample records (TSV)")->required();
    sub.add_option("--out", out, "Network file to write")->required();
  }

  int run() const {
    cag::RunManifest m{"ingest", {}};
    m.add("--samples", samples);
    m.add("--out", out);
    std::istringstream in(read_file(samples));
    const auto records = cag::parse_samples(in);
    const auto net = cag::aggregate_samples(records);
    write_file(out, cag::serialize_network(net, m.to_json()));
    std::cout << "records\tphenotypes\tedges\n"
              << records.size() << '\t' << net.size() << '\t' << net.edge_count() << '\n';
    return 0;
  }
};

struct Build {
  std::string network;
  std::string start;
  std::string mode = "bounded";
  std::size_t budget = 100;
  std::size_t cap = 100000;
  std::size_t population_size = 100;
  std::size_t generations = 1;
  double threshold = 0.5;
  std::string self_loops = "drop";
  std::size_t threads = 0;
  std::string out;

  void attach(CLI::App& sub) {
    sub.add_option("--network", network, "Phenotype network file")->required();
    sub.add_option("--start", start, "Start community as comma-separated phenotype ids");
    sub.add_option("--mode", mode, "Traversal")
        ->check(CLI::IsMember({"full", "bounded"}))
        ->capture_default_str();
    sub.add_option("--budget", budget, "Nodes to explore in bounded mode")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub.add_option("--cap", cap, "Node limit in full mode")->check(CLI::PositiveNumber)->capture_default_str();
    sub.add_option("--S,--population-size", population_size, "Population size S")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub.add_option("--G,--generations", generations, "Generations G")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub.add_option("--threshold", threshold, "Survival threshold")->capture_default_str();
    sub.add_option("--self-loops", self_loops, "Failed invasions")
        ->check(CLI::IsMember({"drop", "keep"}))
        ->capture_default_str();
    sub.add_option("--threads", threads, "Worker threads (0: all cores)");
    sub.add_option("--out", out, "Graph file to write")->required();
  }

  int run() const {
    cag::BuildOptions opt;
    opt.stability = {population_size, generations, threshold};
    try {
      opt.stability.validate();
    } catch (const std::invalid_argument& e) {
      throw usage_error(e.what());
    }
    opt.self_loops = self_loops == "keep" ? cag::SelfLoopPolicy::keep : cag::SelfLoopPolicy::drop;
    opt.workers = worker_count(threads);

    const auto net = cag::parse_network(read_file(network));
    std::vector<cag::PhenotypeId> start_ids;
    if (start.empty()) {
      const auto s = default_start(net);
      if (!s) throw std::runtime_error("no default start phenotype; pass --start");
      start_ids.push_back(*s);
    } else {
      start_ids = parse_id_list(start, "--start");
    }
    for (auto id : start_ids)
      if (id >= net.size()) throw std::runtime_error("start phenotype " + std::to_string(id) + " is absent");
    std::vector<cag::PhenotypeId> unique_ids = start_ids;
    std::sort(unique_ids.begin(), unique_ids.end());
    if (std::adjacent_find(unique_ids.begin(), unique_ids.end()) != unique_ids.end())
      throw usage_error("--start lists a phenotype twice");
    const cag::Community start_community(unique_ids);

    cag::RunManifest m{"build", {}};
    m.add("--network", network);
    m.add("--start", cag::text::join(start_community.members(), ",",
                                     [](cag::PhenotypeId p) { return std::to_string(p); }));
    m.add("--mode", mode);
    m.add("--budget", std::to_string(budget));
    m.add("--cap", std::to_string(cap));
    m.add("--population-size", std::to_string(population_size));
    m.add("--generations", std::to_string(generations));
    m.add("--threshold", format_double(threshold));
    m.add("--self-loops", self_loops);
    m.add("--out", out);

    const auto g = mode == "full" ? cag::build_full(net, start_community, opt, cap)
                                  : cag::build_bounded(net, start_community, opt, budget);
    write_file(out, cag::write_graph(g, m.to_json()));
    const auto sink_ids = cag::sinks(g);
    std::cout << "nodes\texplored\tfrontier\tedges\tsinks\n"
              << g.size() << '\t' << g.explored_count() << '\t' << g.size() - g.explored_count() << '\t'
              << g.edges().size() << '\t' << id_list(sink_ids) << '\n';
    return 0;
  }
};

struct Analyze {
  std::string graph;
  std::optional<std::size_t> start;
  std::string target;
  bool optimum = false;
  double damping = 0.85;
  double tolerance = 1e-12;
  std::string out_dot;
  std::string out_report;

  void attach(CLI::App& sub) {
    sub.add_option("--graph", graph, "Assembly graph file")->required();
    sub.add_option("--start", start, "Start node id (default: the graph's start)");
    sub.add_option("--target", target, "Target node id, or 'optimum'");
    sub.add_flag("--optimum", optimum, "Target the optimum phenotype");
    sub.add_option("--damping", damping, "PageRank damping, in (0,1]")->capture_default_str();
    sub.add_option("--tolerance", tolerance, "PageRank L1 tolerance")->capture_default_str();
    sub.add_option("--out-dot", out_dot, "DOT file to write");
    sub.add_option("--out-report", out_report, "Report file to write");
  }

  int run() const {
    if (optimum && !target.empty() && target != "optimum")
      throw usage_error("--optimum conflicts with --target " + target);
    const bool want_optimum = optimum || target == "optimum";
    if (!want_optimum && target.empty()) throw usage_error("missing target: pass --target ID or --optimum");
    std::optional<std::size_t> target_id;
    if (!want_optimum) {
      std::uint64_t v = 0;
      if (!cag::text::parse_uint(target, v)) throw usage_error("--target: expected a node id or 'optimum'");
      target_id = v;
    }
    if (!(damping > 0.0 && damping <= 1.0)) throw usage_error("--damping must lie in (0,1]");
    if (!(tolerance > 0.0)) throw usage_error("--tolerance must be positive");

    const auto g = cag::read_graph(read_file(graph));
    if (g.size() == 0) throw std::runtime_error("graph has no nodes");
    const std::size_t from = start.value_or(g.start());
    if (from >= g.size()) throw std::runtime_error("start node " + std::to_string(from) + " is absent");
    if (target_id && *target_id >= g.size())
      throw std::runtime_error("target node " + std::to_string(*target_id) + " is absent");

    cag::RunManifest m{"analyze", {}};
    m.add("--graph", graph);
    m.add("--start", std::to_string(from));
    m.add("--target", want_optimum ? "optimum" : std::to_string(*target_id));
    m.add("--damping", format_double(damping));
    m.add("--tolerance", format_double(tolerance));
    if (!out_dot.empty()) m.add("--out-dot", out_dot);
    if (!out_report.empty()) m.add("--out-report", out_report);

    const auto r = want_optimum ? cag::report_optimum(g, from) : cag::report(g, from, *target_id);
    const auto pr = cag::pagerank(g, damping, tolerance);

    if (!out_report.empty()) {
      std::ostringstream doc;
      cag::write_report(doc, r, m.to_json());
      write_file(out_report, doc.str());
    }
    if (!out_dot.empty()) {
      cag::DotOverlays overlays;
      overlays.pagerank = pr;
      overlays.damping = damping;
      if (!r.targets.empty()) overlays.highlight = r.targets;
      std::ostringstream dot;
      cag::export_dot(dot, g, overlays, m.to_json());
      write_file(out_dot, dot.str());
    }

    std::cout << "field\tvalue\n";
    std::cout << "start\t" << r.start << '\n';
    std::cout << "target\t" << (want_optimum ? "optimum" : std::to_string(*target_id)) << '\n';
    if (want_optimum)
      std::cout << "optimum_phenotype\t"
                << (r.optimum_phenotype ? std::to_string(*r.optimum_phenotype) : std::string("absent")) << '\n';
    std::cout << "target_present\t" << (r.target_present ? "true" : "false") << '\n';
    std::cout << "target_nodes\t" << id_list(r.targets) << '\n';
    std::cout << "target_reachable\t" << (r.target_reachable ? "true" : "false") << '\n';
    std::cout << "sinks\t" << id_list(r.sinks) << '\n';
    std::cout << "reachable_sinks\t" << id_list(r.reachable_sinks) << '\n';
    std::cout << "guaranteed\t" << (r.guaranteed ? "true" : "false") << '\n';
    std::cout << "hitting_probability\t" << format_double(r.hitting_probability) << '\n';
    std::cout << '\n' << "node\tcommunity\tstatus\tpriority\tpagerank\n";
    for (const auto& n : g.nodes())
      std::cout << n.id << '\t' << n.community.to_string() << '\t' << cag::to_string(n.status) << '\t'
                << format_double(n.hit_priority) << '\t' << format_double(pr[n.id]) << '\n';
    return 0;
  }
};

struct Sim {
  std::string landscape;
  std::size_t pop_size = 100;
  std::size_t generations = 500;
  std::vector<double> rates{0.001};
  std::size_t replicates = 30;
  std::uint64_t seed = 0;
  double abundance_floor = 0.02;
  std::string graph;
  std::size_t threads = 0;
  std::string out;

  void attach(CLI::App& sub) {
    sub.add_option("--landscape", landscape, "Landscape file")->required();
    sub.add_option("--pop-size", pop_size, "Population size")->check(CLI::PositiveNumber)->capture_default_str();
    sub.add_option("--generations", generations, "Generations per run")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub.add_option("--mutation-rate", rates, "Per-site mutation rates, comma-separated")->delimiter(',');
    sub.add_option("--replicates", replicates, "Runs per rate")->check(CLI::NonNegativeNumber)->capture_default_str();
    sub.add_option("--seed", seed, "Base seed")->capture_default_str();
    sub.add_option("--abundance-floor", abundance_floor, "Share needed to count in the filtered community")
        ->capture_default_str();
    sub.add_option("--graph", graph, "Assembly graph whose sinks are tallied");
    sub.add_option("--threads", threads, "Worker threads (0: all cores)");
    sub.add_option("--out", out, "Per-replicate table to write");
  }

  int run() const {
    if (rates.empty()) throw usage_error("--mutation-rate needs at least one value");
    std::vector<cag::SimConfig> configs;
    for (double rate : rates) {
      cag::SimConfig cfg;
      cfg.population_size = pop_size;
      cfg.generations = generations;
      cfg.per_site_mutation_rate = rate;
      cfg.seed = seed;
      cfg.abundance_floor = abundance_floor;
      try {
        cfg.validate();
      } catch (const std::invalid_argument& e) {
        throw usage_error(e.what());
      }
      configs.push_back(cfg);
    }

    cag::RunManifest m{"sim", {}};
    m.add("--landscape", landscape);
    m.add("--pop-size", std::to_string(pop_size));
    m.add("--generations", std::to_string(generations));
    m.add("--mutation-rate", cag::text::join(rates, ",", [](double r) { return format_double(r); }));
    m.add("--replicates", std::to_string(replicates));
    m.add("--seed", std::to_string(seed));
    m.add("--abundance-floor", format_double(abundance_floor));
    if (!graph.empty()) m.add("--graph", graph);
    if (!out.empty()) m.add("--out", out);

    std::istringstream land_in(read_file(landscape));
    const auto land = cag::read_landscape(land_in);
    std::optional<cag::AssemblyGraph> g;
    if (!graph.empty()) g = cag::read_graph(read_file(graph));
    const std::size_t workers = worker_count(threads);

    std::vector<std::vector<cag::ReplicateOutcome>> runs;
    std::vector<cag::ValidationTally> tallies;
    for (const auto& cfg : configs) {
      if (g) {
        tallies.push_back(cag::validate(land, cfg, replicates, *g, workers));
        runs.push_back(tallies.back().outcomes);
      } else {
        runs.push_back(cag::run_replicates(land, cfg, replicates, workers));
      }
    }

    if (g) {
      const auto& sink_ids = tallies.front().sinks;
      for (auto s : sink_ids) std::cout << "# sink " << s << " = " << g->node(s).community.to_string() << '\n';
      std::cout << "rate";
      for (auto s : sink_ids) std::cout << "\tsink " << s;
      std::cout << "\tother\texact\n";
      for (std::size_t i = 0; i < configs.size(); ++i) {
        const auto& t = tallies[i];
        std::cout << format_double(rates[i]);
        for (auto s : sink_ids) {
          auto it = t.per_sink.find(s);
          std::cout << '\t' << (it == t.per_sink.end() ? 0 : it->second);
        }
        std::cout << '\t' << t.other << '\t' << t.exact_matches << '\n';
      }
    } else {
      std::set<cag::Community> seen;
      for (const auto& rs : runs)
        for (const auto& o : rs) seen.insert(o.filtered_community);
      std::cout << "rate";
      for (const auto& c : seen) std::cout << '\t' << c.to_string();
      std::cout << '\n';
      for (std::size_t i = 0; i < configs.size(); ++i) {
        std::map<cag::Community, std::size_t> counts;
        for (const auto& o : runs[i]) ++counts[o.filtered_community];
        std::cout << format_double(rates[i]);
        for (const auto& c : seen) {
          auto it = counts.find(c);
          std::cout << '\t' << (it == counts.end() ? 0 : it->second);
        }
        std::cout << '\n';
      }
    }

    if (!out.empty()) {
      std::ostringstream table;
      table << "# manifest: " << m.to_line() << '\n';
      table << "rate\treplicate\tseed\tfinal_community\tfiltered_community\tsink\texact_sink\n";
      auto sink_text = [](const std::optional<std::size_t>& s) {
        return s ? std::to_string(*s) : std::string("none");
      };
      for (std::size_t i = 0; i < configs.size(); ++i)
        for (const auto& o : runs[i])
          table << format_double(rates[i]) << '\t' << o.replicate << '\t' << o.seed << '\t'
                << o.final_community.to_string() << '\t' << o.filtered_community.to_string() << '\t'
                << sink_text(o.filtered_sink) << '\t' << sink_text(o.exact_sink) << '\n';
      write_file(out, table.str());
    }
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Community assembly graphs for lexicase selection"};
  app.set_version_flag("--version", std::string(cag::kToolVersion));
  app.require_subcommand(1);

  GenNk gen_nk;
  Ingest ingest;
  Build build;
  Analyze analyze;
  Sim sim;
  auto* gen_cmd = app.add_subcommand("gen-nk", "Generate an NK landscape and its phenotype network");
  auto* ingest_cmd = app.add_subcommand("ingest", "Aggregate mutant samples into a phenotype network");
  auto* build_cmd = app.add_subcommand("build", "Build a community assembly graph");
  auto* analyze_cmd = app.add_subcommand("analyze", "Reachability report, PageRank and DOT export");
  auto* sim_cmd = app.add_subcommand("sim", "Simulate lexicase evolution and tally final communities");
  gen_nk.attach(*gen_cmd);
  ingest.attach(*ingest_cmd);
  build.attach(*build_cmd);
  analyze.attach(*analyze_cmd);
  sim.attach(*sim_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen_cmd) return gen_nk.run();
    if (*ingest_cmd) return ingest.run();
    if (*build_cmd) return build.run();
    if (*analyze_cmd) return analyze.run();
    if (*sim_cmd) return sim.run();
  } catch (const usage_error& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
