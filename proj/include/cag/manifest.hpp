#pragma once

// Run manifests: the resolved command line of a CLI run, embedded in every
// artifact it writes so the run can be replayed.

#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cag/text.hpp"

namespace cag {

inline constexpr std::string_view kToolName = "cagtool";
inline constexpr std::string_view kToolVersion = "0.1.0";

struct RunManifest {
  std::string subcommand;
  /// ("--flag", value) in the order the subcommand declares them. Execution
  /// knobs that cannot change output (worker counts) are not recorded.
  std::vector<std::pair<std::string, std::string>> flags;

  void add(std::string flag, std::string value) { flags.emplace_back(std::move(flag), std::move(value)); }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["tool"] = kToolName;
    j["version"] = kToolVersion;
    j["subcommand"] = subcommand;
    nlohmann::ordered_json args = nlohmann::ordered_json::array();
    for (const auto& [flag, value] : flags) args.push_back({flag, value});
    j["flags"] = std::move(args);
    return j;
  }

  std::string to_line() const { return to_json().dump(); }

  static RunManifest from_json(const nlohmann::json& j) {
    RunManifest m;
    if (j.at("tool").get<std::string>() != kToolName) throw std::runtime_error("manifest from another tool");
    m.subcommand = j.at("subcommand").get<std::string>();
    for (const auto& pair : j.at("flags")) m.add(pair.at(0).get<std::string>(), pair.at(1).get<std::string>());
    return m;
  }

  /// Arguments after the program name that reproduce the run.
  std::vector<std::string> to_argv() const {
    std::vector<std::string> argv{subcommand};
    for (const auto& [flag, value] : flags) {
      argv.push_back(flag);
      argv.push_back(value);
    }
    return argv;
  }
};

/// Finds the manifest in an artifact: a top-level "manifest" field of a JSON
/// document, or a "# manifest: " / "// manifest: " comment line.
inline std::optional<RunManifest> find_manifest(std::string_view artifact) {
  const auto body = text::trim(artifact);
  if (!body.empty() && body.front() == '{') {
    const auto doc = nlohmann::json::parse(body, nullptr, false);
    if (!doc.is_discarded() && doc.is_object() && doc.contains("manifest"))
      return RunManifest::from_json(doc.at("manifest"));
  }
  std::istringstream in{std::string(artifact)};
  std::string line;
  for (const std::string_view prefix : {"# manifest: ", "// manifest: "}) {
    in.clear();
    in.seekg(0);
    while (std::getline(in, line))
      if (line.rfind(prefix, 0) == 0)
        return RunManifest::from_json(nlohmann::json::parse(line.substr(prefix.size())));
  }
  return std::nullopt;
}

}  // namespace cag
