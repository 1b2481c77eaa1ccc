#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tricode {

inline constexpr const char* kToolVersion = "0.1.0";

// Reproducibility record written next to every command's primary output.
// `config_json` holds the effective settings after flag overrides, as a JSON
// object string; `objectives` is the active pre-training set (empty for
// commands without one).
struct RunManifest {
  std::string command;
  std::string version = kToolVersion;
  uint64_t seed = 0;
  std::string config_json = "{}";
  std::vector<std::string> objectives;
  std::vector<std::string> outputs;
};

std::string run_manifest_json(const RunManifest& manifest);
RunManifest run_manifest_from_json(const std::string& text);

// Conventional sibling location: <primary output>.manifest.json.
std::string manifest_path_for(const std::string& output_path);
void write_run_manifest(const RunManifest& manifest, const std::string& path);
RunManifest load_run_manifest(const std::string& path);

}  // namespace tricode
