#include "tricode/manifest.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tricode/errors.hpp"

namespace tricode {

using nlohmann::ordered_json;

std::string run_manifest_json(const RunManifest& manifest) {
  ordered_json j;
  j["command"] = manifest.command;
  j["version"] = manifest.version;
  j["seed"] = manifest.seed;
  try {
    j["config"] = ordered_json::parse(manifest.config_json);
  } catch (const ordered_json::exception& e) {
    throw FormatError(std::string("manifest config snapshot: ") + e.what());
  }
  j["objectives"] = manifest.objectives;
  j["outputs"] = manifest.outputs;
  return j.dump(2);
}

RunManifest run_manifest_from_json(const std::string& text) {
  try {
    const ordered_json j = ordered_json::parse(text);
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.version = j.at("version").get<std::string>();
    m.seed = j.at("seed").get<uint64_t>();
    m.config_json = j.at("config").dump();
    m.objectives = j.at("objectives").get<std::vector<std::string>>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    return m;
  } catch (const ordered_json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
}

std::string manifest_path_for(const std::string& output_path) {
  return output_path + ".manifest.json";
}

void write_run_manifest(const RunManifest& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw FormatError("cannot write manifest " + path);
  }
  out << run_manifest_json(manifest) << "\n";
  if (!out) {
    throw FormatError("short write to manifest " + path);
  }
}

RunManifest load_run_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot read manifest " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return run_manifest_from_json(buffer.str());
}

}  // namespace tricode
