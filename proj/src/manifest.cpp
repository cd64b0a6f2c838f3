#include "apt/manifest.hpp"

#include "apt/error.hpp"
#include "apt/io.hpp"
#include "apt/version.hpp"

namespace apt {

nlohmann::json manifest_to_json(const RunManifest& m) {
  return nlohmann::json{{"command", m.command},
                        {"tool_version", m.tool_version.empty() ? kToolVersion
                                                                : m.tool_version},
                        {"flags", m.flags},
                        {"seeds", m.seeds},
                        {"mode", m.mode},
                        {"dataset_fingerprint", m.dataset_fingerprint}};
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.flags = j.at("flags");
    m.seeds = j.at("seeds").get<std::vector<int>>();
    m.mode = j.at("mode").get<std::string>();
    m.dataset_fingerprint = j.at("dataset_fingerprint").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw RejectedInput(std::string("manifest: ") + e.what());
  }
  return m;
}

void write_manifest(const std::string& path, const RunManifest& m) {
  write_file(path, manifest_to_json(m).dump(2) + "\n");
}

RunManifest read_manifest(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw RejectedInput("manifest '" + path + "': " + e.what());
  }
  return manifest_from_json(j);
}

}  // namespace apt
