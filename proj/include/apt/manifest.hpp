#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace apt {

// Sidecar written next to every command's outputs: the resolved flag values,
// seed list, and the fingerprint of the dataset actually used. Re-running a
// command from its manifest reproduces the outputs byte for byte, so there
// are deliberately no timestamps or host details in here.
struct RunManifest {
  std::string command;
  std::string tool_version;
  nlohmann::json flags = nlohmann::json::object();
  std::vector<int> seeds;
  std::string mode;
  std::string dataset_fingerprint;
};

nlohmann::json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

void write_manifest(const std::string& path, const RunManifest& m);
RunManifest read_manifest(const std::string& path);

}  // namespace apt
