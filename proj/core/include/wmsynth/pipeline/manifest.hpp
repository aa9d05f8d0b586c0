#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace wmsynth::pipeline {

inline constexpr int kManifestFormatVersion = 1;

// Build version, e.g. "0.1.0-g1a2b3c4" when built from a git checkout.
const char* version_string();

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunManifest {
  int format_version = kManifestFormatVersion;
  std::string version = version_string();
  std::string config_hash;
  std::map<std::string, std::string> artifacts;  // stage -> path relative to the run directory
  std::map<std::string, double> timings;         // stage -> wall seconds
};

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

void save_manifest(const std::filesystem::path& file, const RunManifest& m);
// Throws ManifestError naming both versions when the format version differs.
RunManifest load_manifest(const std::filesystem::path& file);

}  // namespace wmsynth::pipeline
