#include "wmsynth/pipeline/manifest.hpp"

#include "wmsynth/numerics/container.hpp"

#ifndef WMSYNTH_VERSION
#define WMSYNTH_VERSION "0.0.0-unknown"
#endif

namespace wmsynth::pipeline {

using nlohmann::json;

const char* version_string() { return WMSYNTH_VERSION; }

json to_json(const RunManifest& m) {
  return {{"format_version", m.format_version},
          {"version", m.version},
          {"config_hash", m.config_hash},
          {"artifacts", m.artifacts},
          {"timings", m.timings}};
}

RunManifest manifest_from_json(const json& j) {
  RunManifest m;
  try {
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kManifestFormatVersion) {
      throw ManifestError("manifest format version " + std::to_string(m.format_version) +
                          " is not supported (this build reads version " + std::to_string(kManifestFormatVersion) +
                          ")");
    }
    m.version = j.at("version").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
    m.timings = j.at("timings").get<std::map<std::string, double>>();
  } catch (const json::exception& e) {
    throw ManifestError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

void save_manifest(const std::filesystem::path& file, const RunManifest& m) {
  const std::string text = to_json(m).dump(2) + "\n";
  numerics::write_file(file, text, true);
}

RunManifest load_manifest(const std::filesystem::path& file) {
  json j;
  try {
    j = json::parse(numerics::read_file(file));
  } catch (const json::parse_error& e) {
    throw ManifestError("manifest " + file.string() + ": " + e.what());
  }
  return manifest_from_json(j);
}

}  // namespace wmsynth::pipeline
