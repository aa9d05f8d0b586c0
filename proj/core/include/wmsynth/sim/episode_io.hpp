#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wmsynth/sim/episode.hpp"

namespace wmsynth::sim {

inline constexpr int kEpisodeFormatVersion = 1;

class EpisodeFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json meta_to_json(const EpisodeMeta& m, const Episode& e);
EpisodeMeta meta_from_json(const nlohmann::json& j);

// Directory layout: meta (JSON), frames.bin, actions.bin, optional states.bin.
// Refuses to overwrite an existing episode directory unless `force`.
void write_episode(const std::filesystem::path& dir, const Episode& e, bool force = false);
Episode read_episode(const std::filesystem::path& dir);

struct DatasetEntry {
  std::string id;
  std::string split;
  bool operator==(const DatasetEntry&) const = default;
};

// A dataset directory holds one sub-directory per episode plus index.json.
void write_dataset(const std::filesystem::path& dir, const std::vector<Episode>& episodes, bool force = false);
std::vector<DatasetEntry> read_index(const std::filesystem::path& dir);
std::vector<Episode> read_dataset(const std::filesystem::path& dir);

}  // namespace wmsynth::sim
