#include "wmsynth/sim/episode_io.hpp"

#include <bit>
#include <cstring>

#include "wmsynth/numerics/container.hpp"

namespace wmsynth::sim {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "episode files are little-endian");

json meta_to_json(const EpisodeMeta& m, const Episode& e) {
  json j;
  j["format_version"] = kEpisodeFormatVersion;
  j["id"] = m.id;
  j["seed"] = m.seed;
  j["source"] = source_name(m.source);
  j["task"] = m.task;
  j["success"] = m.success;
  j["generator"] = m.generator;
  j["generator_version"] = m.generator_version;
  j["noise_scale"] = m.noise_scale;
  j["split"] = m.split;
  j["num_frames"] = e.frames.size();
  j["num_actions"] = e.actions.size();
  j["has_states"] = !e.states.empty();
  j["frame_geometry"] = {{"height", e.geometry.height}, {"width", e.geometry.width}, {"channels", e.geometry.channels}};
  if (!m.label_source.empty()) {
    j["label_source"] = m.label_source;
    j["chunk_confidence"] = m.chunk_confidence;
    j["label_windows"] = m.label_windows;
  }
  return j;
}

EpisodeMeta meta_from_json(const json& j) {
  EpisodeMeta m;
  m.id = j.at("id").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.source = parse_source(j.at("source").get<std::string>());
  m.task = j.at("task").get<std::string>();
  m.success = j.at("success").get<bool>();
  m.generator = j.value("generator", "");
  m.generator_version = j.at("generator_version").get<std::string>();
  m.noise_scale = j.value("noise_scale", 0.0);
  m.split = j.value("split", "");
  if (j.contains("label_source")) {
    m.label_source = j.at("label_source").get<std::string>();
    m.chunk_confidence = j.at("chunk_confidence").get<std::vector<double>>();
    m.label_windows = j.at("label_windows").get<std::vector<std::size_t>>();
  }
  return m;
}

void write_episode(const fs::path& dir, const Episode& e, bool force) {
  e.validate();
  if (fs::exists(dir) && !force) {
    throw std::runtime_error("refusing to overwrite existing episode " + dir.string() + " (use force)");
  }
  fs::create_directories(dir);

  std::string frames;
  frames.reserve(e.frames.size() * e.geometry.bytes());
  for (const auto& f : e.frames) frames.append(reinterpret_cast<const char*>(f.pixels.data()), f.pixels.size());

  std::string actions(e.actions.size() * kinematics::kActionDim * sizeof(float), '\0');
  char* out = actions.data();
  for (const auto& a : e.actions) {
    for (double v : a) {
      const float f = static_cast<float>(v);
      std::memcpy(out, &f, sizeof f);
      out += sizeof f;
    }
  }

  numerics::write_file(dir / "frames.bin", frames, true);
  numerics::write_file(dir / "actions.bin", actions, true);
  if (!e.states.empty()) {
    std::string states;
    states.reserve(e.states.size() * kStateRecordSize * sizeof(double));
    for (const auto& s : e.states) {
      const auto rec = serialize_state(s);
      states.append(reinterpret_cast<const char*>(rec.data()), rec.size() * sizeof(double));
    }
    numerics::write_file(dir / "states.bin", states, true);
  } else if (fs::exists(dir / "states.bin")) {
    fs::remove(dir / "states.bin");
  }
  // meta goes last so a partially written directory is never readable.
  numerics::write_file(dir / "meta", meta_to_json(e.meta, e).dump(2) + "\n", true);
}

Episode read_episode(const fs::path& dir) {
  if (!fs::exists(dir / "meta")) throw EpisodeFormatError("no episode at " + dir.string());
  json j;
  try {
    j = json::parse(numerics::read_file(dir / "meta"));
  } catch (const json::parse_error& err) {
    throw EpisodeFormatError(dir.string() + "/meta: " + err.what());
  }
  const int version = j.value("format_version", -1);
  if (version != kEpisodeFormatVersion) {
    throw EpisodeFormatError(dir.string() + ": episode format version " + std::to_string(version) +
                             ", this build reads version " + std::to_string(kEpisodeFormatVersion));
  }
  Episode e;
  e.meta = meta_from_json(j);
  const auto& g = j.at("frame_geometry");
  e.geometry = {g.at("height").get<std::size_t>(), g.at("width").get<std::size_t>(),
                g.at("channels").get<std::size_t>()};
  const auto n_frames = j.at("num_frames").get<std::size_t>();
  const auto n_actions = j.at("num_actions").get<std::size_t>();

  const std::string frames = numerics::read_file(dir / "frames.bin");
  if (frames.size() != n_frames * e.geometry.bytes()) {
    throw EpisodeFormatError(dir.string() + "/frames.bin: " + std::to_string(frames.size()) + " bytes, expected " +
                             std::to_string(n_frames * e.geometry.bytes()));
  }
  e.frames.reserve(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    Frame f(e.geometry);
    std::memcpy(f.pixels.data(), frames.data() + i * e.geometry.bytes(), e.geometry.bytes());
    e.frames.push_back(std::move(f));
  }

  const std::string actions = numerics::read_file(dir / "actions.bin");
  const std::size_t row = kinematics::kActionDim * sizeof(float);
  if (actions.size() != n_actions * row) {
    throw EpisodeFormatError(dir.string() + "/actions.bin: " + std::to_string(actions.size()) +
                             " bytes, expected " + std::to_string(n_actions * row));
  }
  e.actions.resize(n_actions);
  for (std::size_t i = 0; i < n_actions; ++i) {
    for (std::size_t k = 0; k < kinematics::kActionDim; ++k) {
      float f;
      std::memcpy(&f, actions.data() + i * row + k * sizeof(float), sizeof f);
      e.actions[i][k] = f;
    }
  }

  if (j.value("has_states", false)) {
    const std::string states = numerics::read_file(dir / "states.bin");
    const std::size_t srow = kStateRecordSize * sizeof(double);
    if (states.size() != n_frames * srow) throw EpisodeFormatError(dir.string() + "/states.bin: wrong length");
    std::vector<double> rec(kStateRecordSize);
    for (std::size_t i = 0; i < n_frames; ++i) {
      std::memcpy(rec.data(), states.data() + i * srow, srow);
      e.states.push_back(deserialize_state(rec.data()));
    }
  }
  try {
    e.validate();
  } catch (const std::invalid_argument& err) {
    throw EpisodeFormatError(err.what());
  }
  return e;
}

void write_dataset(const fs::path& dir, const std::vector<Episode>& episodes, bool force) {
  if (fs::exists(dir / "index.json") && !force) {
    throw std::runtime_error("refusing to overwrite existing dataset " + dir.string() + " (use force)");
  }
  json index;
  index["format_version"] = kEpisodeFormatVersion;
  index["episodes"] = json::array();
  for (const auto& e : episodes) {
    if (e.meta.id.empty()) throw std::invalid_argument("dataset episodes need ids");
    write_episode(dir / e.meta.id, e, force);
    index["episodes"].push_back({{"id", e.meta.id}, {"split", e.meta.split}});
  }
  numerics::write_file(dir / "index.json", index.dump(2) + "\n", true);
}

std::vector<DatasetEntry> read_index(const fs::path& dir) {
  if (!fs::exists(dir / "index.json")) throw EpisodeFormatError("no dataset index at " + dir.string());
  const json j = json::parse(numerics::read_file(dir / "index.json"));
  const int version = j.value("format_version", -1);
  if (version != kEpisodeFormatVersion) {
    throw EpisodeFormatError(dir.string() + "/index.json: format version " + std::to_string(version) +
                             ", this build reads version " + std::to_string(kEpisodeFormatVersion));
  }
  std::vector<DatasetEntry> out;
  for (const auto& e : j.at("episodes")) out.push_back({e.at("id").get<std::string>(), e.at("split").get<std::string>()});
  return out;
}

std::vector<Episode> read_dataset(const fs::path& dir) {
  std::vector<Episode> out;
  for (const auto& entry : read_index(dir)) out.push_back(read_episode(dir / entry.id));
  return out;
}

}  // namespace wmsynth::sim
