#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wmsynth/kinematics/minmax.hpp"
#include "wmsynth/policy/policy.hpp"
#include "wmsynth/sim/episode.hpp"

namespace wmsynth::eval {

using kinematics::ActionVector;
using kinematics::Component;

inline constexpr std::size_t kChunk = 16;
inline constexpr const char* kNormalizedUnits = "normalized";

// A chunk of actions in normalized space. The wrapper keeps raw actions from
// being compared against normalized ones by accident.
struct NormalizedChunk {
  std::vector<ActionVector> rows;
};

NormalizedChunk normalize_chunk(const kinematics::MinMaxStats& stats, std::span<const ActionVector> raw);

// Predicts normalized chunks for the requested start steps of one episode.
using ChunkModel = std::function<std::vector<NormalizedChunk>(const sim::Episode&, std::span<const std::size_t>)>;

struct ComponentStat {
  double mean = 0.0;
  double std = 0.0;
};

struct EpisodeMse {
  std::string id;
  std::array<double, 3> component{};  // cartesian, rotation, jaw
  double total = 0.0;                 // over all 20 dimensions
  std::size_t chunks = 0;
};

struct MseReport {
  std::string units = kNormalizedUnits;
  ComponentStat cartesian, rotation, jaw, total;
  std::vector<EpisodeMse> episodes;

  const ComponentStat& component(Component c) const;
};

// Open-loop evaluation. For every start step t with a full 16-step horizon
// (0 <= t <= N - 16) the model predicts a chunk from the episode context;
// squared errors against the ground-truth chunk are averaged per component
// within the chunk, then over chunks, then reported as mean and population
// standard deviation over episodes.
MseReport trajectory_mse(const ChunkModel& model, std::span<const sim::Episode> episodes,
                         const kinematics::MinMaxStats& stats);

// Chunk model backed by a policy: frame_t, episode task token, state_t.
// Each episode draws from its own generator seeded from (seed, episode seed).
ChunkModel policy_chunk_model(const policy::PolicyNet& policy, std::uint64_t seed, int ode_steps = 0);

}  // namespace wmsynth::eval
