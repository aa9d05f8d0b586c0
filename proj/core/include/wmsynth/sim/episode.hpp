#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wmsynth/sim/render.hpp"
#include "wmsynth/sim/sim.hpp"

namespace wmsynth::sim {

inline constexpr const char* kGeneratorVersion = "wmsynth-sim/1";

inline constexpr const char* kTaskHandover = "handover_once";
inline constexpr const char* kTaskGraspOnly = "grasp_only";
inline constexpr const char* kTaskGeneralMotion = "general_motion";

enum class Source { kReal, kSynthetic };

const char* source_name(Source s);
Source parse_source(const std::string& s);

struct EpisodeMeta {
  std::string id;
  std::uint64_t seed = 0;
  Source source = Source::kReal;
  std::string task = kTaskHandover;
  bool success = false;
  std::string generator = "scripted_demo";
  std::string generator_version = kGeneratorVersion;
  double noise_scale = 0.0;
  // train | test | general | synthetic; empty when unassigned.
  std::string split;
  // Pseudo-labeled episodes: checkpoint that produced the labels, per-window
  // confidence, and the first step of each labeling window.
  std::string label_source;
  std::vector<double> chunk_confidence;
  std::vector<std::size_t> label_windows;

  bool operator==(const EpisodeMeta&) const = default;
};

// frames[0..N], actions[0..N-1]; states[0..N] when recorded.
struct Episode {
  EpisodeMeta meta;
  FrameGeometry geometry;
  std::vector<Frame> frames;
  std::vector<ActionVector> actions;
  std::vector<SimState> states;

  // Throws std::invalid_argument when the length or geometry invariants fail.
  void validate() const;
  bool operator==(const Episode&) const = default;
};

// Replays `actions` from reset(seed). Throws on invalid actions.
std::vector<SimState> replay_states(std::uint64_t seed, const std::vector<ActionVector>& actions,
                                    const SimConfig& cfg = {});

// Renders a real episode from a seed and an action sequence.
Episode record_episode(std::uint64_t seed, const std::vector<ActionVector>& actions, const std::string& task,
                       const FrameGeometry& g = {}, const SimConfig& cfg = {});

// Task predicate over the final `window` states: handover requires the needle
// held by the right gripper with the left jaw open (> 0.6 rad); grasp_only
// requires it held by the left gripper.
bool task_satisfied(const std::vector<SimState>& states, const std::string& task, std::size_t window = 10,
                    double open_jaw = 0.6);

class SuccessUndecidable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Uses recorded states, or replays the actions from the seed for real
// episodes. An action sequence that cannot be executed is not a success.
bool detect_success(const Episode& e, const SimConfig& cfg = {});

}  // namespace wmsynth::sim
