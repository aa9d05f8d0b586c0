#include "wmsynth/sim/episode.hpp"

#include <stdexcept>

namespace wmsynth::sim {

const char* source_name(Source s) { return s == Source::kReal ? "real" : "synthetic"; }

Source parse_source(const std::string& s) {
  if (s == "real") return Source::kReal;
  if (s == "synthetic") return Source::kSynthetic;
  throw std::invalid_argument("unknown episode source '" + s + "'");
}

void Episode::validate() const {
  if (frames.empty()) throw std::invalid_argument("episode " + meta.id + ": no frames");
  if (actions.size() + 1 != frames.size()) {
    throw std::invalid_argument("episode " + meta.id + ": " + std::to_string(actions.size()) + " actions for " +
                                std::to_string(frames.size()) + " frames (expected frames - 1)");
  }
  if (!states.empty() && states.size() != frames.size()) {
    throw std::invalid_argument("episode " + meta.id + ": state count does not match frame count");
  }
  for (const auto& f : frames) {
    if (f.geometry != geometry || f.pixels.size() != geometry.bytes()) {
      throw std::invalid_argument("episode " + meta.id + ": frame geometry changes within the episode");
    }
  }
}

std::vector<SimState> replay_states(std::uint64_t seed, const std::vector<ActionVector>& actions,
                                    const SimConfig& cfg) {
  std::vector<SimState> states;
  states.reserve(actions.size() + 1);
  states.push_back(reset(seed, cfg));
  for (const auto& a : actions) states.push_back(step(states.back(), a, cfg));
  return states;
}

Episode record_episode(std::uint64_t seed, const std::vector<ActionVector>& actions, const std::string& task,
                       const FrameGeometry& g, const SimConfig& cfg) {
  Episode e;
  e.meta.seed = seed;
  e.meta.task = task;
  e.meta.source = Source::kReal;
  e.geometry = g;
  e.actions = actions;
  e.states = replay_states(seed, actions, cfg);
  e.frames.reserve(e.states.size());
  for (const auto& s : e.states) e.frames.push_back(render(s, g, cfg));
  return e;
}

bool task_satisfied(const std::vector<SimState>& states, const std::string& task, std::size_t window,
                    double open_jaw) {
  if (states.size() < window || window == 0) return false;
  for (std::size_t i = states.size() - window; i < states.size(); ++i) {
    const SimState& s = states[i];
    if (task == kTaskHandover) {
      if (s.attachment != Attachment::kRight || !(s.left.jaw > open_jaw)) return false;
    } else if (task == kTaskGraspOnly) {
      if (s.attachment != Attachment::kLeft) return false;
    } else {
      return false;
    }
  }
  return true;
}

bool detect_success(const Episode& e, const SimConfig& cfg) {
  if (!e.states.empty()) return task_satisfied(e.states, e.meta.task);
  if (e.meta.source != Source::kReal) {
    throw SuccessUndecidable("episode " + e.meta.id + " has no states and no replayable seed");
  }
  try {
    return task_satisfied(replay_states(e.meta.seed, e.actions, cfg), e.meta.task);
  } catch (const std::invalid_argument&) {
    return false;  // includes RotationError: the commands cannot be executed
  }
}

}  // namespace wmsynth::sim
