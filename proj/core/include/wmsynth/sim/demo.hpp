#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "wmsynth/sim/episode.hpp"

namespace wmsynth::sim {

struct DemoOptions {
  SimConfig sim;
  FrameGeometry geometry;
  int max_attempts = 10;
  int max_steps = 400;
  // Nominal per-step speeds, below the simulator caps so that the state
  // reached after each step equals the commanded pose.
  double speed = 0.0035;
  double yaw_speed = 0.06;
  double jaw_speed = 0.12;
  // Noise standard deviations at noise_scale = 1.
  double position_noise = 0.0005;
  double yaw_noise = 0.005;
  double jaw_noise = 0.01;
};

class DemoFailure : public std::runtime_error {
 public:
  DemoFailure(std::uint64_t seed, int attempts)
      : std::runtime_error("scripted demonstrator failed " + std::to_string(attempts) + " attempts for seed " +
                           std::to_string(seed)),
        seed_(seed) {}
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

// Phase-machine demonstrator. Handover: approach(L), grasp(L), transport,
// approach(R), grasp(R), release(L), retreat, hold. Only successful episodes
// are returned; failed attempts retry with derived sub-seeds and the episode
// records the seed that was actually used.
Episode scripted_demo(std::uint64_t seed, double noise_scale, const std::string& task = kTaskHandover,
                      const DemoOptions& opts = {});

// Random waypoint wandering of both arms and jaws above the pad; never
// touches the needle.
Episode general_motion_episode(std::uint64_t seed, const DemoOptions& opts = {});

// Nominal home pose encoding used as the state before the first action.
ActionVector home_pose_encoding(const SimConfig& cfg = {});

}  // namespace wmsynth::sim
