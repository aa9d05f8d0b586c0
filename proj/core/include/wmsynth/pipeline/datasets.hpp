#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "wmsynth/pipeline/config.hpp"
#include "wmsynth/sim/episode.hpp"

namespace wmsynth::pipeline {

struct Datasets {
  std::vector<sim::Episode> train_real;  // the train pool, in order; regimes take prefixes
  std::vector<sim::Episode> test_real;
  std::vector<sim::Episode> general;
  // Single-frame episodes (frame 0 of a general-motion reset) that pass needle_visible.
  std::vector<sim::Episode> init;

  std::span<const sim::Episode> regime(std::size_t n) const;
  std::vector<sim::Frame> init_frames() const;
};

// Needle centroid inside the frame and at least `min_pixels` needle pixels.
bool needle_visible(const sim::Frame& f, std::size_t min_pixels = 20);

// Demo i uses stage seed ("demo", i); the first train_pool demos form the
// train pool and the last test_demos the test split. General-motion episodes
// use ("general", i); initial frames scan ("init", k) for k = 0, 1, ... until
// enough frames pass the predicate. Episodes are generated on `workers`
// threads; the result does not depend on the count.
Datasets generate_datasets(const ExperimentConfig& cfg, std::size_t workers = 1);

// Sub-directories train/, test/, general/, init/ in the dataset format.
void save_datasets(const std::filesystem::path& dir, const Datasets& d, bool force = false);
Datasets load_datasets(const std::filesystem::path& dir);

}  // namespace wmsynth::pipeline
