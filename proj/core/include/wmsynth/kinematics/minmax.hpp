#pragma once

#include <array>
#include <span>
#include <vector>

#include "wmsynth/kinematics/action.hpp"

namespace wmsynth::kinematics {

// Per-dimension min-max statistics. Only cartesian and jaw dimensions are
// normalized; rotation dimensions pass through unchanged. Bounds are stored at
// float precision so checkpoints round-trip exactly.
struct MinMaxStats {
  ActionVector min{};
  ActionVector max{};
  std::array<bool, kActionDim> normalized{};

  bool degenerate(std::size_t i) const { return max[i] == min[i]; }
  bool operator==(const MinMaxStats&) const = default;
};

// Throws std::invalid_argument when no actions are supplied.
MinMaxStats fit_minmax(std::span<const std::vector<ActionVector>> sequences);

// Maps normalized dims to (a - min) / (max - min); degenerate dims map to 0.5.
// Values outside the training range are not clipped.
ActionVector apply(const MinMaxStats& stats, const ActionVector& a);
ActionVector invert(const MinMaxStats& stats, const ActionVector& n);

// Generative heads work on normalized values shifted to [-1, 1] (2n - 1) on
// the min-max dims; rotation entries already lie in [-1, 1] and stay. Applied
// in place to rows of kActionDim values.
void center_rows(const MinMaxStats& stats, std::span<float> rows);
void uncenter_rows(const MinMaxStats& stats, std::span<float> rows);

// Default normalized index set (cartesian + jaw).
std::array<bool, kActionDim> default_normalized_mask();

}  // namespace wmsynth::kinematics
