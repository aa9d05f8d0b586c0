#pragma once

#include <string>

#include "wmsynth/kinematics/minmax.hpp"
#include "wmsynth/numerics/container.hpp"

namespace wmsynth::kinematics {

// Stored as three float tensors "<prefix>min", "<prefix>max", "<prefix>mask".
void append_stats(numerics::Container& c, const MinMaxStats& s, const std::string& prefix = "stats.");
MinMaxStats load_stats(const numerics::Container& c, const std::string& prefix = "stats.");

}  // namespace wmsynth::kinematics
