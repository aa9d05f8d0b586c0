#include "wmsynth/kinematics/stats_io.hpp"

namespace wmsynth::kinematics {

void append_stats(numerics::Container& c, const MinMaxStats& s, const std::string& prefix) {
  numerics::Tensor mn({kActionDim}), mx({kActionDim}), mask({kActionDim});
  for (std::size_t i = 0; i < kActionDim; ++i) {
    mn[i] = static_cast<float>(s.min[i]);
    mx[i] = static_cast<float>(s.max[i]);
    mask[i] = s.normalized[i] ? 1.0f : 0.0f;
  }
  c.tensors.push_back({prefix + "min", mn});
  c.tensors.push_back({prefix + "max", mx});
  c.tensors.push_back({prefix + "mask", mask});
}

MinMaxStats load_stats(const numerics::Container& c, const std::string& prefix) {
  const auto& mn = c.tensor(prefix + "min");
  const auto& mx = c.tensor(prefix + "max");
  const auto& mask = c.tensor(prefix + "mask");
  if (mn.size() != kActionDim || mx.size() != kActionDim || mask.size() != kActionDim) {
    throw numerics::ContainerError("normalization statistics must have " + std::to_string(kActionDim) + " entries");
  }
  MinMaxStats s;
  for (std::size_t i = 0; i < kActionDim; ++i) {
    s.min[i] = mn[i];
    s.max[i] = mx[i];
    s.normalized[i] = mask[i] != 0.0f;
  }
  return s;
}

}  // namespace wmsynth::kinematics
