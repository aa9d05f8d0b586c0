#include "wmsynth/kinematics/minmax.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace wmsynth::kinematics {

std::array<bool, kActionDim> default_normalized_mask() {
  std::array<bool, kActionDim> mask{};
  for (auto i : component_indices(Component::kCartesian)) mask[i] = true;
  for (auto i : component_indices(Component::kJaw)) mask[i] = true;
  return mask;
}

MinMaxStats fit_minmax(std::span<const std::vector<ActionVector>> sequences) {
  MinMaxStats s;
  s.normalized = default_normalized_mask();
  s.min.fill(std::numeric_limits<double>::infinity());
  s.max.fill(-std::numeric_limits<double>::infinity());
  std::size_t count = 0;
  for (const auto& seq : sequences) {
    for (const auto& a : seq) {
      for (std::size_t i = 0; i < kActionDim; ++i) {
        s.min[i] = std::min(s.min[i], a[i]);
        s.max[i] = std::max(s.max[i], a[i]);
      }
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("fit_minmax: empty dataset");
  // Round outward to float so stored bounds still bracket the training data.
  for (std::size_t i = 0; i < kActionDim; ++i) {
    float lo = static_cast<float>(s.min[i]);
    float hi = static_cast<float>(s.max[i]);
    if (static_cast<double>(lo) > s.min[i]) lo = std::nextafter(lo, -std::numeric_limits<float>::infinity());
    if (static_cast<double>(hi) < s.max[i]) hi = std::nextafter(hi, std::numeric_limits<float>::infinity());
    s.min[i] = lo;
    s.max[i] = hi;
  }
  return s;
}

ActionVector apply(const MinMaxStats& stats, const ActionVector& a) {
  ActionVector n = a;
  for (std::size_t i = 0; i < kActionDim; ++i) {
    if (!stats.normalized[i]) continue;
    n[i] = stats.degenerate(i) ? 0.5 : (a[i] - stats.min[i]) / (stats.max[i] - stats.min[i]);
  }
  return n;
}

ActionVector invert(const MinMaxStats& stats, const ActionVector& n) {
  ActionVector a = n;
  for (std::size_t i = 0; i < kActionDim; ++i) {
    if (!stats.normalized[i]) continue;
    a[i] = stats.degenerate(i) ? stats.min[i] : n[i] * (stats.max[i] - stats.min[i]) + stats.min[i];
  }
  return a;
}

void center_rows(const MinMaxStats& stats, std::span<float> rows) {
  if (rows.size() % kActionDim != 0) throw std::invalid_argument("center_rows: length is not a multiple of 20");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (stats.normalized[i % kActionDim]) rows[i] = 2.0f * rows[i] - 1.0f;
  }
}

void uncenter_rows(const MinMaxStats& stats, std::span<float> rows) {
  if (rows.size() % kActionDim != 0) throw std::invalid_argument("uncenter_rows: length is not a multiple of 20");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (stats.normalized[i % kActionDim]) rows[i] = 0.5f * (rows[i] + 1.0f);
  }
}

}  // namespace wmsynth::kinematics
