#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <utility>

#include "wmsynth/kinematics/rotation.hpp"

namespace wmsynth::kinematics {

inline constexpr std::size_t kActionDim = 20;

// a_t = [p_L (3), r_L (6), g_L, p_R (3), r_R (6), g_R]
namespace layout {
inline constexpr std::size_t kLeftPosition = 0;
inline constexpr std::size_t kLeftRotation = 3;
inline constexpr std::size_t kLeftJaw = 9;
inline constexpr std::size_t kRightPosition = 10;
inline constexpr std::size_t kRightRotation = 13;
inline constexpr std::size_t kRightJaw = 19;
}  // namespace layout

using ActionVector = std::array<double, kActionDim>;

// Pose command for one instrument: tip position (m, camera frame), 6D
// orientation, jaw opening (rad).
struct ArmCommand {
  Vec3 position = Vec3::Zero();
  Rotation6D rotation;
  double jaw = 0.0;
};

ActionVector pack_action(const ArmCommand& left, const ArmCommand& right);
std::pair<ArmCommand, ArmCommand> unpack_action(const ActionVector& a);

// Component-wise packing; throws std::invalid_argument on wrong lengths.
ActionVector pack_action(std::span<const double> p_left, std::span<const double> r_left, double g_left,
                         std::span<const double> p_right, std::span<const double> r_right, double g_right);

enum class Component { kCartesian, kRotation, kJaw };

// Index sets: cartesian {0-2, 10-12}, rotation {3-8, 13-18}, jaw {9, 19}.
std::span<const std::size_t> component_indices(Component c);
const char* component_name(Component c);

// Both rotation blocks decode (Gram-Schmidt preconditions hold).
bool rotations_decodable(const ActionVector& a);
// Replaces both rotation blocks by the 6D encoding of their Gram-Schmidt
// reconstruction. Throws RotationError on ill-conditioned blocks.
ActionVector reorthonormalize(const ActionVector& a);

// Rounds every entry to float precision (the on-disk representation).
ActionVector to_float_precision(const ActionVector& a);

}  // namespace wmsynth::kinematics
