#pragma once

#include <cstdint>
#include <vector>

#include "wmsynth/kinematics/action.hpp"
#include "wmsynth/kinematics/rotation.hpp"

namespace wmsynth::sim {

using kinematics::ActionVector;
using kinematics::Mat3;
using kinematics::Vec3;

// Geometry and physical limits of the two-arm needle handover scene. All
// lengths in meters, angles in radians, camera frame (x right, y down, z depth).
struct SimConfig {
  double workspace_half = 0.1;
  double max_translation_step = 0.005;
  double max_rotation_step = 0.1;
  double max_jaw_step = 0.15;
  double jaw_min = 0.0;
  double jaw_max = 1.2;
  double grasp_radius = 0.003;
  double grasp_jaw = 0.2;
  double needle_radius = 0.015;
  double pad_depth = 0.03;
  // Needle spawn region (arc centroid) on the pad.
  double spawn_x_min = -0.03, spawn_x_max = 0.03;
  double spawn_y_min = -0.01, spawn_y_max = 0.03;
  double spawn_yaw = 0.4;
  // Instrument tool axis is R * e_x; R = Rz(yaw) * Ry(pitch).
  double tool_pitch = -0.3;
  Vec3 left_home{-0.06, -0.06, -0.02};
  Vec3 right_home{0.06, -0.06, -0.02};
  double left_home_yaw = 0.6;
  double right_home_yaw = 3.14159265358979323846 - 0.6;
  double home_jitter = 0.01;
  double home_yaw_jitter = 0.2;
};

enum class Attachment : std::int32_t { kNone = 0, kLeft = 1, kRight = 2 };

struct ArmState {
  Vec3 position = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
  double jaw = 0.0;
  bool operator==(const ArmState&) const = default;
};

struct SimState {
  ArmState left, right;
  // Needle pose: position is the centroid of the arc.
  Vec3 needle_position = Vec3::Zero();
  Mat3 needle_rotation = Mat3::Identity();
  Attachment attachment = Attachment::kNone;
  // Needle pose in the holding gripper's frame (meaningful while attached).
  Vec3 grasp_offset = Vec3::Zero();
  Mat3 grasp_rotation = Mat3::Identity();
  std::int64_t time = 0;

  bool operator==(const SimState&) const = default;
};

inline constexpr std::size_t kStateRecordSize = 52;  // doubles per serialized state

Mat3 tool_rotation(double yaw, const SimConfig& cfg);
double tool_yaw(const Mat3& r);

// Left grasps the needle tip, right grasps the tail (the two arc ends).
Vec3 needle_tip(const SimState& s, const SimConfig& cfg);
Vec3 needle_tail(const SimState& s, const SimConfig& cfg);
// Arc points in the needle frame, centroid at the origin.
Vec3 needle_local_point(double arc_angle, const SimConfig& cfg);

SimState reset(std::uint64_t seed, const SimConfig& cfg = {});

// Moves both instruments toward the absolute target poses in `action`,
// subject to the per-step caps, then applies grasp and release transitions.
// Throws std::invalid_argument on non-finite actions and
// kinematics::RotationError on undecodable rotation blocks.
SimState step(const SimState& s, const ActionVector& action, const SimConfig& cfg = {});

// Robot state encoding (same layout and values as an action).
ActionVector encode_state(const SimState& s);

std::vector<double> serialize_state(const SimState& s);
SimState deserialize_state(const double* record);

}  // namespace wmsynth::sim
