#include "wmsynth/sim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "wmsynth/numerics/rng.hpp"

namespace wmsynth::sim {

using kinematics::matrix_from_rot6d;
using kinematics::rot6d_from_matrix;

Mat3 tool_rotation(double yaw, const SimConfig& cfg) {
  return kinematics::rotation_z(yaw) * kinematics::rotation_y(cfg.tool_pitch);
}

double tool_yaw(const Mat3& r) { return std::atan2(r(1, 0), r(0, 0)); }

Vec3 needle_local_point(double arc_angle, const SimConfig& cfg) {
  // Half-circle arc over angles [0, pi]; its centroid sits 2r/pi from the circle center.
  const double r = cfg.needle_radius;
  const double centroid_y = 2.0 * r / std::numbers::pi;
  return {r * std::cos(arc_angle), r * std::sin(arc_angle) - centroid_y, 0.0};
}

Vec3 needle_tip(const SimState& s, const SimConfig& cfg) {
  return s.needle_position + s.needle_rotation * needle_local_point(0.0, cfg);
}

Vec3 needle_tail(const SimState& s, const SimConfig& cfg) {
  return s.needle_position + s.needle_rotation * needle_local_point(std::numbers::pi, cfg);
}

SimState reset(std::uint64_t seed, const SimConfig& cfg) {
  numerics::Rng rng(numerics::derive_seed(seed, "sim.reset"));
  using numerics::uniform;
  SimState s;
  s.needle_position = Vec3(uniform(rng, cfg.spawn_x_min, cfg.spawn_x_max),
                           uniform(rng, cfg.spawn_y_min, cfg.spawn_y_max), cfg.pad_depth);
  s.needle_rotation = kinematics::rotation_z(uniform(rng, -cfg.spawn_yaw, cfg.spawn_yaw));
  auto home = [&](const Vec3& base, double yaw) {
    ArmState a;
    a.position = base + Vec3(uniform(rng, -cfg.home_jitter, cfg.home_jitter),
                             uniform(rng, -cfg.home_jitter, cfg.home_jitter),
                             uniform(rng, -cfg.home_jitter, cfg.home_jitter) * 0.5);
    a.rotation = tool_rotation(yaw + uniform(rng, -cfg.home_yaw_jitter, cfg.home_yaw_jitter), cfg);
    a.jaw = uniform(rng, 0.4, 0.8);
    return a;
  };
  s.left = home(cfg.left_home, cfg.left_home_yaw);
  s.right = home(cfg.right_home, cfg.right_home_yaw);
  s.attachment = Attachment::kNone;
  s.time = 0;
  return s;
}

namespace {

void move_arm(ArmState& arm, const kinematics::ArmCommand& cmd, const SimConfig& cfg) {
  const Vec3 delta = cmd.position - arm.position;
  const double dist = delta.norm();
  if (dist > cfg.max_translation_step) {
    arm.position += delta * (cfg.max_translation_step / dist);
  } else {
    arm.position = cmd.position;
  }
  for (int i = 0; i < 3; ++i) {
    arm.position[i] = std::clamp(arm.position[i], -cfg.workspace_half, cfg.workspace_half);
  }

  const Mat3 target = matrix_from_rot6d(cmd.rotation);
  const Eigen::AngleAxisd rel(target * arm.rotation.transpose());
  // Sub-nanoradian differences come from re-encoding the current pose; keep it exact.
  if (rel.angle() > 1e-9) {
    if (rel.angle() > cfg.max_rotation_step) {
      arm.rotation = Eigen::AngleAxisd(cfg.max_rotation_step, rel.axis()).toRotationMatrix() * arm.rotation;
    } else {
      arm.rotation = target;
    }
  }

  const double jaw_target = std::clamp(cmd.jaw, cfg.jaw_min, cfg.jaw_max);
  const double dj = std::clamp(jaw_target - arm.jaw, -cfg.max_jaw_step, cfg.max_jaw_step);
  arm.jaw = std::clamp(arm.jaw + dj, cfg.jaw_min, cfg.jaw_max);
}

void attach(SimState& s, Attachment who) {
  const ArmState& g = who == Attachment::kLeft ? s.left : s.right;
  s.attachment = who;
  s.grasp_rotation = g.rotation.transpose() * s.needle_rotation;
  s.grasp_offset = g.rotation.transpose() * (s.needle_position - g.position);
}

}  // namespace

SimState step(const SimState& s, const ActionVector& action, const SimConfig& cfg) {
  for (double v : action) {
    if (!std::isfinite(v)) throw std::invalid_argument("sim step: non-finite action");
  }
  const auto [left_cmd, right_cmd] = kinematics::unpack_action(action);
  SimState n = s;
  move_arm(n.left, left_cmd, cfg);
  move_arm(n.right, right_cmd, cfg);

  if (n.attachment != Attachment::kNone) {
    const ArmState& g = n.attachment == Attachment::kLeft ? n.left : n.right;
    n.needle_rotation = g.rotation * n.grasp_rotation;
    n.needle_position = g.position + g.rotation * n.grasp_offset;
  }

  // Release when the holding jaw opens past the grasp threshold.
  if (n.attachment == Attachment::kLeft && n.left.jaw >= cfg.grasp_jaw) n.attachment = Attachment::kNone;
  if (n.attachment == Attachment::kRight && n.right.jaw >= cfg.grasp_jaw) n.attachment = Attachment::kNone;

  // Handover runs left to right: the right gripper may take the needle from
  // the left one, the left only picks up a free needle.
  if (n.attachment != Attachment::kRight && n.right.jaw < cfg.grasp_jaw &&
      (n.right.position - needle_tail(n, cfg)).norm() < cfg.grasp_radius) {
    attach(n, Attachment::kRight);
  } else if (n.attachment == Attachment::kNone && n.left.jaw < cfg.grasp_jaw &&
             (n.left.position - needle_tip(n, cfg)).norm() < cfg.grasp_radius) {
    attach(n, Attachment::kLeft);
  }
  n.time = s.time + 1;
  return n;
}

ActionVector encode_state(const SimState& s) {
  kinematics::ArmCommand l{s.left.position, rot6d_from_matrix(s.left.rotation), s.left.jaw};
  kinematics::ArmCommand r{s.right.position, rot6d_from_matrix(s.right.rotation), s.right.jaw};
  return kinematics::pack_action(l, r);
}

std::vector<double> serialize_state(const SimState& s) {
  std::vector<double> out;
  out.reserve(kStateRecordSize);
  auto vec = [&](const Vec3& v) { out.insert(out.end(), v.data(), v.data() + 3); };
  auto mat = [&](const Mat3& m) { out.insert(out.end(), m.data(), m.data() + 9); };
  vec(s.left.position); mat(s.left.rotation); out.push_back(s.left.jaw);
  vec(s.right.position); mat(s.right.rotation); out.push_back(s.right.jaw);
  vec(s.needle_position); mat(s.needle_rotation);
  out.push_back(static_cast<double>(s.attachment));
  vec(s.grasp_offset); mat(s.grasp_rotation);
  out.push_back(static_cast<double>(s.time));
  return out;
}

SimState deserialize_state(const double* p) {
  SimState s;
  auto vec = [&](Vec3& v) { std::copy_n(p, 3, v.data()); p += 3; };
  auto mat = [&](Mat3& m) { std::copy_n(p, 9, m.data()); p += 9; };
  vec(s.left.position); mat(s.left.rotation); s.left.jaw = *p++;
  vec(s.right.position); mat(s.right.rotation); s.right.jaw = *p++;
  vec(s.needle_position); mat(s.needle_rotation);
  s.attachment = static_cast<Attachment>(static_cast<int>(*p++));
  vec(s.grasp_offset); mat(s.grasp_rotation);
  s.time = static_cast<std::int64_t>(*p++);
  return s;
}

}  // namespace wmsynth::sim
