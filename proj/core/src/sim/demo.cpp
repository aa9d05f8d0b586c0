#include "wmsynth/sim/demo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "wmsynth/numerics/rng.hpp"

namespace wmsynth::sim {

namespace {

using kinematics::ArmCommand;
using numerics::Rng;

struct ArmTarget {
  Vec3 position;
  double yaw = 0.0;
  double jaw = 0.0;
};

double wrap_angle(double a) {
  while (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
  while (a < -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

ArmTarget hold(const ArmState& a) { return {a.position, tool_yaw(a.rotation), a.jaw}; }

struct Motion {
  Vec3 position;
  double yaw;
  double jaw;
  bool arrived;
};

Motion move_toward(const ArmState& cur, const ArmTarget& tgt, const DemoOptions& o) {
  Motion m;
  const Vec3 d = tgt.position - cur.position;
  const double n = d.norm();
  bool arrived = true;
  if (n <= o.speed) {
    m.position = tgt.position;
  } else {
    m.position = cur.position + d * (o.speed / n);
    arrived = false;
  }
  const double yaw = tool_yaw(cur.rotation);
  const double dy = wrap_angle(tgt.yaw - yaw);
  if (std::abs(dy) <= o.yaw_speed) {
    m.yaw = tgt.yaw;
  } else {
    m.yaw = yaw + std::copysign(o.yaw_speed, dy);
    arrived = false;
  }
  const double dj = tgt.jaw - cur.jaw;
  if (std::abs(dj) <= o.jaw_speed) {
    m.jaw = tgt.jaw;
  } else {
    m.jaw = cur.jaw + std::copysign(o.jaw_speed, dj);
    arrived = false;
  }
  m.arrived = arrived;
  return m;
}

ArmCommand to_command(const Motion& m, const SimConfig& cfg) {
  ArmCommand c;
  c.position = m.position;
  c.rotation = kinematics::rot6d_from_matrix(tool_rotation(m.yaw, cfg));
  c.jaw = m.jaw;
  return c;
}

class Noise {
 public:
  Noise(std::uint64_t seed, double scale, const DemoOptions& o) : rng_(seed), scale_(scale), o_(o) {}

  void perturb(Motion& m, const SimConfig& cfg) {
    if (scale_ <= 0.0) return;
    for (int i = 0; i < 3; ++i) m.position[i] += o_.position_noise * scale_ * numerics::standard_normal(rng_);
    m.yaw += o_.yaw_noise * scale_ * numerics::standard_normal(rng_);
    m.jaw = std::clamp(m.jaw + o_.jaw_noise * scale_ * numerics::standard_normal(rng_), cfg.jaw_min, cfg.jaw_max);
  }

 private:
  Rng rng_;
  double scale_;
  const DemoOptions& o_;
};

enum class Phase {
  kLeftHover,
  kLeftDescend,
  kLeftGrasp,
  kLeftLift,
  kTransport,
  kRightHover,
  kRightDescend,
  kRightGrasp,
  kLeftRelease,
  kRetreat,
  kHold,
  kDone,
};

Phase next_phase(Phase p, const std::string& task) {
  if (task == kTaskGraspOnly && p == Phase::kTransport) return Phase::kHold;
  return static_cast<Phase>(static_cast<int>(p) + 1);
}

double needle_yaw(const SimState& s) { return tool_yaw(s.needle_rotation); }

struct Plan {
  ArmTarget left, right;
  int dwell = 0;  // extra steps after arrival
};

Plan plan_phase(Phase p, const SimState& s, const std::string& task, Rng& layout, const SimConfig& cfg) {
  Plan plan{hold(s.left), hold(s.right), 0};
  const double left_yaw = 0.6 + 0.5 * needle_yaw(s);
  const double right_yaw = wrap_angle(std::numbers::pi - 0.4 + 0.5 * needle_yaw(s));
  const Vec3 up(0.0, 0.0, -0.012);
  switch (p) {
    case Phase::kLeftHover:
      plan.left = {needle_tip(s, cfg) + up, left_yaw, 1.0};
      break;
    case Phase::kLeftDescend:
      plan.left = {needle_tip(s, cfg), tool_yaw(s.left.rotation), 1.0};
      break;
    case Phase::kLeftGrasp:
      plan.left.jaw = 0.0;
      plan.dwell = 2;
      break;
    case Phase::kLeftLift:
      plan.left.position += Vec3(0.0, 0.0, -0.015);
      break;
    case Phase::kTransport:
      if (task == kTaskGraspOnly) {
        plan.left.position = Vec3(s.left.position.x(), s.left.position.y() - 0.02, -0.01);
      } else {
        plan.left = {Vec3(-0.015 + numerics::uniform(layout, -0.008, 0.008),
                          -0.025 + numerics::uniform(layout, -0.008, 0.008), 0.0),
                     0.35, 0.0};
      }
      break;
    case Phase::kRightHover:
      plan.right = {needle_tail(s, cfg) + up, right_yaw, 1.0};
      break;
    case Phase::kRightDescend:
      plan.right = {needle_tail(s, cfg), tool_yaw(s.right.rotation), 1.0};
      break;
    case Phase::kRightGrasp:
      plan.right.jaw = 0.0;
      plan.dwell = 2;
      break;
    case Phase::kLeftRelease:
      plan.left.jaw = 1.0;
      plan.dwell = 1;
      break;
    case Phase::kRetreat:
      plan.left = {Vec3(-0.055, -0.055, -0.02), 0.6, 1.0};
      plan.right.position = Vec3(0.03, -0.03, -0.025);
      break;
    case Phase::kHold:
      plan.dwell = 10;
      break;
    case Phase::kDone:
      break;
  }
  return plan;
}

// One attempt; returns the action sequence or an empty vector on failure.
std::vector<ActionVector> run_attempt(std::uint64_t seed, double noise_scale, const std::string& task,
                                      const DemoOptions& o) {
  const SimConfig& cfg = o.sim;
  SimState s = reset(seed, cfg);
  Noise noise(numerics::derive_seed(seed, "demo.noise"), noise_scale, o);
  Rng layout(numerics::derive_seed(seed, "demo.layout"));
  std::vector<ActionVector> actions;
  std::vector<SimState> states{s};

  Phase phase = Phase::kLeftHover;
  Plan plan = plan_phase(phase, s, task, layout, cfg);
  int dwell_left = -1;
  while (phase != Phase::kDone) {
    if (static_cast<int>(actions.size()) >= o.max_steps) return {};
    Motion l = move_toward(s.left, plan.left, o);
    Motion r = move_toward(s.right, plan.right, o);
    const bool arrived = l.arrived && r.arrived;
    noise.perturb(l, cfg);
    noise.perturb(r, cfg);
    const ActionVector a = kinematics::to_float_precision(kinematics::pack_action(to_command(l, cfg), to_command(r, cfg)));
    s = step(s, a, cfg);
    actions.push_back(a);
    states.push_back(s);
    if (arrived && dwell_left < 0) dwell_left = plan.dwell;
    if (dwell_left >= 0 && dwell_left-- == 0) {
      phase = next_phase(phase, task);
      if (phase != Phase::kDone) plan = plan_phase(phase, s, task, layout, cfg);
      dwell_left = -1;
    }
  }
  if (!task_satisfied(states, task)) return {};
  return actions;
}

}  // namespace

ActionVector home_pose_encoding(const SimConfig& cfg) {
  ArmCommand l{cfg.left_home, kinematics::rot6d_from_matrix(tool_rotation(cfg.left_home_yaw, cfg)), 0.5};
  ArmCommand r{cfg.right_home, kinematics::rot6d_from_matrix(tool_rotation(cfg.right_home_yaw, cfg)), 0.5};
  return kinematics::pack_action(l, r);
}

Episode scripted_demo(std::uint64_t seed, double noise_scale, const std::string& task, const DemoOptions& opts) {
  if (task != kTaskHandover && task != kTaskGraspOnly) {
    throw std::invalid_argument("scripted demonstrator has no task '" + task + "'");
  }
  for (int attempt = 0; attempt < opts.max_attempts; ++attempt) {
    const std::uint64_t used = attempt == 0 ? seed : numerics::derive_seed(seed, "demo.retry", {std::uint64_t(attempt)});
    auto actions = run_attempt(used, noise_scale, task, opts);
    if (actions.empty()) continue;
    Episode e = record_episode(used, actions, task, opts.geometry, opts.sim);
    e.meta.generator = "scripted_demo";
    e.meta.noise_scale = noise_scale;
    e.meta.success = true;
    return e;
  }
  throw DemoFailure(seed, opts.max_attempts);
}

Episode general_motion_episode(std::uint64_t seed, const DemoOptions& opts) {
  const SimConfig& cfg = opts.sim;
  Rng rng(numerics::derive_seed(seed, "general.motion"));
  const std::size_t length = 96 + numerics::uniform_index(rng, 33);
  SimState s = reset(seed, cfg);

  auto draw = [&](double home_x, double home_yaw) {
    ArmTarget t;
    t.position = Vec3(home_x + numerics::uniform(rng, -0.035, 0.035), numerics::uniform(rng, -0.07, 0.03),
                      numerics::uniform(rng, -0.05, -0.005));
    t.yaw = wrap_angle(home_yaw + numerics::uniform(rng, -0.5, 0.5));
    t.jaw = numerics::uniform(rng, 0.0, 1.2);
    return t;
  };
  ArmTarget tl = draw(-0.05, cfg.left_home_yaw);
  ArmTarget tr = draw(0.05, cfg.right_home_yaw);
  DemoOptions o = opts;
  o.speed = numerics::uniform(rng, 0.002, 0.004);

  std::vector<ActionVector> actions;
  actions.reserve(length);
  for (std::size_t t = 0; t < length; ++t) {
    const Motion l = move_toward(s.left, tl, o);
    const Motion r = move_toward(s.right, tr, o);
    if (l.arrived) tl = draw(-0.05, cfg.left_home_yaw);
    if (r.arrived) tr = draw(0.05, cfg.right_home_yaw);
    const ActionVector a = kinematics::to_float_precision(kinematics::pack_action(to_command(l, cfg), to_command(r, cfg)));
    s = step(s, a, cfg);
    actions.push_back(a);
  }
  Episode e = record_episode(seed, actions, kTaskGeneralMotion, opts.geometry, cfg);
  e.meta.generator = "general_motion";
  e.meta.success = false;
  e.meta.split = "general";
  return e;
}

}  // namespace wmsynth::sim
