#include <gtest/gtest.h>

#include <filesystem>

#include "wmsynth/kinematics/rotation.hpp"
#include "wmsynth/numerics/rng.hpp"
#include "wmsynth/sim/demo.hpp"
#include "wmsynth/sim/episode.hpp"
#include "wmsynth/sim/episode_io.hpp"
#include "wmsynth/sim/render.hpp"
#include "wmsynth/sim/sim.hpp"

namespace sim = wmsynth::sim;
namespace km = wmsynth::kinematics;
using km::ActionVector;
using km::Vec3;

namespace {

// Left arm commanded to `left_target` at its current orientation, right arm held.
ActionVector left_command(const sim::SimState& s, const Vec3& left_target, double left_jaw) {
  ActionVector a = sim::encode_state(s);
  for (int i = 0; i < 3; ++i) a[km::layout::kLeftPosition + i] = left_target[i];
  a[km::layout::kLeftJaw] = left_jaw;
  return a;
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("wmsynth_sim_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST(Reset, DeterministicAndUnattached) {
  EXPECT_EQ(sim::reset(42), sim::reset(42));
  EXPECT_NE(sim::reset(42), sim::reset(43));
  const sim::SimConfig cfg;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = sim::reset(seed);
    EXPECT_EQ(s.attachment, sim::Attachment::kNone);
    EXPECT_GE(s.needle_position.x(), cfg.spawn_x_min);
    EXPECT_LE(s.needle_position.x(), cfg.spawn_x_max);
    EXPECT_GE(s.needle_position.y(), cfg.spawn_y_min);
    EXPECT_LE(s.needle_position.y(), cfg.spawn_y_max);
  }
}

TEST(Step, CurrentPoseIsAFixedPoint) {
  const auto s = sim::reset(5);
  const auto n = sim::step(s, sim::encode_state(s));
  sim::SimState expected = s;
  expected.time = s.time + 1;
  EXPECT_EQ(n, expected);
}

TEST(Step, TranslationCappedAlongCommandedDirection) {
  const auto s = sim::reset(6);
  const Vec3 dir = Vec3(1, 2, -1).normalized();
  const auto n = sim::step(s, left_command(s, s.left.position + 0.02 * dir, s.left.jaw));
  const Vec3 moved = n.left.position - s.left.position;
  EXPECT_NEAR(moved.norm(), 0.005, 1e-12);
  EXPECT_NEAR(moved.normalized().dot(dir), 1.0, 1e-12);
}

TEST(Step, NonFiniteActionRejected) {
  const auto s = sim::reset(7);
  auto a = sim::encode_state(s);
  a[4] = std::nan("");
  EXPECT_THROW(sim::step(s, a), std::invalid_argument);
}

TEST(Step, GraspMicroSequenceAttachesLeft) {
  sim::SimState s = sim::reset(8);
  const sim::SimConfig cfg;
  for (int i = 0; i < 60; ++i) s = sim::step(s, left_command(s, sim::needle_tip(s, cfg), 0.8));
  ASSERT_LT((s.left.position - sim::needle_tip(s, cfg)).norm(), cfg.grasp_radius);
  EXPECT_EQ(s.attachment, sim::Attachment::kNone);
  for (int i = 0; i < 10; ++i) s = sim::step(s, left_command(s, s.left.position, 0.0));
  EXPECT_LT(s.left.jaw, cfg.grasp_jaw);
  EXPECT_EQ(s.attachment, sim::Attachment::kLeft);

  // Attached needle follows the gripper rigidly.
  const Vec3 offset = s.needle_position - s.left.position;
  s = sim::step(s, left_command(s, s.left.position + Vec3(0.004, 0, 0), 0.0));
  EXPECT_LT(((s.needle_position - s.left.position) - offset).norm(), 1e-12);
}

TEST(Step, CapsHoldOverRandomRollouts) {
  wmsynth::numerics::Rng rng(9);
  const sim::SimConfig cfg;
  for (int ep = 0; ep < 5; ++ep) {
    sim::SimState s = sim::reset(100 + ep);
    for (int t = 0; t < 80; ++t) {
      ActionVector a = sim::encode_state(s);
      for (int i : {0, 1, 2, 10, 11, 12}) a[i] += wmsynth::numerics::uniform(rng, -0.03, 0.03);
      for (int i : {9, 19}) a[i] = wmsynth::numerics::uniform(rng, 0.0, 1.2);
      const auto n = sim::step(s, a);
      EXPECT_LE((n.left.position - s.left.position).norm(), cfg.max_translation_step + 1e-9);
      EXPECT_LE((n.right.position - s.right.position).norm(), cfg.max_translation_step + 1e-9);
      EXPECT_LE(std::abs(n.left.jaw - s.left.jaw), cfg.max_jaw_step + 1e-9);
      EXPECT_LE(std::abs(n.right.jaw - s.right.jaw), cfg.max_jaw_step + 1e-9);
      EXPECT_LE(km::rotation_angle_between(n.left.rotation, s.left.rotation), cfg.max_rotation_step + 1e-9);
      for (int i = 0; i < 3; ++i) EXPECT_LE(std::abs(n.left.position[i]), cfg.workspace_half);
      s = n;
    }
  }
}

TEST(Render, DeterministicAndNeedleCentroidMatchesProjection) {
  const sim::FrameGeometry g;
  const sim::Palette pal;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = sim::reset(seed);
    const auto f = sim::render(s, g);
    EXPECT_EQ(f, sim::render(s, g));
    ASSERT_GT(sim::count_color(f, pal.needle), 0u);
    const auto c = sim::color_centroid(f, pal.needle);
    const auto p = sim::project(s.needle_position, g);
    EXPECT_NEAR(c[0], p[0], 1.0) << seed;
    EXPECT_NEAR(c[1], p[1], 1.0) << seed;
  }
}

TEST(Demo, NoiselessSucceedsFirstAttempt) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto e = sim::scripted_demo(seed, 0.0);
    EXPECT_EQ(e.meta.seed, seed) << "retried for seed " << seed;
    EXPECT_TRUE(e.meta.success);
    EXPECT_TRUE(sim::detect_success(e));
    EXPECT_GE(e.frames.size(), 80u);
    EXPECT_LE(e.frames.size(), 200u);
    EXPECT_EQ(e.actions.size() + 1, e.frames.size());
    for (const auto& a : e.actions) {
      EXPECT_TRUE(km::rotations_decodable(a));
      EXPECT_GE(a[9], 0.0);
      EXPECT_LE(a[9], 1.2);
    }
  }
}

TEST(Demo, RecordedSeedReproducesEpisode) {
  const auto e = sim::scripted_demo(77, 1.0);
  const auto again = sim::record_episode(e.meta.seed, e.actions, e.meta.task);
  EXPECT_EQ(again.frames, e.frames);
}

TEST(Success, ZeroActionsAndTruncatedDemoFail) {
  auto e = sim::scripted_demo(3, 0.0);
  const auto s0 = sim::reset(e.meta.seed);
  std::vector<ActionVector> hold(e.actions.size(), sim::encode_state(s0));
  EXPECT_FALSE(sim::detect_success(sim::record_episode(e.meta.seed, hold, sim::kTaskHandover)));

  // Cut just before the right gripper takes the needle.
  const auto states = sim::replay_states(e.meta.seed, e.actions);
  std::size_t first_right = 0;
  while (states[first_right].attachment != sim::Attachment::kRight) ++first_right;
  std::vector<ActionVector> cut(e.actions.begin(), e.actions.begin() + (first_right - 1));
  EXPECT_FALSE(sim::detect_success(sim::record_episode(e.meta.seed, cut, sim::kTaskHandover)));
}

TEST(Success, UndecidableWithoutStatesOrSeed) {
  auto e = sim::scripted_demo(4, 0.0);
  e.states.clear();
  e.meta.source = sim::Source::kSynthetic;
  EXPECT_THROW(sim::detect_success(e), sim::SuccessUndecidable);
}

TEST(EpisodeIo, RoundTrip) {
  const auto dir = scratch("episode");
  auto e = sim::scripted_demo(21, 1.0);
  e.meta.id = "demo-021";
  e.meta.split = "train";
  sim::write_episode(dir, e);
  EXPECT_EQ(sim::read_episode(dir), e);
  EXPECT_THROW(sim::write_episode(dir, e), std::runtime_error);
  std::filesystem::resize_file(dir / "actions.bin", 12);
  EXPECT_THROW(sim::read_episode(dir), sim::EpisodeFormatError);
  std::filesystem::remove_all(dir);
}

TEST(EpisodeIo, DatasetIndex) {
  const auto dir = scratch("dataset");
  std::vector<sim::Episode> eps;
  for (std::uint64_t i = 0; i < 3; ++i) {
    auto e = sim::general_motion_episode(i);
    e.meta.id = "general-" + std::to_string(i);
    e.meta.split = "general";
    eps.push_back(std::move(e));
  }
  sim::write_dataset(dir, eps);
  const auto idx = sim::read_index(dir);
  ASSERT_EQ(idx.size(), 3u);
  EXPECT_EQ(idx[1], (sim::DatasetEntry{"general-1", "general"}));
  EXPECT_EQ(sim::read_dataset(dir), eps);
  std::filesystem::remove_all(dir);
}

TEST(Episode, LengthInvariant) {
  auto e = sim::scripted_demo(2, 0.0);
  EXPECT_NO_THROW(e.validate());
  e.actions.pop_back();
  EXPECT_THROW(e.validate(), std::invalid_argument);
}
