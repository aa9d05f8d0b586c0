#include <gtest/gtest.h>

#include "wmsynth/eval/mse.hpp"
#include "wmsynth/numerics/container.hpp"
#include "wmsynth/policy/policy.hpp"
#include "wmsynth/sim/demo.hpp"
#include "wmsynth/worldmodel/worldmodel.hpp"

namespace pol = wmsynth::policy;
namespace km = wmsynth::kinematics;
namespace nm = wmsynth::numerics;
namespace sim = wmsynth::sim;
namespace wm = wmsynth::worldmodel;

namespace {

const pol::PolicyConfig kSmall{.trunk_hidden = 32, .feature_dim = 16, .head_hidden = 64, .fm = {.steps = 4}};

struct Small {
  std::vector<sim::Episode> eps;
  km::MinMaxStats stats;
  wm::FrameCodec codec{sim::FrameGeometry{}, {.latent_dim = 8, .hidden = 16, .pool = 4}, 1};
  pol::PolicyNet net;
  Small() {
    for (std::uint64_t i = 0; i < 2; ++i) {
      auto e = sim::scripted_demo(700 + i, 1.0);
      e.meta.id = "d" + std::to_string(i);
      e.meta.split = "train";
      eps.push_back(std::move(e));
    }
    std::vector<std::vector<km::ActionVector>> seqs;
    for (const auto& e : eps) seqs.push_back(e.actions);
    stats = km::fit_minmax(seqs);
    net = pol::PolicyNet(codec, stats, wm::default_vocabulary(), kSmall, 2);
  }
};

const Small& small() {
  static const Small s;
  return s;
}

// Replays a fixed action sequence, padding past its end with the last action.
pol::ChunkPredictor replay(std::vector<km::ActionVector> actions, int* calls = nullptr) {
  return [actions, calls](const sim::Frame&, const std::string&, const km::ActionVector&, std::size_t step) {
    if (calls) ++*calls;
    std::vector<km::ActionVector> chunk;
    for (std::size_t k = 0; k < pol::kChunk; ++k) chunk.push_back(actions[std::min(step + k, actions.size() - 1)]);
    return chunk;
  };
}

}  // namespace

TEST(Schedule, Validation) {
  EXPECT_THROW(pol::validate_schedule({{pol::DataSelector::kReal, 0, 1e-4}}), std::invalid_argument);
  EXPECT_NO_THROW(pol::validate_schedule({{pol::DataSelector::kSynthetic, 400, 1e-4}, {pol::DataSelector::kReal, 200, 1e-4}}));
  EXPECT_EQ(pol::parse_selector(pol::selector_name(pol::DataSelector::kMixed)), pol::DataSelector::kMixed);
}

TEST(Schedule, EmptyStageDataNamesTheStage) {
  const pol::PolicyData data{small().eps, {}};
  try {
    pol::train_policy(data, {{pol::DataSelector::kSynthetic, 5, 1e-4}}, small().net, 4, 1);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("synthetic"), std::string::npos) << e.what();
  }
}

TEST(StateAt, PreviousActionOrHome) {
  const auto& a = small().eps[0].actions;
  EXPECT_EQ(pol::state_at(a, 0), sim::home_pose_encoding());
  EXPECT_EQ(pol::state_at(a, 5), a[4]);
}

TEST(PredictChunk, ShapeRotationsAndDeterminism) {
  const auto& e = small().eps[0];
  nm::Rng a(3), b(3);
  const auto ca = small().net.predict_chunk(e.frames[0], sim::kTaskHandover, pol::state_at(e.actions, 0), a);
  ASSERT_EQ(ca.size(), pol::kChunk);
  for (const auto& x : ca) {
    const auto [l, r] = km::unpack_action(x);
    EXPECT_TRUE(km::is_rotation(km::matrix_from_rot6d(l.rotation)));
    EXPECT_TRUE(km::is_rotation(km::matrix_from_rot6d(r.rotation)));
  }
  EXPECT_EQ(ca, small().net.predict_chunk(e.frames[0], sim::kTaskHandover, pol::state_at(e.actions, 0), b));
  EXPECT_THROW(small().net.predict_chunk(e.frames[0], "suturing", e.actions[0], a), std::invalid_argument);
}

TEST(Rollout, OracleReplayOfDemoSucceeds) {
  const auto demo = sim::scripted_demo(31, 0.0);
  int calls = 0;
  const auto e = pol::rollout_policy(replay(demo.actions, &calls), demo.meta.seed, sim::kTaskHandover, 400, 16);
  EXPECT_TRUE(e.meta.success);
  EXPECT_TRUE(sim::detect_success(e));
  // Whole chunks: one prediction per 16 executed actions.
  EXPECT_EQ(static_cast<std::size_t>(calls), (e.actions.size() + 15) / 16);
  EXPECT_THROW(pol::rollout_policy(replay(demo.actions), 1, sim::kTaskHandover, 10, 17), std::invalid_argument);
}

TEST(Rollout, StateFedIsPreviousAction) {
  const auto demo = sim::scripted_demo(32, 0.0);
  std::vector<km::ActionVector> seen;
  pol::ChunkPredictor p = [&](const sim::Frame& f, const std::string& tok, const km::ActionVector& state,
                              std::size_t step) {
    seen.push_back(state);
    return replay(demo.actions)(f, tok, state, step);
  };
  const auto e = pol::rollout_policy(p, demo.meta.seed, sim::kTaskHandover, 40, 8);
  ASSERT_EQ(seen.size(), 5u);
  EXPECT_EQ(seen[0], sim::home_pose_encoding());
  for (std::size_t i = 1; i < seen.size(); ++i) EXPECT_EQ(seen[i], e.actions[8 * i - 1]);
}

TEST(Rollout, UntrainedPolicyRarelySucceeds) {
  const auto predictor = pol::make_predictor(small().net, 9, 2);
  int successes = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    successes += pol::rollout_policy(predictor, 800 + s, sim::kTaskHandover, 120, 8).meta.success;
  }
  EXPECT_EQ(successes, 0);
}

TEST(TrainPolicy, DeterministicAndRoundTrips) {
  const pol::PolicyData data{small().eps, {}};
  const pol::TrainSchedule sched{{pol::DataSelector::kReal, 10, 1e-3}};
  std::vector<pol::StageTrace> ta, tb;
  const auto a = pol::train_policy(data, sched, small().net, 4, 6, &ta);
  const auto b = pol::train_policy(data, sched, small().net, 4, 6, &tb);
  ASSERT_EQ(ta.size(), 1u);
  EXPECT_EQ(ta[0].loss, tb[0].loss);
  const std::string bytes = nm::serialize_container(a.to_container());
  EXPECT_EQ(nm::serialize_container(b.to_container()), bytes);
  EXPECT_EQ(nm::serialize_container(pol::PolicyNet::from_container(nm::parse_container(bytes)).to_container()), bytes);
}

TEST(TrainPolicy, OverfitsOneEpisode) {
  const std::vector<sim::Episode> one{small().eps[0]};
  const pol::PolicyConfig cfg{.feature_dim = 32, .jitter = 0.0, .fm = {.steps = 10}};
  const pol::PolicyNet init(small().codec, small().stats, wm::default_vocabulary(), cfg, 3);
  const auto net = pol::train_policy({one, {}}, {{pol::DataSelector::kReal, 2000, 1e-3}}, init, 32, 4);
  const auto r = wmsynth::eval::trajectory_mse(wmsynth::eval::policy_chunk_model(net, 5), one, small().stats);
  EXPECT_LT(r.total.mean, 1e-3);
}
