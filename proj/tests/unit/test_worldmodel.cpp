#include <gtest/gtest.h>

#include "wmsynth/numerics/container.hpp"
#include "wmsynth/numerics/ops.hpp"
#include "wmsynth/numerics/rng.hpp"
#include "wmsynth/sim/demo.hpp"
#include "wmsynth/worldmodel/codec.hpp"
#include "wmsynth/worldmodel/worldmodel.hpp"

namespace wm = wmsynth::worldmodel;
namespace nm = wmsynth::numerics;
namespace sim = wmsynth::sim;

namespace {

const wm::CodecConfig kCodec{.latent_dim = 16, .hidden = 32, .pool = 4, .steps = 60, .batch = 16};
const wm::DynamicsConfig kDyn{.latent_dim = 16, .model_dim = 16, .heads = 2, .blocks = 1, .ffn_dim = 32};

std::vector<sim::Episode> demos(std::size_t n, std::uint64_t base = 400) {
  std::vector<sim::Episode> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto e = sim::scripted_demo(base + i, 1.0);
    e.meta.id = "d" + std::to_string(i);
    e.meta.split = "train";
    out.push_back(std::move(e));
  }
  return out;
}

// Shared small fixture: a briefly trained codec and an untrained world model.
struct Small {
  std::vector<sim::Episode> eps = demos(3);
  wm::FrameCodec codec = wm::train_codec(eps, kCodec, 1);
  wm::WorldModel model{codec, kDyn, wm::default_vocabulary(), {.steps = 4}, 2};
};

const Small& small() {
  static const Small s;
  return s;
}

nm::Tensor probe_velocity(wm::WorldModel& m, std::uint64_t seed) {
  nm::Rng rng(seed);
  nm::Graph g(nm::GradMode::kInference);
  auto noisy = g.constant(nm::normal_tensor<float>({2, kDyn.window, kDyn.latent_dim}, rng));
  auto first = g.constant(nm::normal_tensor<float>({2, kDyn.latent_dim}, rng));
  const std::vector<float> t{0.3f, 0.8f};
  const std::vector<std::size_t> tokens{0, 1};
  return m.velocity(g, noisy, t, first, tokens).value();
}

float max_abs_diff(const nm::Tensor& a, const nm::Tensor& b) {
  float d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST(Codec, EncodeIsDeterministic) {
  const auto& s = small();
  const std::span<const sim::Frame> frames(s.eps[0].frames.data(), 4);
  EXPECT_EQ(s.codec.encode(frames), s.codec.encode(frames));
  EXPECT_EQ(s.codec.encode(frames).shape(), (nm::Shape{4, 16}));
}

TEST(Codec, ConstantFramesReconstructAlmostExactly) {
  sim::Episode e;
  e.meta.id = "flat";
  e.meta.split = "train";
  sim::Frame f(e.geometry);
  std::fill(f.pixels.begin(), f.pixels.end(), std::uint8_t{128});
  e.frames.assign(8, f);
  e.actions.resize(7);
  const auto codec = wm::train_codec(std::vector{e}, {.latent_dim = 4, .hidden = 16, .pool = 4, .steps = 300}, 3);
  EXPECT_LT(wm::reconstruction_mse(codec, e.frames), 1e-4);
}

TEST(WorldModel, UnknownTokenRejected) {
  auto m = small().model;
  EXPECT_THROW(m.token_id("suturing"), wm::UnknownTokenError);
  nm::Rng rng(1);
  EXPECT_THROW(m.predict_rollout(small().eps[0].frames[0], "suturing", 4, rng), wm::UnknownTokenError);
}

TEST(WorldModel, RolloutShapeAndSeedContract) {
  const auto& s = small();
  const sim::Frame& first = s.eps[0].frames[0];
  nm::Rng a(5), b(5), c(6);
  const auto ra = s.model.predict_rollout(first, sim::kTaskHandover, 20, a);
  const auto rb = s.model.predict_rollout(first, sim::kTaskHandover, 20, b);
  const auto rc = s.model.predict_rollout(first, sim::kTaskHandover, 20, c);
  ASSERT_EQ(ra.size(), 20u);
  for (const auto& f : ra) EXPECT_EQ(f.geometry, first.geometry);
  EXPECT_EQ(ra, rb);
  EXPECT_NE(ra, rc);

  const std::vector<sim::Frame> firsts{first, s.eps[1].frames[0]};
  const std::vector<std::uint64_t> seeds{5, 9};
  const auto batch = s.model.predict_rollouts(firsts, sim::kTaskHandover, 20, seeds);
  nm::Rng r9(9);
  EXPECT_EQ(batch[0], ra);
  EXPECT_EQ(batch[1], s.model.predict_rollout(firsts[1], sim::kTaskHandover, 20, r9));
}

TEST(WorldModel, ZeroAdapterIsIdentityAndMergeIsBitNear) {
  auto m = small().model;
  const auto base = probe_velocity(m, 1);
  const float base_loss = wm::worldmodel_batch_loss(m, small().eps, 4, 3);
  m.attach_adapters({.rank = 2, .alpha = 4.0}, 7);
  EXPECT_EQ(probe_velocity(m, 1), base);
  EXPECT_EQ(wm::worldmodel_batch_loss(m, small().eps, 4, 3), base_loss);
  m.merge_adapters();
  EXPECT_FALSE(m.has_adapters());
  EXPECT_LE(max_abs_diff(probe_velocity(m, 1), base), 1e-7f);
}

TEST(WorldModel, AdapterTrainingFreezesBaseAndMergesExactly) {
  const auto& s = small();
  const auto trained = wm::train_worldmodel(s.eps, s.model, true, {.steps = 30, .batch = 4, .lora = {2, 4.0}}, 8);
  ASSERT_TRUE(trained.has_adapters());
  for (const auto& [name, p] : s.model.params().items()) {
    ASSERT_TRUE(trained.params().contains(name)) << name;
    EXPECT_EQ(trained.params().at(name).value, p.value) << name;
  }
  auto adapted = trained;
  auto merged = trained;
  merged.merge_adapters();
  EXPECT_LT(max_abs_diff(probe_velocity(adapted, 2), probe_velocity(merged, 2)), 1e-5f);
  const auto once = probe_velocity(merged, 2);
  merged.merge_adapters();
  EXPECT_EQ(probe_velocity(merged, 2), once);
}

TEST(WorldModel, TrainingReducesLossAndIsDeterministic) {
  const auto& s = small();
  wm::WorldModelTrace ta, tb;
  const auto a = wm::train_worldmodel(s.eps, s.model, false, {.steps = 120, .batch = 8}, 4, &ta);
  const auto b = wm::train_worldmodel(s.eps, s.model, false, {.steps = 120, .batch = 8}, 4, &tb);
  EXPECT_EQ(ta.loss, tb.loss);
  EXPECT_LT(wm::worldmodel_batch_loss(a, s.eps, 16, 77), wm::worldmodel_batch_loss(s.model, s.eps, 16, 77));
}

TEST(WorldModel, RejectsTestEpisodes) {
  auto eps = small().eps;
  eps[1].meta.split = "test";
  EXPECT_THROW(wm::train_worldmodel(eps, small().model, false, {.steps = 1}, 1), std::exception);
}

TEST(WorldModel, ContainerRoundTripIsByteIdentical) {
  auto m = small().model;
  m.attach_adapters({.rank = 2, .alpha = 4.0}, 3);
  const std::string bytes = nm::serialize_container(m.to_container());
  const auto back = wm::WorldModel::from_container(nm::parse_container(bytes));
  EXPECT_EQ(nm::serialize_container(back.to_container()), bytes);
  EXPECT_TRUE(back.has_adapters());
}
