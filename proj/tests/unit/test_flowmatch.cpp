#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "wmsynth/flowmatch/flow_head.hpp"
#include "wmsynth/flowmatch/flowmatch.hpp"
#include "wmsynth/numerics/layers.hpp"
#include "wmsynth/numerics/ops.hpp"
#include "wmsynth/numerics/rng.hpp"

namespace fm = wmsynth::flowmatch;
namespace nm = wmsynth::numerics;
using nm::Tensor;
using nm::Tensor64;

namespace {

// Velocity of the straight path between one known pair; constant along it.
fm::VelocityField pair_oracle(const Tensor& clean, const Tensor& noise) {
  const Tensor v = fm::velocity_target(clean, noise);
  return [v](const Tensor&, float) { return v; };
}

}  // namespace

TEST(Timestep, LogitNormalMapAndRange) {
  EXPECT_DOUBLE_EQ(fm::logit_normal(0.0, 0.0, 1.0), 0.5);
  nm::Rng rng(1);
  double mean = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double t = fm::sample_timestep(rng, 0.0, 1.0);
    ASSERT_GT(t, 0.0);
    ASSERT_LT(t, 1.0);
    mean += t;
  }
  EXPECT_NEAR(mean / n, 0.5, 0.01);
}

TEST(Timestep, ConfigValidation) {
  EXPECT_THROW((fm::FMConfig{.sigma = 0.0}.validate()), std::invalid_argument);
  EXPECT_THROW((fm::FMConfig{.steps = 0}.validate()), std::invalid_argument);
  EXPECT_NO_THROW(fm::FMConfig{}.validate());
}

TEST(Interpolate, EndpointsAndArithmetic) {
  nm::Rng rng(2);
  const Tensor i = nm::normal_tensor<float>({3, 5}, rng);
  const Tensor e = nm::normal_tensor<float>({3, 5}, rng);
  EXPECT_EQ(fm::interpolate(i, e, 0.0), i);
  EXPECT_EQ(fm::interpolate(i, e, 1.0), e);
  EXPECT_EQ(fm::interpolate(Tensor({2}, {2, 4}), Tensor({2}), 0.25), Tensor({2}, {1.5f, 3.0f}));
  EXPECT_THROW(fm::interpolate(i, Tensor({5, 3}), 0.5), nm::ShapeError);
}

TEST(Interpolate, AffineInT) {
  nm::Rng rng(3);
  const Tensor64 i = nm::normal_tensor<double>({4, 4}, rng);
  const Tensor64 e = nm::normal_tensor<double>({4, 4}, rng);
  const Tensor64 v = fm::velocity_target(i, e);
  for (double t : {0.1, 0.37, 0.5, 0.9}) {
    const Tensor64 it = fm::interpolate(i, e, t);
    for (std::size_t k = 0; k < it.size(); ++k) EXPECT_NEAR(it[k], i[k] + t * v[k], 1e-15);
  }
}

TEST(Velocity, Arithmetic) {
  EXPECT_EQ(fm::velocity_target(Tensor({2}, {1, 2}), Tensor({2})), Tensor({2}, {-1, -2}));
  const Tensor x({3}, {0.3f, -1.0f, 7.0f});
  EXPECT_EQ(fm::velocity_target(x, x), Tensor({3}));
}

TEST(Velocity, BatchTargetIndependentOfT) {
  nm::Rng rng(4);
  fm::FMBatch b{nm::normal_tensor<float>({4, 3}, rng), nm::normal_tensor<float>({4, 3}, rng), {0.1f, 0.2f, 0.3f, 0.4f}};
  const Tensor before = b.target();
  b.t = {0.9f, 0.8f, 0.7f, 0.6f};
  EXPECT_EQ(b.target(), before);
  b.t.pop_back();
  EXPECT_THROW(b.validate(), nm::ShapeError);
}

TEST(Loss, OracleIsZeroAndZeroModelArithmetic) {
  nm::Rng rng(5);
  const auto batch = fm::make_batch(nm::normal_tensor<float>({6, 4}, rng), rng, {});
  const Tensor target = batch.target();
  fm::VelocityModel oracle = [&](nm::Graph& g, nm::Var, std::span<const float>) { return g.constant(target); };
  nm::Graph g;
  EXPECT_EQ(fm::fm_loss(g, oracle, batch).value().item(), 0.0f);

  fm::FMBatch one{Tensor({1, 2}, {1, 0}), Tensor({1, 2}), {0.42f}};
  fm::VelocityModel zero = [](nm::Graph& g, nm::Var x, std::span<const float>) { return g.constant(Tensor(x.shape())); };
  nm::Graph g2;
  EXPECT_FLOAT_EQ(fm::fm_loss(g2, zero, one).value().item(), 0.5f);
}

TEST(Loss, NonFiniteModelOutputFails) {
  fm::FMBatch one{Tensor({1, 2}, {1, 0}), Tensor({1, 2}), {0.5f}};
  fm::VelocityModel bad = [](nm::Graph& g, nm::Var x, std::span<const float>) {
    return g.constant(Tensor(x.shape(), std::nanf("")));
  };
  nm::Graph g;
  EXPECT_THROW(fm::fm_loss(g, bad, one), fm::NonFiniteError);
}

TEST(Loss, LinearModelGradientMatchesFiniteDifferences) {
  // u(x, t) = a * x + b * t on a 64-bit batch.
  nm::Rng rng(6);
  fm::BasicFMBatch<double> batch{nm::normal_tensor<double>({5, 3}, rng), nm::normal_tensor<double>({5, 3}, rng),
                                 {0.1, 0.3, 0.5, 0.7, 0.9}};
  auto fn = [&](nm::Graph64& g, const std::vector<nm::Var64>& p) {
    fm::BasicVelocityModel<double> model = [&](nm::Graph64& gg, nm::Var64 x, std::span<const double> t) {
      Tensor64 tt({5, 3});
      for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t c = 0; c < 3; ++c) tt.at(r, c) = t[r];
      auto a = nm::expand(p[0], 0, 3);
      auto b = nm::expand(p[1], 0, 3);
      return nm::add(nm::mul_rowvec(x, a), nm::mul_rowvec(gg.constant(tt), b));
    };
    return fm::fm_loss(g, model, batch);
  };
  const auto r = wmsynth::testing::gradcheck(fn, {Tensor64::scalar(0.7), Tensor64::scalar(-0.4)});
  EXPECT_EQ(r.checked, 2u);
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(Sampler, ConstantOracleExactForAnyStepCount) {
  // Dyadic values keep every Euler update exact in float.
  const Tensor clean({2, 3}, {0.5f, -1.25f, 2.0f, 0.0f, 0.75f, -0.5f});
  const Tensor noise({2, 3}, {1.0f, 0.25f, -2.0f, 1.5f, -0.125f, 0.0f});
  for (int steps : {1, 2, 4, 8, 16}) {
    EXPECT_EQ(fm::ode_integrate(pair_oracle(clean, noise), noise, steps), clean) << steps;
  }
}

TEST(Sampler, ConstantOracleOneStepOnRandomPair) {
  nm::Rng rng(7);
  const Tensor clean = nm::normal_tensor<float>({4, 8}, rng);
  const Tensor noise = nm::normal_tensor<float>({4, 8}, rng);
  const Tensor x = fm::ode_integrate(pair_oracle(clean, noise), noise, 1);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(x[i], clean[i], 1e-6);
}

TEST(Sampler, DeterministicGivenSeedAndReportsStep) {
  fm::VelocityField f = [](const Tensor& x, float t) {
    Tensor u = x;
    for (auto& v : u.storage()) v *= t;
    return u;
  };
  nm::Rng a(8), b(8);
  EXPECT_EQ(fm::ode_sample(f, {3, 2}, a, 10), fm::ode_sample(f, {3, 2}, b, 10));
  EXPECT_THROW(fm::ode_sample(f, {3, 2}, a, 0), std::invalid_argument);

  fm::VelocityField blow = [](const Tensor& x, float t) {
    return Tensor(x.shape(), t < 0.6f ? std::numeric_limits<float>::infinity() : 0.0f);
  };
  try {
    fm::ode_integrate(blow, Tensor({1, 1}), 4);
    FAIL();
  } catch (const fm::NonFiniteError& e) {
    EXPECT_EQ(e.step(), 2);
  }
}

TEST(FlowHead, VelocityFromCleanEstimate) {
  nm::Rng rng(9);
  nm::ParameterStore store;
  fm::FlowHead head(store, "head", {.data_dim = 4, .cond_dim = 2, .hidden = 16}, rng);
  const Tensor x = nm::normal_tensor<float>({3, 4}, rng);
  const Tensor c = nm::normal_tensor<float>({3, 2}, rng);
  const std::vector<float> t{0.05f, 0.5f, 1.0f};
  auto run = [&](nm::GradMode mode) {
    nm::Graph g(mode);
    return head.forward(g, store, g.constant(x), t, g.constant(c)).value();
  };
  // Output layer bias far outside the clamp: x0_hat = 10 while recording,
  // clamped to 1.5 at inference.
  for (auto& [name, p] : store.items()) {
    if (name.ends_with(".bias")) p.value.fill(0.0f);
    if (name.ends_with(".weight")) p.value.fill(0.0f);
  }
  const std::string last = "head.2.bias";
  ASSERT_TRUE(store.contains(last)) << "unexpected layer naming";
  store.at(last).value.fill(10.0f);
  const Tensor rec = run(nm::GradMode::kRecord), inf = run(nm::GradMode::kInference);
  for (std::size_t r = 0; r < 3; ++r) {
    const float denom = std::max(t[r], 0.1f);
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_NEAR(rec.at(r, i), (x.at(r, i) - 10.0f) / denom, 1e-4);
      EXPECT_NEAR(inf.at(r, i), (x.at(r, i) - 1.5f) / denom, 1e-4);
    }
  }
}
