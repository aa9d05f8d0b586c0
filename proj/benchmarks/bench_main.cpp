#include <vector>

#include <benchmark/benchmark.h>

#include "wmsynth/eval/frechet.hpp"
#include "wmsynth/flowmatch/flow_head.hpp"
#include "wmsynth/flowmatch/flowmatch.hpp"
#include "wmsynth/numerics/adam.hpp"
#include "wmsynth/numerics/ops.hpp"
#include "wmsynth/numerics/rng.hpp"
#include "wmsynth/sim/render.hpp"
#include "wmsynth/sim/sim.hpp"

namespace {

using namespace wmsynth;

void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  numerics::Rng rng(1);
  const auto a = numerics::normal_tensor<float>({n, n}, rng);
  const auto b = numerics::normal_tensor<float>({n, n}, rng);
  numerics::Tensor c({n, n});
  for (auto _ : state) {
    numerics::gemm_accumulate(a.data().data(), b.data().data(), c.data().data(), n, n, n);
    benchmark::DoNotOptimize(c.data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(2 * n * n * n));
}
BENCHMARK(BM_Gemm)->Arg(64)->Arg(128)->Arg(256);

// One flow-matching training step of an action head on 16x20 chunks.
void BM_FlowHeadStep(benchmark::State& state) {
  const auto B = static_cast<std::size_t>(state.range(0));
  numerics::Rng rng(2);
  numerics::ParameterStore store;
  flowmatch::FlowHead head(store, "head", {.data_dim = 320, .cond_dim = 64}, rng);
  numerics::Adam adam({.learning_rate = 1e-4});
  const auto x = numerics::normal_tensor<float>({B, 320}, rng);
  const auto cond = numerics::normal_tensor<float>({B, 64}, rng);
  for (auto _ : state) {
    const auto batch = flowmatch::make_batch(x, rng, {});
    store.zero_grad();
    numerics::Graph g;
    flowmatch::VelocityModel u = [&](numerics::Graph& gg, numerics::Var noisy, std::span<const float> t) {
      return head.forward(gg, store, noisy, t, gg.constant(cond));
    };
    g.backward(flowmatch::fm_loss(g, u, batch));
    adam.step(store);
  }
}
BENCHMARK(BM_FlowHeadStep)->Arg(8)->Arg(32);

void BM_Render(benchmark::State& state) {
  const sim::SimState s = sim::reset(3);
  for (auto _ : state) benchmark::DoNotOptimize(sim::render(s));
}
BENCHMARK(BM_Render);

void BM_Frechet(benchmark::State& state) {
  std::vector<sim::Frame> a, b;
  for (int i = 0; i < 64; ++i) {
    a.push_back(sim::render(sim::reset(100 + i)));
    b.push_back(sim::render(sim::reset(200 + i)));
  }
  for (auto _ : state) benchmark::DoNotOptimize(eval::frechet_feature_distance(a, b, 7).distance);
}
BENCHMARK(BM_Frechet);

}  // namespace
BENCHMARK_MAIN();
