#include "wmsynth/flowmatch/flow_head.hpp"

#include <algorithm>

#include "wmsynth/flowmatch/flowmatch.hpp"
#include "wmsynth/numerics/ops.hpp"

namespace wmsynth::flowmatch {

using numerics::Graph;
using numerics::ParameterStore;
using numerics::Var;

FlowHead::FlowHead(ParameterStore& store, const std::string& name, const FlowHeadConfig& cfg, numerics::Rng& rng)
    : cfg_(cfg) {
  std::vector<std::size_t> dims{cfg.data_dim + cfg.cond_dim + cfg.time_dim};
  for (std::size_t i = 0; i < cfg.depth; ++i) dims.push_back(cfg.hidden);
  dims.push_back(cfg.data_dim);
  mlp_ = numerics::Mlp(store, name, dims, rng);
}

Var FlowHead::forward(Graph& g, ParameterStore& store, Var noisy, std::span<const float> t, Var cond) const {
  const std::size_t B = noisy.shape().at(0), D = cfg_.data_dim;
  if (t.size() != B) throw numerics::ShapeError("flow head: one timestep per row, got " + std::to_string(t.size()));
  Var temb = g.constant(timestep_features<float>(t, cfg_.time_dim));
  Var clean = mlp_.forward(g, store, numerics::concat<float>({noisy, cond, temb}, 1));
  if (!g.recording() && cfg_.clamp > 0.0) {
    numerics::Tensor bounded = clean.value();
    const float c = static_cast<float>(cfg_.clamp);
    for (float& v : bounded.data()) v = std::clamp(v, -c, c);
    clean = g.constant(std::move(bounded));
  }
  numerics::Tensor inv({B, D});
  for (std::size_t r = 0; r < B; ++r) {
    const float k = static_cast<float>(1.0 / std::max(static_cast<double>(t[r]), cfg_.t_floor));
    std::fill_n(inv.data().begin() + r * D, D, k);
  }
  return numerics::mul(numerics::sub(noisy, clean), g.constant(std::move(inv)));
}

}  // namespace wmsynth::flowmatch
