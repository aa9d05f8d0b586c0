#pragma once

#include <span>
#include <string>

#include "wmsynth/numerics/layers.hpp"

namespace wmsynth::flowmatch {

struct FlowHeadConfig {
  std::size_t data_dim = 0;
  std::size_t cond_dim = 0;
  std::size_t hidden = 256;
  std::size_t time_dim = 16;
  std::size_t depth = 2;  // hidden layers
  double t_floor = 0.1;
  // Inference-only bound on the clean-sample estimate; <= 0 disables it.
  double clamp = 1.5;
};

// Conditional velocity through a clean-sample estimate: the MLP predicts
// x0_hat = MLP([x_t, c, phi(t)]) and the velocity is (x_t - x0_hat) / max(t, t_floor).
// For t >= t_floor this is the exact velocity of the straight path given x0_hat.
// A direct velocity MLP would have to pass the noise through its hidden
// layers at full rank; the clean sample depends on x_t only weakly.
class FlowHead {
 public:
  FlowHead() = default;
  FlowHead(numerics::ParameterStore& store, const std::string& name, const FlowHeadConfig& cfg, numerics::Rng& rng);

  // noisy [B, data_dim], cond [B, cond_dim] -> velocity [B, data_dim]
  numerics::Var forward(numerics::Graph& g, numerics::ParameterStore& store, numerics::Var noisy,
                        std::span<const float> t, numerics::Var cond) const;
  const FlowHeadConfig& config() const { return cfg_; }

 private:
  FlowHeadConfig cfg_;
  numerics::Mlp mlp_;
};

}  // namespace wmsynth::flowmatch
