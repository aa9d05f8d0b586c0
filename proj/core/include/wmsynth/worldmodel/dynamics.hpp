#pragma once

#include <span>
#include <string>
#include <vector>

#include "wmsynth/numerics/layers.hpp"

namespace wmsynth::worldmodel {

struct DynamicsConfig {
  std::size_t latent_dim = 64;
  std::size_t model_dim = 64;
  std::size_t heads = 2;
  std::size_t blocks = 2;
  std::size_t ffn_dim = 128;
  std::size_t window = 16;
  std::size_t token_dim = 16;
  std::size_t time_dim = 16;
  bool operator==(const DynamicsConfig&) const = default;
};

// Transformer velocity network over a window of latent frames. The sequence
// is a conditioning token followed by the W noisy latents; the conditioning
// vector (first-frame latent, task token embedding, timestep features) is
// also added to every latent token.
class DynamicsNet {
 public:
  DynamicsNet() = default;
  DynamicsNet(numerics::ParameterStore& store, const DynamicsConfig& cfg, std::size_t vocab, numerics::Rng& rng);

  // noisy [B, W, L], first [B, L] -> velocity [B, W, L]
  numerics::Var forward(numerics::Graph& g, numerics::ParameterStore& store, numerics::Var noisy,
                        std::span<const float> t, numerics::Var first, std::span<const std::size_t> tokens) const;

  // Low-rank adapters on the attention projections and feed-forward layers.
  void attach_adapters(numerics::ParameterStore& store, const numerics::LoraConfig& cfg, numerics::Rng& rng);
  void merge_adapters(numerics::ParameterStore& store);
  bool has_adapters() const;
  std::vector<std::string> adapter_targets() const;

  const DynamicsConfig& config() const { return cfg_; }
  std::size_t vocab() const { return token_.vocab(); }

 private:
  struct Block {
    numerics::LayerNorm ln1, ln2;
    numerics::Linear q, k, v, o, fc1, fc2;
  };
  std::vector<numerics::Linear*> adaptable();

  DynamicsConfig cfg_;
  numerics::Linear in_proj_, cond_proj_, out_proj_;
  numerics::Embedding token_;
  numerics::LayerNorm ln_out_;
  std::vector<Block> blocks_;
};

}  // namespace wmsynth::worldmodel
