#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "wmsynth/flowmatch/flowmatch.hpp"
#include "wmsynth/kinematics/minmax.hpp"
#include "wmsynth/worldmodel/codec.hpp"
#include "wmsynth/worldmodel/dynamics.hpp"

namespace wmsynth::worldmodel {

class UnknownTokenError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::vector<std::string> default_vocabulary();

struct WorldModelTrainConfig {
  int steps = 2000;
  std::size_t batch = 16;
  double learning_rate = 1e-3;
  numerics::LoraConfig lora;
};

struct WorldModelTrace {
  std::vector<float> loss;
};

// Frame codec + latent dynamics + task vocabulary. Copyable value type.
class WorldModel {
 public:
  WorldModel() = default;
  // Fresh (untrained) dynamics on top of an existing codec.
  WorldModel(FrameCodec codec, const DynamicsConfig& dyn, std::vector<std::string> vocabulary,
             const flowmatch::FMConfig& fm, std::uint64_t seed);

  const FrameCodec& codec() const { return codec_; }
  const DynamicsNet& net() const { return net_; }
  const std::vector<std::string>& vocabulary() const { return vocab_; }
  const flowmatch::FMConfig& fm() const { return fm_; }
  std::size_t window() const { return net_.config().window; }
  std::size_t token_id(const std::string& token) const;

  numerics::ParameterStore& params() { return store_; }
  const numerics::ParameterStore& params() const { return store_; }

  bool has_adapters() const { return net_.has_adapters(); }
  void attach_adapters(const numerics::LoraConfig& cfg, std::uint64_t seed);
  // Folds adapters into the dense weights; a no-op without adapters.
  void merge_adapters();
  const numerics::LoraConfig& lora() const { return lora_; }

  void set_action_stats(const kinematics::MinMaxStats& s) { stats_ = s; }
  const std::optional<kinematics::MinMaxStats>& action_stats() const { return stats_; }

  // Velocity for a batch of noisy windows [B, W, L].
  numerics::Var velocity(numerics::Graph& g, numerics::Var noisy, std::span<const float> t, numerics::Var first,
                         std::span<const std::size_t> tokens);

  // Frames 1..T following `first`. Windows of W latent frames are sampled
  // with the Euler sampler, decoded, and the last decoded frame is re-encoded
  // to condition the next window. `ode_steps` <= 0 uses fm().steps.
  std::vector<Frame> predict_rollout(const Frame& first, const std::string& token, std::size_t T,
                                     numerics::Rng& rng, int ode_steps = 0) const;
  // Batched form; rollout i is bit-identical to predict_rollout with Rng(seeds[i]).
  std::vector<std::vector<Frame>> predict_rollouts(std::span<const Frame> firsts, const std::string& token,
                                                   std::size_t T, std::span<const std::uint64_t> seeds,
                                                   int ode_steps = 0) const;

  numerics::Container to_container() const;
  static WorldModel from_container(const numerics::Container& c);

 private:
  FrameCodec codec_;
  mutable numerics::ParameterStore store_;
  DynamicsNet net_;
  std::vector<std::string> vocab_;
  flowmatch::FMConfig fm_;
  numerics::LoraConfig lora_;
  std::optional<kinematics::MinMaxStats> stats_;
};

// Trains the dynamics on W-frame latent clips of `episodes` conditioned on
// (clip's first-frame latent, task token). With use_adapters, `init` is
// treated as a frozen base: only the adapter factors train. Throws on test
// episodes, unknown tokens, and a non-finite loss.
WorldModel train_worldmodel(std::span<const sim::Episode> episodes, const WorldModel& init, bool use_adapters,
                            const WorldModelTrainConfig& cfg, std::uint64_t seed, WorldModelTrace* trace = nullptr);

// Loss of `model` on one batch drawn with `seed` (used to compare models on identical data).
float worldmodel_batch_loss(const WorldModel& model, std::span<const sim::Episode> episodes, std::size_t batch,
                            std::uint64_t seed);

}  // namespace wmsynth::worldmodel
