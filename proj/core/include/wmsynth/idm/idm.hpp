#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wmsynth/flowmatch/flow_head.hpp"
#include "wmsynth/flowmatch/flowmatch.hpp"
#include "wmsynth/kinematics/minmax.hpp"
#include "wmsynth/worldmodel/codec.hpp"

// Inverse dynamics: two frames kChunk steps apart -> the kChunk actions between them.
namespace wmsynth::idm {

using kinematics::ActionVector;
using numerics::Tensor;
using sim::Frame;

inline constexpr std::size_t kChunk = 16;

struct IdmConfig {
  std::size_t fusion_hidden = 256;
  std::size_t feature_dim = 128;
  std::size_t head_hidden = 256;
  std::size_t head_depth = 2;
  // Start from a copy of the codec encoder and train it with the rest of the
  // model. When false the frozen codec latents are used.
  bool train_encoder = true;
  flowmatch::FMConfig fm;
};

struct IdmTrainConfig {
  int steps = 10000;
  double learning_rate = 1e-4;
  std::size_t batch = 32;
  // Probability of drawing a sample from the task pool when both pools are non-empty.
  double task_fraction = 0.5;
};

struct IdmTrace {
  std::vector<float> loss;
  std::vector<std::string> warnings;
};

// Each frame is encoded to standardized latents (the IDM's own copy of the
// codec encoder, or the frozen codec); the latents of both frames and their
// difference feed a fusion MLP whose output conditions a flow-matching head
// over the normalized 16 x 20 chunk. Neither a task token nor a robot state
// enters any of its operations.
class IdmNet {
 public:
  IdmNet() = default;
  IdmNet(worldmodel::FrameCodec codec, const kinematics::MinMaxStats& stats, const IdmConfig& cfg,
         std::uint64_t seed);

  const worldmodel::FrameCodec& codec() const { return codec_; }
  const kinematics::MinMaxStats& stats() const { return stats_; }
  void set_stats(const kinematics::MinMaxStats& s) { stats_ = s; }
  const IdmConfig& config() const { return cfg_; }
  numerics::ParameterStore& params() { return store_; }
  const numerics::ParameterStore& params() const { return store_; }
  const std::string& id() const { return id_; }
  void set_id(std::string id) { id_ = std::move(id); }

  // pooled [B, codec input] -> standardized latents [B, L]
  Tensor encode_pooled(const Tensor& pooled) const;
  numerics::Var encode(numerics::Graph& g, numerics::Var pooled) const;

  numerics::Var velocity(numerics::Graph& g, numerics::Var noisy, std::span<const float> t, numerics::Var latent_a,
                         numerics::Var latent_b) const;
  numerics::Var velocity(numerics::Graph& g, numerics::Var noisy, std::span<const float> t,
                         const Tensor& latent_a, const Tensor& latent_b) const;

  // Normalized chunk [16, 20]; `ode_steps` <= 0 uses config().fm.steps.
  Tensor predict_actions(const Frame& a, const Frame& b, numerics::Rng& rng, int ode_steps = 0) const;
  // Rows of latent pairs [B, L] -> [B, 16, 20]. Row i draws its noise from rngs[i].
  Tensor predict_latent_pairs(const Tensor& za, const Tensor& zb, std::span<numerics::Rng* const> rngs,
                              int ode_steps = 0) const;
  // Mean squared flow-matching residual of a chunk re-noised at t = 0.5.
  std::vector<double> residuals(const Tensor& za, const Tensor& zb, const Tensor& chunks,
                                std::span<numerics::Rng* const> rngs) const;

  numerics::Container to_container() const;
  static IdmNet from_container(const numerics::Container& c);

 private:
  worldmodel::FrameCodec codec_;
  kinematics::MinMaxStats stats_;
  IdmConfig cfg_;
  mutable numerics::ParameterStore store_;
  numerics::Mlp encoder_;
  Tensor neg_mean_, inv_std_;  // codec latent standardization
  numerics::Mlp fusion_;
  flowmatch::FlowHead head_;
  std::string id_ = "idm";
};

// Samples (frame_t, frame_{t+16}, actions_{t..t+15}) uniformly over valid t
// of episodes drawn from the general or task pool. Episodes shorter than
// 17 frames are skipped with a warning; throws if nothing is usable or any
// episode carries the test split.
IdmNet train_idm(std::span<const sim::Episode> general, std::span<const sim::Episode> task, const IdmNet& init,
                 const IdmTrainConfig& cfg, std::uint64_t seed, IdmTrace* trace = nullptr);

// Labeling windows for a video with frames [0..N]: (0,16), (16,32), ... and a
// tail window (N-16, N) when N is not a multiple of 16. Throws when N < 16.
std::vector<std::size_t> label_windows(std::size_t n);

struct LabelResult {
  sim::Episode episode;
  std::size_t rotation_failures = 0;
};

// Pseudo-labels a generated video: stitched actions (last writer wins),
// denormalized with the checkpoint statistics and re-orthonormalized.
LabelResult pseudo_label(const IdmNet& idm, const std::vector<Frame>& frames, numerics::Rng& rng, int ode_steps = 0);
// Batched over videos; video i is bit-identical to pseudo_label with Rng(seeds[i]).
std::vector<LabelResult> pseudo_label_batch(const IdmNet& idm, std::span<const std::vector<Frame>> videos,
                                            std::span<const std::uint64_t> seeds, int ode_steps = 0);

// Normalized actions of an episode as [N, 20].
Tensor normalized_actions(const kinematics::MinMaxStats& stats, std::span<const ActionVector> actions);

}  // namespace wmsynth::idm
