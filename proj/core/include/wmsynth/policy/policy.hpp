#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wmsynth/flowmatch/flow_head.hpp"
#include "wmsynth/flowmatch/flowmatch.hpp"
#include "wmsynth/kinematics/minmax.hpp"
#include "wmsynth/worldmodel/codec.hpp"

// Action-chunk policy: frame + task token + robot state -> next 16 actions.
namespace wmsynth::policy {

using kinematics::ActionVector;
using numerics::Tensor;
using sim::Frame;

inline constexpr std::size_t kChunk = 16;

struct PolicyConfig {
  std::size_t token_dim = 16;
  std::size_t trunk_hidden = 256;
  std::size_t feature_dim = 128;
  std::size_t head_hidden = 256;
  std::size_t head_depth = 2;
  double jitter = 0.1;  // brightness and contrast factors drawn from [1 - j, 1 + j]
  flowmatch::FMConfig fm;
};

enum class DataSelector { kReal, kSynthetic, kMixed };
const char* selector_name(DataSelector s);
DataSelector parse_selector(const std::string& s);

struct TrainStage {
  DataSelector data = DataSelector::kReal;
  int steps = 200;
  double learning_rate = 1e-4;
};
using TrainSchedule = std::vector<TrainStage>;

// Throws std::invalid_argument when a stage has fewer than one step.
void validate_schedule(const TrainSchedule& s);

struct PolicyData {
  std::span<const sim::Episode> real;
  std::span<const sim::Episode> synthetic;
};

struct StageTrace {
  std::string name;
  std::vector<float> loss;
};

class PolicyNet {
 public:
  PolicyNet() = default;
  PolicyNet(worldmodel::FrameCodec codec, const kinematics::MinMaxStats& stats, std::vector<std::string> vocabulary,
            const PolicyConfig& cfg, std::uint64_t seed);

  const worldmodel::FrameCodec& codec() const { return codec_; }
  const kinematics::MinMaxStats& stats() const { return stats_; }
  void set_stats(const kinematics::MinMaxStats& s) { stats_ = s; }
  const std::vector<std::string>& vocabulary() const { return vocab_; }
  const PolicyConfig& config() const { return cfg_; }
  std::size_t token_id(const std::string& token) const;
  numerics::ParameterStore& params() { return store_; }
  const numerics::ParameterStore& params() const { return store_; }

  // latents [B, L], normalized states [B, 20]
  numerics::Var velocity(numerics::Graph& g, numerics::Var noisy, std::span<const float> t, const Tensor& latents,
                         std::span<const std::size_t> tokens, const Tensor& states) const;

  // Normalized chunks [B, 16, 20] for raw states; row i draws noise from rngs[i].
  Tensor predict_normalized(const Tensor& latents, std::span<const std::size_t> tokens,
                            std::span<const ActionVector> states, std::span<numerics::Rng* const> rngs,
                            int ode_steps = 0) const;
  // Denormalized, re-orthonormalized chunk of 16 actions.
  std::vector<ActionVector> predict_chunk(const Frame& frame, const std::string& token, const ActionVector& state,
                                          numerics::Rng& rng, int ode_steps = 0) const;

  numerics::Container to_container() const;
  static PolicyNet from_container(const numerics::Container& c);

 private:
  worldmodel::FrameCodec codec_;
  kinematics::MinMaxStats stats_;
  std::vector<std::string> vocab_;
  PolicyConfig cfg_;
  mutable numerics::ParameterStore store_;
  numerics::Embedding token_;
  numerics::Mlp trunk_;
  flowmatch::FlowHead head_;
};

// Runs the stages in order. Samples (frame_t, token, state_t = action_{t-1},
// actions_{t..t+15}); action_{-1} is the home pose encoding and chunks past
// the episode end repeat the final action under a zero loss mask.
PolicyNet train_policy(const PolicyData& data, const TrainSchedule& schedule, const PolicyNet& init,
                       std::size_t batch, std::uint64_t seed, std::vector<StageTrace>* traces = nullptr);

// state_t for an episode: action_{t-1}, or the home pose encoding at t = 0.
ActionVector state_at(std::span<const ActionVector> actions, std::size_t t);

// frame, token, state, step index -> chunk of raw actions
using ChunkPredictor =
    std::function<std::vector<ActionVector>(const Frame&, const std::string&, const ActionVector&, std::size_t)>;

ChunkPredictor make_predictor(const PolicyNet& policy, std::uint64_t seed, int ode_steps = 0);

// Closed loop: execute `replan_every` actions of each chunk, re-observe,
// re-predict. Stops at max_steps or as soon as the task predicate holds.
// An action the simulator rejects ends the episode.
sim::Episode rollout_policy(const ChunkPredictor& predictor, std::uint64_t sim_seed, const std::string& token,
                            std::size_t max_steps, std::size_t replan_every,
                            const sim::FrameGeometry& geometry = {}, const sim::SimConfig& cfg = {});

}  // namespace wmsynth::policy
