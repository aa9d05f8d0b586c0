#pragma once

#include "wmsynth/pipeline/config.hpp"

namespace wmsynth::testing {

// Every stage of the grid at a size that runs in seconds. Protocol counts
// are scaled down; the structure (nested regimes, 1x/Kx rollouts, three
// conditions) is unchanged.
inline pipeline::ExperimentConfig tiny_config(std::uint64_t seed = 1) {
  pipeline::ExperimentConfig c;
  c.master_seed = seed;
  c.total_demos = 6;
  c.test_demos = 2;
  c.train_pool = 3;
  c.regimes = {1, 2};
  c.general_episodes = 2;
  c.init_frames = 2;
  c.rollouts_per_frame = 2;
  c.codec = {.latent_dim = 8, .hidden = 16, .pool = 4, .steps = 10, .batch = 8};
  c.dynamics = {.latent_dim = 8, .model_dim = 16, .heads = 2, .blocks = 1, .ffn_dim = 16};
  c.fm.steps = 2;
  c.wm_pretrain = {.steps = 4, .batch = 2};
  c.wm_finetune = {.steps = 2, .batch = 2};
  c.rollout_length = 17;
  c.rollout_ode_steps = 2;
  c.idm = {.fusion_hidden = 16, .feature_dim = 8, .head_hidden = 16};
  c.idm_pretrain = {.steps = 4, .batch = 4};
  c.idm_finetune = {.steps = 4, .batch = 4};
  c.idm_ode_steps = 2;
  c.policy = {.trunk_hidden = 16, .feature_dim = 8, .head_hidden = 16};
  c.policy_base = {.steps = 4};
  c.real_only = {{policy::DataSelector::kReal, 3, 1e-3}};
  c.real_syn = {{policy::DataSelector::kSynthetic, 3, 1e-3}, {policy::DataSelector::kReal, 2, 1e-3}};
  c.policy_batch = 4;
  c.eval_ode_steps = 2;
  c.sr_max_steps = 16;
  c.sr_episodes = 2;
  return c;
}

}  // namespace wmsynth::testing
