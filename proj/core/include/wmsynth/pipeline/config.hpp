#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wmsynth/idm/idm.hpp"
#include "wmsynth/policy/policy.hpp"
#include "wmsynth/worldmodel/worldmodel.hpp"

namespace wmsynth::pipeline {

struct PolicyBaseConfig {
  int steps = 1500;
  double learning_rate = 1e-3;
};

struct ExperimentConfig {
  std::uint64_t master_seed = 1;

  // Data protocol.
  std::size_t total_demos = 60;
  std::size_t test_demos = 40;  // the last ones
  std::size_t train_pool = 20;  // the first ones; regimes take prefixes
  std::vector<std::size_t> regimes{5, 10, 20};
  std::size_t general_episodes = 66;
  std::size_t init_frames = 56;
  std::size_t rollouts_per_frame = 10;
  double demo_noise = 1.0;
  sim::FrameGeometry geometry;
  std::vector<std::string> vocabulary = worldmodel::default_vocabulary();
  std::string task = sim::kTaskHandover;

  // World model.
  worldmodel::CodecConfig codec;
  worldmodel::DynamicsConfig dynamics;
  flowmatch::FMConfig fm;
  worldmodel::WorldModelTrainConfig wm_pretrain{2000, 16, 1e-3, {}};
  worldmodel::WorldModelTrainConfig wm_finetune{800, 16, 1e-3, {}};
  std::size_t rollout_length = 112;  // generated frames after the initial one
  int rollout_ode_steps = 10;

  // Inverse dynamics.
  idm::IdmConfig idm;
  idm::IdmTrainConfig idm_pretrain{3000, 1e-3, 32, 0.0};
  idm::IdmTrainConfig idm_finetune{10000, 1e-4, 32, 0.5};
  int idm_ode_steps = 10;

  // Policy.
  policy::PolicyConfig policy;
  PolicyBaseConfig policy_base;
  policy::TrainSchedule real_only{{policy::DataSelector::kReal, 200, 1e-4}};
  policy::TrainSchedule real_syn{{policy::DataSelector::kSynthetic, 400, 1e-4}, {policy::DataSelector::kReal, 200, 1e-4}};
  std::size_t policy_batch = 32;
  int eval_ode_steps = 10;

  // Closed-loop success rate on the test seeds.
  std::size_t sr_max_steps = 200;
  std::size_t replan_every = 8;
  std::size_t sr_episodes = 40;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& c);
// Missing fields keep their defaults; unknown fields are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

// FNV-1a of the canonical JSON form, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

// Seeds derived from the master seed; every stage uses its own tag.
std::uint64_t stage_seed(const ExperimentConfig& c, const char* tag, std::initializer_list<std::uint64_t> path = {});

}  // namespace wmsynth::pipeline
