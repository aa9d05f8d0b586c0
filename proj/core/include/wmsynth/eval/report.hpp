#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wmsynth/eval/frechet.hpp"
#include "wmsynth/eval/mse.hpp"

namespace wmsynth::eval {

struct SuccessReport {
  std::size_t successes = 0;
  std::size_t total = 0;
  double rate() const { return total == 0 ? 0.0 : static_cast<double>(successes) / static_cast<double>(total); }
};

// Mean of detect_success over the episodes.
SuccessReport success_rate(std::span<const sim::Episode> episodes, const sim::SimConfig& cfg = {});

// One grid cell: a training regime (number of real demos) and a condition.
struct ConditionResult {
  std::size_t regime = 0;
  std::string condition;
  MseReport mse;
  SuccessReport success;
};

struct RegimeGeneration {
  std::size_t regime = 0;
  FrechetReport finetuned, zero_shot, untrained;
};

struct ExperimentReport {
  std::uint64_t master_seed = 0;
  std::string config_hash;
  std::vector<ConditionResult> results;
  std::vector<RegimeGeneration> generation;
  nlohmann::json counts = nlohmann::json::object();
};

nlohmann::json to_json(const FrechetReport& f);
FrechetReport frechet_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ConditionResult& c);
ConditionResult condition_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentReport& r);
ExperimentReport report_from_json(const nlohmann::json& j);

// CSV: regime,condition,component,mean_mse,std_mse,n_episodes (one row per
// regime x condition x component, fixed formatting).
std::string mse_csv(const ExperimentReport& r);
// Grouped bar chart of one component: groups are regimes, bars are
// conditions, whiskers one standard deviation.
std::string mse_svg(const ExperimentReport& r, Component c);

// Writes mse.csv, mse_<component>.svg (x3), generation.csv and summary.json.
// Throws std::invalid_argument on an empty report, std::runtime_error when
// the directory cannot be written.
std::vector<std::filesystem::path> emit_report(const ExperimentReport& r, const std::filesystem::path& out_dir);

}  // namespace wmsynth::eval
