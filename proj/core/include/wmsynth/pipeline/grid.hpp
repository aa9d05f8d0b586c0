#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "wmsynth/eval/report.hpp"
#include "wmsynth/idm/idm.hpp"
#include "wmsynth/pipeline/config.hpp"
#include "wmsynth/pipeline/datasets.hpp"
#include "wmsynth/pipeline/manifest.hpp"
#include "wmsynth/policy/policy.hpp"
#include "wmsynth/worldmodel/worldmodel.hpp"

namespace wmsynth::pipeline {

// A failed stage; the message reads "stage=<name> seed=<master seed>: <cause>".
class StageError : public std::runtime_error {
 public:
  StageError(const std::string& stage, std::uint64_t seed, const std::string& cause);
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

enum class Condition { kReal, kRealSyn, kRealSyn10x };
inline constexpr Condition kConditions[] = {Condition::kReal, Condition::kRealSyn, Condition::kRealSyn10x};
const char* condition_name(Condition c);  // "Real", "Real+Syn", "Real+Syn10x"
Condition parse_condition(const std::string& s);

// Which world model produced a generation-quality measurement.
enum class Generator { kFinetuned, kZeroShot, kUntrained };

struct RunOptions {
  bool force = false;    // discard a run directory made with a different config
  bool persist = false;  // also write datasets, videos and labeled episodes
  bool cached_only = false;  // fail instead of computing a missing metric
  std::size_t workers = 1;
  std::ostream* log = nullptr;
};

// One experiment in a run directory. Every stage is computed on first use,
// checkpointed under <out>/checkpoints or <out>/results, and recorded in
// <out>/manifest.json; later calls and later processes reuse the artifact.
// Deleting an artifact re-runs that stage and nothing upstream of it.
class Run {
 public:
  Run(ExperimentConfig cfg, std::filesystem::path out_dir, RunOptions opts = {});

  const ExperimentConfig& config() const { return cfg_; }
  const std::filesystem::path& dir() const { return dir_; }
  const RunManifest& manifest() const { return manifest_; }

  const Datasets& datasets();
  kinematics::MinMaxStats general_stats();
  kinematics::MinMaxStats regime_stats(std::size_t n);

  const worldmodel::FrameCodec& codec();
  const worldmodel::WorldModel& wm_base();       // pretrained on general motion
  const worldmodel::WorldModel& wm_untrained();  // random dynamics on the same codec
  const worldmodel::WorldModel& wm_finetuned(std::size_t n);

  const idm::IdmNet& idm_base();
  const idm::IdmNet& idm_regime(std::size_t n);

  const policy::PolicyNet& policy_base();
  const policy::PolicyNet& policy(std::size_t n, Condition c);

  // Rollout (frame f, seed k) of the finetuned model sits at f * K + k, where
  // K = rollouts_per_frame; each video holds the initial frame plus
  // rollout_length generated frames.
  const std::vector<std::vector<sim::Frame>>& rollouts(std::size_t n);
  // Pseudo-labeled rollouts in the same order; the single set is k = 0.
  const std::vector<sim::Episode>& labeled(std::size_t n);
  std::vector<sim::Episode> synthetic(std::size_t n, bool multi);
  // Drops in-memory rollouts and labels of regime n.
  void release(std::size_t n);

  eval::FrechetReport generation(Generator g, std::size_t n = 0);
  eval::ConditionResult evaluate(std::size_t n, Condition c);

  // Protocol counts of this run; throws std::logic_error when one disagrees
  // with the configuration.
  nlohmann::json self_check();

  eval::ExperimentReport run_grid();

 private:
  template <typename T, typename Make, typename Save, typename Load>
  const T& stage(std::map<std::string, T>& cache, const std::string& name, const std::string& rel, Make make,
                 Save save, Load load);
  nlohmann::json cached_result(const std::string& name, const std::function<nlohmann::json()>& make);
  void record(const std::string& name, const std::string& rel, double seconds);
  void log(const std::string& line) const;
  std::vector<std::vector<sim::Frame>> generate_videos(const worldmodel::WorldModel& wm,
                                                       const std::vector<std::uint64_t>& seeds,
                                                       std::size_t per_frame);

  ExperimentConfig cfg_;
  std::filesystem::path dir_;
  RunOptions opts_;
  RunManifest manifest_;

  std::optional<Datasets> data_;
  std::map<std::string, worldmodel::FrameCodec> codecs_;
  std::map<std::string, worldmodel::WorldModel> wms_;
  std::map<std::string, idm::IdmNet> idms_;
  std::map<std::string, policy::PolicyNet> policies_;
  std::map<std::size_t, std::vector<std::vector<sim::Frame>>> videos_;
  std::map<std::size_t, std::vector<sim::Episode>> labeled_;
  double nested_seconds_ = 0.0;  // time spent in stages triggered by the running one
};

// Fresh grid in `out_dir` (see Run).
eval::ExperimentReport run_grid(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                RunOptions opts = {});

// Video directories: index.json plus one frames.bin holding every frame.
void write_videos(const std::filesystem::path& dir, const std::vector<std::vector<sim::Frame>>& videos,
                  bool force = false);
std::vector<std::vector<sim::Frame>> read_videos(const std::filesystem::path& dir);

}  // namespace wmsynth::pipeline
