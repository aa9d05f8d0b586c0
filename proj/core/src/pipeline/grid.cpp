#include "wmsynth/pipeline/grid.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>

#include "wmsynth/eval/frechet.hpp"
#include "wmsynth/eval/mse.hpp"
#include "wmsynth/numerics/container.hpp"
#include "wmsynth/sim/episode_io.hpp"

namespace wmsynth::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

StageError::StageError(const std::string& stage, std::uint64_t seed, const std::string& cause)
    : std::runtime_error("stage=" + stage + " seed=" + std::to_string(seed) + ": " + cause), stage_(stage) {}

const char* condition_name(Condition c) {
  switch (c) {
    case Condition::kReal: return "Real";
    case Condition::kRealSyn: return "Real+Syn";
    case Condition::kRealSyn10x: return "Real+Syn10x";
  }
  return "?";
}

Condition parse_condition(const std::string& s) {
  for (Condition c : kConditions) {
    if (s == condition_name(c)) return c;
  }
  throw std::invalid_argument("unknown condition '" + s + "' (expected Real, Real+Syn or Real+Syn10x)");
}

namespace {

constexpr std::size_t kBatch = 56;  // rollout and labeling batch; results do not depend on it

std::string regime_key(const char* prefix, std::size_t n) { return std::string(prefix) + "/regime-" + std::to_string(n); }

std::vector<std::vector<kinematics::ActionVector>> action_sequences(std::span<const sim::Episode> eps) {
  std::vector<std::vector<kinematics::ActionVector>> out;
  out.reserve(eps.size());
  for (const auto& e : eps) out.push_back(e.actions);
  return out;
}

json synthetic_counts(const std::vector<sim::Episode>& eps, const ExperimentConfig& cfg) {
  std::size_t bad = 0, single = 0;
  for (const auto& e : eps) {
    if (e.actions.size() + 1 != e.frames.size() || e.frames.size() != cfg.rollout_length + 1) ++bad;
    if (e.meta.id.ends_with("-k0")) ++single;
  }
  return json{{"videos", eps.size()},
              {"single", single},
              {"multi", eps.size()},
              {"frames_per_video", cfg.rollout_length + 1},
              {"videos_with_wrong_label_count", bad}};
}

void write_container_file(const fs::path& file, const numerics::Container& c) {
  fs::create_directories(file.parent_path());
  numerics::write_container(file, c, true);
}

}  // namespace

Run::Run(ExperimentConfig cfg, fs::path out_dir, RunOptions opts)
    : cfg_(std::move(cfg)), dir_(std::move(out_dir)), opts_(opts) {
  cfg_.validate();
  const std::string hash = config_hash(cfg_);
  const fs::path file = dir_ / "manifest.json";
  if (fs::exists(file)) {
    RunManifest old = load_manifest(file);
    if (old.config_hash != hash) {
      if (!opts_.force) {
        throw ManifestError("run directory " + dir_.string() + " belongs to config " + old.config_hash +
                            ", not " + hash + "; pass --force to discard it");
      }
      for (const char* sub : {"checkpoints", "results", "data", "videos", "synthetic", "report"}) {
        fs::remove_all(dir_ / sub);
      }
    } else {
      manifest_ = std::move(old);
    }
  }
  manifest_.config_hash = hash;
  fs::create_directories(dir_);
  const std::string text = to_json(cfg_).dump(2) + "\n";
  numerics::write_file(dir_ / "config.json", text, true);
  save_manifest(file, manifest_);
}

namespace {

// Wall time of a stage minus the stages it triggered on the way, so manifest
// timings add up to the run time instead of counting nested work twice.
class ExclusiveTimer {
 public:
  explicit ExclusiveTimer(double& nested) : nested_(nested), saved_(nested), t0_(std::chrono::steady_clock::now()) {
    nested_ = 0.0;
  }
  ~ExclusiveTimer() {
    if (!done_) nested_ = saved_ + elapsed();
  }
  double finish() {
    const double total = elapsed();
    const double self = total - nested_;
    nested_ = saved_ + total;
    done_ = true;
    return self;
  }

 private:
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }
  double& nested_;
  double saved_;
  std::chrono::steady_clock::time_point t0_;
  bool done_ = false;
};

}  // namespace

void Run::log(const std::string& line) const {
  if (opts_.log) *opts_.log << "[seed " << cfg_.master_seed << "] " << line << std::endl;
}

void Run::record(const std::string& name, const std::string& rel, double seconds) {
  if (!rel.empty()) manifest_.artifacts[name] = rel;
  manifest_.timings[name] = seconds;
  save_manifest(dir_ / "manifest.json", manifest_);
  char buf[64];
  std::snprintf(buf, sizeof buf, " (%.1f s)", seconds);
  log(name + buf);
}

template <typename T, typename Make, typename Save, typename Load>
const T& Run::stage(std::map<std::string, T>& cache, const std::string& name, const std::string& rel, Make make,
                    Save save, Load load) {
  if (auto it = cache.find(name); it != cache.end()) return it->second;
  const fs::path file = dir_ / rel;
  try {
    if (!fs::exists(file)) {
      ExclusiveTimer timer(nested_seconds_);
      T fresh = make();
      save(file, fresh);
      record(name, rel, timer.finish());
    }
    // Always continue from the checkpoint so a resumed run sees exactly what a fresh one does.
    return cache.emplace(name, load(file)).first->second;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, cfg_.master_seed, e.what());
  }
}

json Run::cached_result(const std::string& name, const std::function<json()>& make) {
  const std::string rel = "results/" + name + ".json";
  const fs::path file = dir_ / rel;
  try {
    if (fs::exists(file)) return json::parse(numerics::read_file(file));
    if (opts_.cached_only) throw std::runtime_error("no stored result " + rel + " in " + dir_.string());
    ExclusiveTimer timer(nested_seconds_);
    const json j = make();
    fs::create_directories(file.parent_path());
    numerics::write_file(file, j.dump(2) + "\n", true);
    record(name, rel, timer.finish());
    return j;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, cfg_.master_seed, e.what());
  }
}

const Datasets& Run::datasets() {
  if (data_) return *data_;
  const fs::path dir = dir_ / "data";
  try {
    if (fs::exists(dir / "init" / "index.json")) {
      data_ = load_datasets(dir);
    } else {
      ExclusiveTimer timer(nested_seconds_);
      data_ = generate_datasets(cfg_, opts_.workers);
      if (opts_.persist) save_datasets(dir, *data_, true);
      record("datasets", opts_.persist ? "data" : "",
             timer.finish());
    }
  } catch (const std::exception& e) {
    throw StageError("datasets", cfg_.master_seed, e.what());
  }
  return *data_;
}

kinematics::MinMaxStats Run::general_stats() {
  const auto seqs = action_sequences(datasets().general);
  return kinematics::fit_minmax(seqs);
}

kinematics::MinMaxStats Run::regime_stats(std::size_t n) {
  const auto seqs = action_sequences(datasets().regime(n));
  return kinematics::fit_minmax(seqs);
}

const worldmodel::FrameCodec& Run::codec() {
  return stage(
      codecs_, "codec", "checkpoints/codec.wmsc",
      [&] { return worldmodel::train_codec(datasets().general, cfg_.codec, stage_seed(cfg_, "codec")); },
      [](const fs::path& f, const worldmodel::FrameCodec& c) {
        numerics::Container box;
        box.kind = "codec";
        c.save(box);
        write_container_file(f, box);
      },
      [](const fs::path& f) { return worldmodel::FrameCodec::load(numerics::read_container(f)); });
}

namespace {
auto save_model = [](const fs::path& f, const auto& m) { write_container_file(f, m.to_container()); };
}

const worldmodel::WorldModel& Run::wm_untrained() {
  return stage(
      wms_, "wm/untrained", "checkpoints/wm_untrained.wmsc",
      [&] { return worldmodel::WorldModel(codec(), cfg_.dynamics, cfg_.vocabulary, cfg_.fm, stage_seed(cfg_, "wm.init")); },
      save_model, [](const fs::path& f) { return worldmodel::WorldModel::from_container(numerics::read_container(f)); });
}

const worldmodel::WorldModel& Run::wm_base() {
  return stage(
      wms_, "wm/base", "checkpoints/wm_base.wmsc",
      [&] {
        return worldmodel::train_worldmodel(datasets().general, wm_untrained(), false, cfg_.wm_pretrain,
                                            stage_seed(cfg_, "wm.pretrain"));
      },
      save_model, [](const fs::path& f) { return worldmodel::WorldModel::from_container(numerics::read_container(f)); });
}

const worldmodel::WorldModel& Run::wm_finetuned(std::size_t n) {
  return stage(
      wms_, regime_key("wm", n), "checkpoints/wm_regime_" + std::to_string(n) + ".wmsc",
      [&] {
        worldmodel::WorldModel m = worldmodel::train_worldmodel(datasets().regime(n), wm_base(), true,
                                                                cfg_.wm_finetune, stage_seed(cfg_, "wm.finetune", {n}));
        m.merge_adapters();
        return m;
      },
      save_model, [](const fs::path& f) { return worldmodel::WorldModel::from_container(numerics::read_container(f)); });
}

const idm::IdmNet& Run::idm_base() {
  return stage(
      idms_, "idm/base", "checkpoints/idm_base.wmsc",
      [&] {
        idm::IdmNet init(codec(), general_stats(), cfg_.idm, stage_seed(cfg_, "idm.init"));
        idm::IdmNet net = idm::train_idm(datasets().general, {}, init, cfg_.idm_pretrain, stage_seed(cfg_, "idm.pretrain"));
        net.set_id("idm/base");
        return net;
      },
      save_model, [](const fs::path& f) { return idm::IdmNet::from_container(numerics::read_container(f)); });
}

const idm::IdmNet& Run::idm_regime(std::size_t n) {
  return stage(
      idms_, regime_key("idm", n), "checkpoints/idm_regime_" + std::to_string(n) + ".wmsc",
      [&] {
        idm::IdmNet init = idm_base();
        init.set_stats(regime_stats(n));
        idm::IdmNet net = idm::train_idm(datasets().general, datasets().regime(n), init, cfg_.idm_finetune,
                                         stage_seed(cfg_, "idm.finetune", {n}));
        net.set_id(regime_key("idm", n));
        return net;
      },
      save_model, [](const fs::path& f) { return idm::IdmNet::from_container(numerics::read_container(f)); });
}

const policy::PolicyNet& Run::policy_base() {
  return stage(
      policies_, "policy/base", "checkpoints/policy_base.wmsc",
      [&] {
        policy::PolicyNet init(codec(), general_stats(), cfg_.vocabulary, cfg_.policy, stage_seed(cfg_, "policy.init"));
        const policy::TrainSchedule schedule{
            {policy::DataSelector::kReal, cfg_.policy_base.steps, cfg_.policy_base.learning_rate}};
        return policy::train_policy({datasets().general, {}}, schedule, init, cfg_.policy_batch,
                                    stage_seed(cfg_, "policy.pretrain"));
      },
      save_model, [](const fs::path& f) { return policy::PolicyNet::from_container(numerics::read_container(f)); });
}

const policy::PolicyNet& Run::policy(std::size_t n, Condition c) {
  std::string file = "checkpoints/policy_regime_" + std::to_string(n) + "_";
  for (const char* p = condition_name(c); *p; ++p) file += *p == '+' ? '_' : *p;
  return stage(
      policies_, regime_key("policy", n) + "/" + condition_name(c), file + ".wmsc",
      [&] {
        policy::PolicyNet init = policy_base();
        init.set_stats(regime_stats(n));
        std::vector<sim::Episode> syn;
        if (c != Condition::kReal) syn = synthetic(n, c == Condition::kRealSyn10x);
        const auto& schedule = c == Condition::kReal ? cfg_.real_only : cfg_.real_syn;
        // Every condition of a regime shares the seed, so the real-data stage
        // draws the same batches in all three.
        return policy::train_policy({datasets().regime(n), syn}, schedule, init, cfg_.policy_batch,
                                    stage_seed(cfg_, "policy.finetune", {n}));
      },
      save_model, [](const fs::path& f) { return policy::PolicyNet::from_container(numerics::read_container(f)); });
}

std::vector<std::vector<sim::Frame>> Run::generate_videos(const worldmodel::WorldModel& wm,
                                                          const std::vector<std::uint64_t>& seeds,
                                                          std::size_t per_frame) {
  const std::vector<sim::Frame> inits = datasets().init_frames();
  std::vector<std::vector<sim::Frame>> videos(inits.size() * per_frame);
  if (seeds.size() != videos.size()) throw std::logic_error("one rollout seed per video is required");
  for (std::size_t b = 0; b < videos.size(); b += kBatch) {
    const std::size_t end = std::min(videos.size(), b + kBatch);
    std::vector<sim::Frame> firsts;
    for (std::size_t i = b; i < end; ++i) firsts.push_back(inits[i / per_frame]);
    auto out = wm.predict_rollouts(firsts, cfg_.task, cfg_.rollout_length,
                                   std::span<const std::uint64_t>(seeds).subspan(b, end - b), cfg_.rollout_ode_steps);
    for (std::size_t i = b; i < end; ++i) {
      auto& v = videos[i];
      v.reserve(cfg_.rollout_length + 1);
      v.push_back(firsts[i - b]);
      for (auto& f : out[i - b]) v.push_back(std::move(f));
    }
  }
  return videos;
}

const std::vector<std::vector<sim::Frame>>& Run::rollouts(std::size_t n) {
  if (auto it = videos_.find(n); it != videos_.end()) return it->second;
  const std::string name = regime_key("rollout", n);
  const std::string rel = "videos/regime-" + std::to_string(n);
  try {
    if (fs::exists(dir_ / rel / "index.json")) return videos_[n] = read_videos(dir_ / rel);
    const auto& wm = wm_finetuned(n);
    ExclusiveTimer timer(nested_seconds_);
    const std::size_t K = cfg_.rollouts_per_frame;
    std::vector<std::uint64_t> seeds;
    for (std::size_t f = 0; f < cfg_.init_frames; ++f) {
      for (std::size_t k = 0; k < K; ++k) seeds.push_back(stage_seed(cfg_, "rollout", {f, k}));
    }
    auto videos = generate_videos(wm, seeds, K);
    if (opts_.persist) write_videos(dir_ / rel, videos, true);
    record(name, opts_.persist ? rel : "", timer.finish());
    return videos_[n] = std::move(videos);
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, cfg_.master_seed, e.what());
  }
}

const std::vector<sim::Episode>& Run::labeled(std::size_t n) {
  if (auto it = labeled_.find(n); it != labeled_.end()) return it->second;
  const std::string name = regime_key("label", n);
  const std::string rel = "synthetic/regime-" + std::to_string(n);
  try {
    if (fs::exists(dir_ / rel / "index.json")) return labeled_[n] = sim::read_dataset(dir_ / rel);
    const auto& videos = rollouts(n);
    // The finetuned generation metric needs the videos; take it before they are dropped.
    generation(Generator::kFinetuned, n);
    const auto& net = idm_regime(n);
    ExclusiveTimer timer(nested_seconds_);
    const std::size_t K = cfg_.rollouts_per_frame;
    std::vector<sim::Episode> out;
    out.reserve(videos.size());
    for (std::size_t b = 0; b < videos.size(); b += kBatch) {
      const std::size_t end = std::min(videos.size(), b + kBatch);
      std::vector<std::uint64_t> seeds;
      for (std::size_t i = b; i < end; ++i) seeds.push_back(stage_seed(cfg_, "label", {n, i / K, i % K}));
      auto results = idm::pseudo_label_batch(net, std::span(videos).subspan(b, end - b), seeds, cfg_.idm_ode_steps);
      for (std::size_t i = b; i < end; ++i) {
        sim::Episode e = std::move(results[i - b].episode);
        char id[64];
        std::snprintf(id, sizeof id, "syn-r%zu-f%03zu-k%zu", n, i / K, i % K);
        e.meta.id = id;
        e.meta.seed = stage_seed(cfg_, "rollout", {i / K, i % K});
        e.meta.task = cfg_.task;
        out.push_back(std::move(e));
      }
    }
    if (opts_.persist) sim::write_dataset(dir_ / rel, out, true);
    record(name, opts_.persist ? rel : "", timer.finish());
    videos_.erase(n);
    auto& stored = labeled_[n] = std::move(out);

    cached_result(regime_key("counts", n), [&] { return synthetic_counts(stored, cfg_); });
    return stored;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, cfg_.master_seed, e.what());
  }
}

std::vector<sim::Episode> Run::synthetic(std::size_t n, bool multi) {
  const auto& all = labeled(n);
  if (multi) return all;
  std::vector<sim::Episode> single;
  for (const auto& e : all) {
    if (e.meta.id.ends_with("-k0")) single.push_back(e);
  }
  return single;
}

void Run::release(std::size_t n) {
  videos_.erase(n);
  labeled_.erase(n);
}

eval::FrechetReport Run::generation(Generator g, std::size_t n) {
  std::string name = "generation/";
  if (g == Generator::kFinetuned) name += "finetuned-regime-" + std::to_string(n);
  if (g == Generator::kZeroShot) name += "zero-shot";
  if (g == Generator::kUntrained) name += "untrained";
  return eval::frechet_from_json(cached_result(name, [&] {
    std::vector<sim::Frame> generated;
    auto append = [&](const std::vector<sim::Frame>& v) { generated.insert(generated.end(), v.begin() + 1, v.end()); };
    if (g == Generator::kFinetuned) {
      if (auto it = videos_.find(n); it != videos_.end()) {
        for (std::size_t i = 0; i < it->second.size(); i += cfg_.rollouts_per_frame) append(it->second[i]);
      } else {
        for (const auto& e : synthetic(n, false)) append(e.frames);
      }
    } else {
      std::vector<std::uint64_t> seeds;
      for (std::size_t f = 0; f < cfg_.init_frames; ++f) seeds.push_back(stage_seed(cfg_, "rollout", {f, 0}));
      const auto& wm = g == Generator::kZeroShot ? wm_base() : wm_untrained();
      for (const auto& v : generate_videos(wm, seeds, 1)) append(v);
    }
    std::vector<sim::Frame> real;
    for (const auto& e : datasets().test_real) real.insert(real.end(), e.frames.begin(), e.frames.end());
    return eval::to_json(eval::frechet_feature_distance(generated, real, stage_seed(cfg_, "fd.extractor")));
  }));
}

eval::ConditionResult Run::evaluate(std::size_t n, Condition c) {
  const std::string name = regime_key("eval", n) + "/" + condition_name(c);
  return eval::condition_from_json(cached_result(name, [&] {
    const auto& net = policy(n, c);
    const auto& test = datasets().test_real;
    eval::ConditionResult r;
    r.regime = n;
    r.condition = condition_name(c);
    r.mse = eval::trajectory_mse(eval::policy_chunk_model(net, stage_seed(cfg_, "eval", {n}), cfg_.eval_ode_steps),
                                 test, regime_stats(n));
    const auto predictor = policy::make_predictor(net, stage_seed(cfg_, "sr", {n}), cfg_.eval_ode_steps);
    for (std::size_t i = 0; i < cfg_.sr_episodes; ++i) {
      const sim::Episode e = policy::rollout_policy(predictor, test[i].meta.seed, cfg_.task, cfg_.sr_max_steps,
                                                    cfg_.replan_every, cfg_.geometry);
      ++r.success.total;
      if (e.meta.success) ++r.success.successes;
    }
    return eval::to_json(r);
  }));
}

json Run::self_check() {
  const Datasets& d = datasets();
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::logic_error("self-check failed: " + what);
  };
  json counts;
  std::size_t demos = d.train_real.size() + d.test_real.size();
  demos += cfg_.total_demos - cfg_.train_pool - cfg_.test_demos;  // generated but outside both splits
  counts["demos"] = demos;
  counts["train_pool"] = d.train_real.size();
  counts["test"] = d.test_real.size();
  counts["general"] = d.general.size();
  counts["init_frames"] = d.init.size();
  require(d.train_real.size() == cfg_.train_pool, "train pool size");
  require(d.test_real.size() == cfg_.test_demos, "test split size");
  require(d.general.size() == cfg_.general_episodes, "general-motion episode count");
  require(d.init.size() == cfg_.init_frames, "initial frame count");
  for (const auto& t : d.test_real) {
    for (const auto& r : d.train_real) require(t.meta.id != r.meta.id, "train and test share " + t.meta.id);
  }

  std::vector<std::size_t> sorted = cfg_.regimes;
  std::sort(sorted.begin(), sorted.end());
  bool nested = true;
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    const auto small = d.regime(sorted[i - 1]);
    const auto large = d.regime(sorted[i]);
    nested = nested && std::equal(small.begin(), small.end(), large.begin(),
                                  [](const auto& a, const auto& b) { return a.meta.id == b.meta.id; });
  }
  require(nested, "regimes are not nested prefixes of the train pool");
  counts["regimes"] = cfg_.regimes;
  counts["nested"] = nested;

  // Chunk shapes as the models actually emit them.
  const auto& net = idm_base();
  const numerics::Tensor z = codec().encode(std::span(d.init).front().frames);
  numerics::Rng rng(0);
  std::vector<numerics::Rng*> rngs{&rng};
  const numerics::Tensor idm_chunk = net.predict_latent_pairs(z, z, rngs, 1);
  const auto& pol = policy_base();
  const std::vector<std::size_t> tokens{pol.token_id(cfg_.task)};
  const std::vector<kinematics::ActionVector> states{policy::state_at({}, 0)};
  const numerics::Tensor pol_chunk = pol.predict_normalized(z, tokens, states, rngs, 1);
  require(idm_chunk.shape() == numerics::Shape({1, idm::kChunk, kinematics::kActionDim}), "IDM chunk shape");
  require(pol_chunk.shape() == numerics::Shape({1, policy::kChunk, kinematics::kActionDim}), "policy chunk shape");
  counts["idm_chunk"] = {idm_chunk.dim(1), idm_chunk.dim(2)};
  counts["policy_chunk"] = {pol_chunk.dim(1), pol_chunk.dim(2)};
  counts["action_dim"] = kinematics::kActionDim;

  json per_regime = json::object();
  for (std::size_t n : cfg_.regimes) {
    const json c = cached_result(regime_key("counts", n), [&] { return synthetic_counts(labeled(n), cfg_); });
    require(c.at("single").get<std::size_t>() == cfg_.init_frames, "single-rollout count, regime " + std::to_string(n));
    require(c.at("multi").get<std::size_t>() == cfg_.init_frames * cfg_.rollouts_per_frame,
            "multi-rollout count, regime " + std::to_string(n));
    require(c.at("videos_with_wrong_label_count").get<std::size_t>() == 0,
            "pseudo-label count, regime " + std::to_string(n));
    per_regime[std::to_string(n)] = c;
  }
  counts["synthetic"] = per_regime;
  return counts;
}

eval::ExperimentReport Run::run_grid() {
  eval::ExperimentReport report;
  report.master_seed = cfg_.master_seed;
  report.config_hash = manifest_.config_hash;
  const eval::FrechetReport zero_shot = generation(Generator::kZeroShot);
  const eval::FrechetReport untrained = generation(Generator::kUntrained);
  for (std::size_t n : cfg_.regimes) {
    for (Condition c : kConditions) report.results.push_back(evaluate(n, c));
    report.generation.push_back({n, generation(Generator::kFinetuned, n), zero_shot, untrained});
    release(n);
  }
  try {
    report.counts = self_check();
  } catch (const std::exception& e) {
    throw StageError("self-check", cfg_.master_seed, e.what());
  }
  ExclusiveTimer timer(nested_seconds_);
  eval::emit_report(report, dir_ / "report");
  record("report", "report", timer.finish());
  return report;
}

eval::ExperimentReport run_grid(const ExperimentConfig& cfg, const fs::path& out_dir, RunOptions opts) {
  Run run(cfg, out_dir, opts);
  return run.run_grid();
}

void write_videos(const fs::path& dir, const std::vector<std::vector<sim::Frame>>& videos, bool force) {
  if (fs::exists(dir) && !force) throw std::runtime_error("refusing to overwrite " + dir.string());
  fs::remove_all(dir);
  fs::create_directories(dir);
  json index{{"format_version", sim::kEpisodeFormatVersion}, {"lengths", json::array()}};
  std::string bytes;
  for (const auto& v : videos) {
    index["lengths"].push_back(v.size());
    if (!v.empty()) index["geometry"] = {v[0].geometry.height, v[0].geometry.width, v[0].geometry.channels};
    for (const auto& f : v) bytes.append(reinterpret_cast<const char*>(f.pixels.data()), f.pixels.size());
  }
  numerics::write_file(dir / "frames.bin", bytes, true);
  numerics::write_file(dir / "index.json", index.dump() + "\n", true);
}

std::vector<std::vector<sim::Frame>> read_videos(const fs::path& dir) {
  const json index = json::parse(numerics::read_file(dir / "index.json"));
  const int version = index.at("format_version").get<int>();
  if (version != sim::kEpisodeFormatVersion) {
    throw sim::EpisodeFormatError("video directory " + dir.string() + " has format version " +
                                  std::to_string(version) + ", this build reads version " +
                                  std::to_string(sim::kEpisodeFormatVersion));
  }
  const auto lengths = index.at("lengths").get<std::vector<std::size_t>>();
  std::vector<std::vector<sim::Frame>> videos;
  if (lengths.empty()) return videos;
  const auto gv = index.at("geometry").get<std::vector<std::size_t>>();
  const sim::FrameGeometry g{gv.at(0), gv.at(1), gv.at(2)};
  const std::string bytes = numerics::read_file(dir / "frames.bin");
  std::size_t total = 0;
  for (std::size_t l : lengths) total += l;
  if (bytes.size() != total * g.bytes()) {
    throw sim::EpisodeFormatError("video payload " + (dir / "frames.bin").string() + " holds " +
                                  std::to_string(bytes.size()) + " bytes, expected " + std::to_string(total * g.bytes()));
  }
  std::size_t off = 0;
  for (std::size_t l : lengths) {
    std::vector<sim::Frame> v(l, sim::Frame(g));
    for (auto& f : v) {
      std::memcpy(f.pixels.data(), bytes.data() + off, g.bytes());
      off += g.bytes();
    }
    videos.push_back(std::move(v));
  }
  return videos;
}

}  // namespace wmsynth::pipeline
