#include "wmsynth/pipeline/config.hpp"

#include <cstdio>
#include <stdexcept>

#include "wmsynth/numerics/container.hpp"

namespace wmsynth::pipeline {

using nlohmann::json;

namespace {

json fm_json(const flowmatch::FMConfig& f) { return {{"mu", f.mu}, {"sigma", f.sigma}, {"steps", f.steps}}; }
flowmatch::FMConfig fm_from(const json& j) {
  return {j.at("mu").get<double>(), j.at("sigma").get<double>(), j.at("steps").get<int>()};
}

json wm_train_json(const worldmodel::WorldModelTrainConfig& w) {
  return {{"steps", w.steps},
          {"batch", w.batch},
          {"learning_rate", w.learning_rate},
          {"lora_rank", w.lora.rank},
          {"lora_alpha", w.lora.alpha}};
}
worldmodel::WorldModelTrainConfig wm_train_from(const json& j) {
  worldmodel::WorldModelTrainConfig w;
  w.steps = j.at("steps");
  w.batch = j.at("batch");
  w.learning_rate = j.at("learning_rate");
  w.lora = {j.at("lora_rank").get<std::size_t>(), j.at("lora_alpha").get<double>()};
  return w;
}

json idm_train_json(const idm::IdmTrainConfig& c) {
  return {{"steps", c.steps}, {"learning_rate", c.learning_rate}, {"batch", c.batch}, {"task_fraction", c.task_fraction}};
}
idm::IdmTrainConfig idm_train_from(const json& j) {
  return {j.at("steps").get<int>(), j.at("learning_rate").get<double>(), j.at("batch").get<std::size_t>(),
          j.at("task_fraction").get<double>()};
}

json schedule_json(const policy::TrainSchedule& s) {
  json a = json::array();
  for (const auto& st : s) {
    a.push_back({{"data", policy::selector_name(st.data)}, {"steps", st.steps}, {"learning_rate", st.learning_rate}});
  }
  return a;
}
policy::TrainSchedule schedule_from(const json& j) {
  policy::TrainSchedule s;
  for (const auto& st : j) {
    s.push_back({policy::parse_selector(st.at("data").get<std::string>()), st.at("steps").get<int>(),
                 st.at("learning_rate").get<double>()});
  }
  return s;
}

void reject_unknown(const json& given, const json& known, const std::string& path) {
  for (const auto& [key, value] : given.items()) {
    if (!known.contains(key)) throw std::invalid_argument("unknown config field '" + path + key + "'");
    if (value.is_object() && known.at(key).is_object()) reject_unknown(value, known.at(key), path + key + ".");
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("config field '" + field + "': " + why);
  };
  if (test_demos + train_pool > total_demos) fail("test_demos", "train pool and test split exceed total_demos");
  if (regimes.empty()) fail("regimes", "at least one regime is required");
  for (std::size_t r : regimes) {
    if (r == 0 || r > train_pool) fail("regimes", "regime " + std::to_string(r) + " outside 1.." + std::to_string(train_pool));
  }
  if (init_frames == 0) fail("init_frames", "must be positive");
  if (rollouts_per_frame == 0) fail("rollouts_per_frame", "must be positive");
  if (rollout_length < idm::kChunk) fail("rollout_length", "must be at least 16 to be labeled");
  if (general_episodes == 0) fail("general_episodes", "must be positive");
  if (demo_noise < 0.0) fail("demo_noise", "must be non-negative");
  if (replan_every < 1 || replan_every > policy::kChunk) fail("replan_every", "must be in [1, 16]");
  if (sr_episodes > test_demos) fail("sr_episodes", "cannot exceed test_demos");
  if (dynamics.latent_dim != codec.latent_dim) fail("dynamics.latent_dim", "must equal codec.latent_dim");
  if (dynamics.window != idm::kChunk) fail("dynamics.window", "must equal the 16-step chunk length");
  fm.validate();
  policy::validate_schedule(real_only);
  policy::validate_schedule(real_syn);
  if (std::find(vocabulary.begin(), vocabulary.end(), task) == vocabulary.end()) fail("task", "not in vocabulary");
  if (std::find(vocabulary.begin(), vocabulary.end(), sim::kTaskGeneralMotion) == vocabulary.end()) {
    fail("vocabulary", "must contain general_motion");
  }
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["master_seed"] = c.master_seed;
  j["total_demos"] = c.total_demos;
  j["test_demos"] = c.test_demos;
  j["train_pool"] = c.train_pool;
  j["regimes"] = c.regimes;
  j["general_episodes"] = c.general_episodes;
  j["init_frames"] = c.init_frames;
  j["rollouts_per_frame"] = c.rollouts_per_frame;
  j["demo_noise"] = c.demo_noise;
  j["geometry"] = {{"height", c.geometry.height}, {"width", c.geometry.width}, {"channels", c.geometry.channels}};
  j["vocabulary"] = c.vocabulary;
  j["task"] = c.task;
  j["codec"] = {{"latent_dim", c.codec.latent_dim}, {"hidden", c.codec.hidden},   {"pool", c.codec.pool},
                {"steps", c.codec.steps},           {"batch", c.codec.batch},     {"learning_rate", c.codec.learning_rate}};
  const auto& d = c.dynamics;
  j["dynamics"] = {{"latent_dim", d.latent_dim}, {"model_dim", d.model_dim}, {"heads", d.heads},
                   {"blocks", d.blocks},         {"ffn_dim", d.ffn_dim},     {"window", d.window},
                   {"token_dim", d.token_dim},   {"time_dim", d.time_dim}};
  j["fm"] = fm_json(c.fm);
  j["wm_pretrain"] = wm_train_json(c.wm_pretrain);
  j["wm_finetune"] = wm_train_json(c.wm_finetune);
  j["rollout_length"] = c.rollout_length;
  j["rollout_ode_steps"] = c.rollout_ode_steps;
  j["idm"] = {{"fusion_hidden", c.idm.fusion_hidden}, {"feature_dim", c.idm.feature_dim},
              {"head_hidden", c.idm.head_hidden},     {"head_depth", c.idm.head_depth},
              {"train_encoder", c.idm.train_encoder}, {"fm", fm_json(c.idm.fm)}};
  j["idm_pretrain"] = idm_train_json(c.idm_pretrain);
  j["idm_finetune"] = idm_train_json(c.idm_finetune);
  j["idm_ode_steps"] = c.idm_ode_steps;
  j["policy"] = {{"token_dim", c.policy.token_dim},     {"trunk_hidden", c.policy.trunk_hidden},
                 {"feature_dim", c.policy.feature_dim}, {"head_hidden", c.policy.head_hidden},
                 {"head_depth", c.policy.head_depth},   {"jitter", c.policy.jitter},
                 {"fm", fm_json(c.policy.fm)}};
  j["policy_base"] = {{"steps", c.policy_base.steps}, {"learning_rate", c.policy_base.learning_rate}};
  j["real_only"] = schedule_json(c.real_only);
  j["real_syn"] = schedule_json(c.real_syn);
  j["policy_batch"] = c.policy_batch;
  j["eval_ode_steps"] = c.eval_ode_steps;
  j["sr_max_steps"] = c.sr_max_steps;
  j["replan_every"] = c.replan_every;
  j["sr_episodes"] = c.sr_episodes;
  return j;
}

ExperimentConfig config_from_json(const json& given) {
  json j = to_json(ExperimentConfig{});
  reject_unknown(given, j, "");
  j.merge_patch(given);
  ExperimentConfig c;
  try {
    c.master_seed = j.at("master_seed");
    c.total_demos = j.at("total_demos");
    c.test_demos = j.at("test_demos");
    c.train_pool = j.at("train_pool");
    c.regimes = j.at("regimes").get<std::vector<std::size_t>>();
    c.general_episodes = j.at("general_episodes");
    c.init_frames = j.at("init_frames");
    c.rollouts_per_frame = j.at("rollouts_per_frame");
    c.demo_noise = j.at("demo_noise");
    const auto& g = j.at("geometry");
    c.geometry = {g.at("height"), g.at("width"), g.at("channels")};
    c.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
    c.task = j.at("task");
    const auto& cc = j.at("codec");
    c.codec.latent_dim = cc.at("latent_dim");
    c.codec.hidden = cc.at("hidden");
    c.codec.pool = cc.at("pool");
    c.codec.steps = cc.at("steps");
    c.codec.batch = cc.at("batch");
    c.codec.learning_rate = cc.at("learning_rate");
    const auto& d = j.at("dynamics");
    c.dynamics.latent_dim = d.at("latent_dim");
    c.dynamics.model_dim = d.at("model_dim");
    c.dynamics.heads = d.at("heads");
    c.dynamics.blocks = d.at("blocks");
    c.dynamics.ffn_dim = d.at("ffn_dim");
    c.dynamics.window = d.at("window");
    c.dynamics.token_dim = d.at("token_dim");
    c.dynamics.time_dim = d.at("time_dim");
    c.fm = fm_from(j.at("fm"));
    c.wm_pretrain = wm_train_from(j.at("wm_pretrain"));
    c.wm_finetune = wm_train_from(j.at("wm_finetune"));
    c.rollout_length = j.at("rollout_length");
    c.rollout_ode_steps = j.at("rollout_ode_steps");
    const auto& i = j.at("idm");
    c.idm.fusion_hidden = i.at("fusion_hidden");
    c.idm.feature_dim = i.at("feature_dim");
    c.idm.head_hidden = i.at("head_hidden");
    c.idm.head_depth = i.at("head_depth");
    c.idm.train_encoder = i.at("train_encoder");
    c.idm.fm = fm_from(i.at("fm"));
    c.idm_pretrain = idm_train_from(j.at("idm_pretrain"));
    c.idm_finetune = idm_train_from(j.at("idm_finetune"));
    c.idm_ode_steps = j.at("idm_ode_steps");
    const auto& p = j.at("policy");
    c.policy.token_dim = p.at("token_dim");
    c.policy.trunk_hidden = p.at("trunk_hidden");
    c.policy.feature_dim = p.at("feature_dim");
    c.policy.head_hidden = p.at("head_hidden");
    c.policy.head_depth = p.at("head_depth");
    c.policy.jitter = p.at("jitter");
    c.policy.fm = fm_from(p.at("fm"));
    c.policy_base.steps = j.at("policy_base").at("steps");
    c.policy_base.learning_rate = j.at("policy_base").at("learning_rate");
    c.real_only = schedule_from(j.at("real_only"));
    c.real_syn = schedule_from(j.at("real_syn"));
    c.policy_batch = j.at("policy_batch");
    c.eval_ode_steps = j.at("eval_ode_steps");
    c.sr_max_steps = j.at("sr_max_steps");
    c.replan_every = j.at("replan_every");
    c.sr_episodes = j.at("sr_episodes");
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(numerics::read_file(path));
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& c) {
  const std::string s = to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) h = (h ^ ch) * 0x100000001b3ULL;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t stage_seed(const ExperimentConfig& c, const char* tag, std::initializer_list<std::uint64_t> path) {
  return numerics::derive_seed(c.master_seed, tag, path);
}

}  // namespace wmsynth::pipeline
