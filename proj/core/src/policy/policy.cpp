#include "wmsynth/policy/policy.hpp"

#include <algorithm>
#include <cmath>

#include "wmsynth/kinematics/stats_io.hpp"
#include "wmsynth/numerics/adam.hpp"
#include "wmsynth/numerics/ops.hpp"
#include "wmsynth/sim/demo.hpp"
#include "wmsynth/worldmodel/worldmodel.hpp"

namespace wmsynth::policy {

using kinematics::kActionDim;
using numerics::Graph;
using numerics::GradMode;
using numerics::Rng;
using numerics::Var;

namespace {
constexpr std::size_t kChunkDim = kChunk * kActionDim;
}

const char* selector_name(DataSelector s) {
  switch (s) {
    case DataSelector::kReal: return "real";
    case DataSelector::kSynthetic: return "synthetic";
    case DataSelector::kMixed: return "mixed";
  }
  return "?";
}

DataSelector parse_selector(const std::string& s) {
  if (s == "real") return DataSelector::kReal;
  if (s == "synthetic") return DataSelector::kSynthetic;
  if (s == "mixed") return DataSelector::kMixed;
  throw std::invalid_argument("unknown dataset selector '" + s + "'");
}

void validate_schedule(const TrainSchedule& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i].steps < 1) throw std::invalid_argument("schedule stage " + std::to_string(i) + " has no steps");
  }
}

PolicyNet::PolicyNet(worldmodel::FrameCodec codec, const kinematics::MinMaxStats& stats,
                     std::vector<std::string> vocabulary, const PolicyConfig& cfg, std::uint64_t seed)
    : codec_(std::move(codec)), stats_(stats), vocab_(std::move(vocabulary)), cfg_(cfg) {
  cfg_.fm.validate();
  Rng rng(numerics::derive_seed(seed, "policy.init"));
  token_ = numerics::Embedding(store_, "policy.token", vocab_.size(), cfg.token_dim, rng);
  trunk_ = numerics::Mlp(store_, "policy.trunk",
                         {codec_.latent_dim() + cfg.token_dim + kActionDim, cfg.trunk_hidden, cfg.feature_dim}, rng);
  flowmatch::FlowHeadConfig hc;
  hc.data_dim = kChunkDim;
  hc.cond_dim = cfg.feature_dim;
  hc.hidden = cfg.head_hidden;
  hc.depth = cfg.head_depth;
  head_ = flowmatch::FlowHead(store_, "policy.head", hc, rng);
}

std::size_t PolicyNet::token_id(const std::string& token) const {
  auto it = std::find(vocab_.begin(), vocab_.end(), token);
  if (it == vocab_.end()) throw worldmodel::UnknownTokenError("unknown task token '" + token + "'");
  return static_cast<std::size_t>(it - vocab_.begin());
}

Var PolicyNet::velocity(Graph& g, Var noisy, std::span<const float> t, const Tensor& latents,
                        std::span<const std::size_t> tokens, const Tensor& states) const {
  Var obs = numerics::concat<float>({g.constant(latents), token_.forward(g, store_, tokens), g.constant(states)}, 1);
  Var cond = numerics::gelu(trunk_.forward(g, store_, obs));
  return head_.forward(g, store_, noisy, t, cond);
}

namespace {

Tensor normalized_states(const kinematics::MinMaxStats& stats, std::span<const ActionVector> states) {
  Tensor out({states.size(), kActionDim});
  for (std::size_t i = 0; i < states.size(); ++i) {
    const ActionVector n = kinematics::apply(stats, states[i]);
    for (std::size_t k = 0; k < kActionDim; ++k) out.at(i, k) = static_cast<float>(n[k]);
  }
  return out;
}

}  // namespace

Tensor PolicyNet::predict_normalized(const Tensor& latents, std::span<const std::size_t> tokens,
                                     std::span<const ActionVector> states, std::span<Rng* const> rngs,
                                     int ode_steps) const {
  const std::size_t B = latents.dim(0);
  if (tokens.size() != B || states.size() != B || rngs.size() != B) {
    throw std::invalid_argument("predict_normalized: one token, state and generator per row");
  }
  const Tensor s = normalized_states(stats_, states);
  Graph cg(GradMode::kInference);
  Var obs = numerics::concat<float>({cg.constant(latents), token_.forward(cg, store_, tokens), cg.constant(s)}, 1);
  const Tensor cond = numerics::gelu(trunk_.forward(cg, store_, obs)).value();
  Tensor x({B, kChunkDim});
  for (std::size_t b = 0; b < B; ++b) {
    const Tensor n = numerics::normal_tensor<float>({kChunkDim}, *rngs[b]);
    std::copy(n.data().begin(), n.data().end(), x.data().begin() + b * kChunkDim);
  }
  flowmatch::VelocityField field = [&](const Tensor& xt, float t) {
    Graph g(GradMode::kInference);
    const std::vector<float> tt(B, t);
    return head_.forward(g, store_, g.constant(xt), tt, g.constant(cond)).value();
  };
  const int steps = ode_steps > 0 ? ode_steps : cfg_.fm.steps;
  Tensor out = flowmatch::ode_integrate(field, std::move(x), steps);
  kinematics::uncenter_rows(stats_, out.data());
  return out.reshaped({B, kChunk, kActionDim});
}

std::vector<ActionVector> PolicyNet::predict_chunk(const Frame& frame, const std::string& token,
                                                   const ActionVector& state, Rng& rng, int ode_steps) const {
  const std::size_t tok = token_id(token);
  codec_.check_geometry(frame.geometry);
  const Tensor z = codec_.encode(std::span<const Frame>(&frame, 1));
  Rng* r[1] = {&rng};
  const Tensor chunk = predict_normalized(z, std::span<const std::size_t>(&tok, 1),
                                          std::span<const ActionVector>(&state, 1), r, ode_steps);
  std::vector<ActionVector> out(kChunk);
  for (std::size_t s = 0; s < kChunk; ++s) {
    ActionVector n;
    for (std::size_t d = 0; d < kActionDim; ++d) n[d] = chunk[s * kActionDim + d];
    out[s] = kinematics::reorthonormalize(kinematics::invert(stats_, n));
  }
  return out;
}

numerics::Container PolicyNet::to_container() const {
  numerics::Container c;
  c.kind = "policy";
  codec_.save(c, "codec.");
  numerics::append_parameters(c, store_, "");
  kinematics::append_stats(c, stats_);
  c.meta["vocabulary"] = vocab_;
  c.meta["chunk"] = kChunk;
  c.meta["config"] = {{"token_dim", cfg_.token_dim},     {"trunk_hidden", cfg_.trunk_hidden},
                      {"feature_dim", cfg_.feature_dim}, {"head_hidden", cfg_.head_hidden},
                      {"head_depth", cfg_.head_depth},   {"jitter", cfg_.jitter},
                      {"fm_mu", cfg_.fm.mu},             {"fm_sigma", cfg_.fm.sigma},
                      {"fm_steps", cfg_.fm.steps}};
  return c;
}

PolicyNet PolicyNet::from_container(const numerics::Container& c) {
  if (c.kind != "policy") throw numerics::ContainerError("expected a policy checkpoint, found '" + c.kind + "'");
  const auto& m = c.meta.at("config");
  PolicyConfig cfg;
  cfg.token_dim = m.at("token_dim");
  cfg.trunk_hidden = m.at("trunk_hidden");
  cfg.feature_dim = m.at("feature_dim");
  cfg.head_hidden = m.at("head_hidden");
  cfg.head_depth = m.at("head_depth");
  cfg.jitter = m.at("jitter");
  cfg.fm = {m.at("fm_mu"), m.at("fm_sigma"), m.at("fm_steps")};
  PolicyNet net(worldmodel::FrameCodec::load(c, "codec."), kinematics::load_stats(c),
                c.meta.at("vocabulary").get<std::vector<std::string>>(), cfg, 0);
  numerics::load_parameters(c, net.store_, "");
  return net;
}

ActionVector state_at(std::span<const ActionVector> actions, std::size_t t) {
  if (t == 0) return sim::home_pose_encoding();
  return actions[t - 1];
}

namespace {

struct Sample {
  const sim::Episode* episode;
  std::size_t t;
};

void jitter_frame(std::span<float> pixels, double brightness, double contrast) {
  double mean = 0.0;
  for (float v : pixels) mean += v;
  mean /= static_cast<double>(pixels.size());
  for (float& v : pixels) v = static_cast<float>(((v - mean) * contrast + mean) * brightness);
}

std::vector<const sim::Episode*> stage_pool(const PolicyData& data, DataSelector sel) {
  std::vector<const sim::Episode*> out;
  if (sel != DataSelector::kSynthetic) {
    for (const auto& e : data.real) out.push_back(&e);
  }
  if (sel != DataSelector::kReal) {
    for (const auto& e : data.synthetic) out.push_back(&e);
  }
  return out;
}

}  // namespace

PolicyNet train_policy(const PolicyData& data, const TrainSchedule& schedule, const PolicyNet& init,
                       std::size_t batch, std::uint64_t seed, std::vector<StageTrace>* traces) {
  validate_schedule(schedule);
  for (const auto* set : {&data.real, &data.synthetic}) {
    for (const auto& e : *set) {
      if (e.meta.split == "test") throw std::invalid_argument("train_policy: episode " + e.meta.id + " is a test episode");
      if (e.actions.empty()) throw std::invalid_argument("train_policy: episode " + e.meta.id + " has no actions");
    }
  }
  PolicyNet net = init;
  const auto& codec = net.codec();
  const std::size_t pool = codec.config().pool;
  const double j = net.config().jitter;

  for (std::size_t si = 0; si < schedule.size(); ++si) {
    const TrainStage& stage = schedule[si];
    const std::string name = "stage" + std::to_string(si) + ":" + selector_name(stage.data);
    const auto episodes = stage_pool(data, stage.data);
    if (episodes.empty()) throw std::invalid_argument("train_policy: " + name + " has an empty dataset");
    std::vector<std::size_t> tokens;
    for (const auto* e : episodes) tokens.push_back(net.token_id(e->meta.task));

    Rng rng(numerics::derive_seed(seed, "policy.samples", {si}));
    Rng fm_rng(numerics::derive_seed(seed, "policy.fm", {si}));
    numerics::Adam adam({stage.learning_rate});
    StageTrace trace{name, {}};
    std::vector<const Frame*> frames(batch);
    std::vector<std::size_t> batch_tokens(batch);
    std::vector<ActionVector> states(batch);
    Tensor chunk({batch, kChunkDim}), mask({batch, kChunkDim});
    for (int step = 0; step < stage.steps; ++step) {
      std::vector<std::array<double, 2>> jit(batch);
      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t ei = numerics::uniform_index(rng, episodes.size());
        const sim::Episode& e = *episodes[ei];
        const std::size_t n = e.actions.size();
        const std::size_t t = numerics::uniform_index(rng, n);
        frames[b] = &e.frames[t];
        batch_tokens[b] = tokens[ei];
        states[b] = state_at(e.actions, t);
        for (std::size_t s = 0; s < kChunk; ++s) {
          const bool valid = t + s < n;
          const ActionVector a = kinematics::apply(net.stats(), e.actions[std::min(t + s, n - 1)]);
          for (std::size_t d = 0; d < kActionDim; ++d) {
            chunk[b * kChunkDim + s * kActionDim + d] = static_cast<float>(a[d]);
            mask[b * kChunkDim + s * kActionDim + d] = valid ? 1.0f : 0.0f;
          }
        }
        jit[b] = {numerics::uniform(rng, 1.0 - j, 1.0 + j), numerics::uniform(rng, 1.0 - j, 1.0 + j)};
      }
      Tensor pooled = worldmodel::pool_frames(std::span<const Frame* const>(frames), pool);
      const std::size_t dim = pooled.dim(1);
      for (std::size_t b = 0; b < batch; ++b) {
        jitter_frame(pooled.data().subspan(b * dim, dim), jit[b][0], jit[b][1]);
      }
      const Tensor latents = codec.encode_pooled(pooled);
      const Tensor snorm = normalized_states(net.stats(), states);
      Tensor centered = chunk;
      kinematics::center_rows(net.stats(), centered.data());
      const flowmatch::FMBatch fb = flowmatch::make_batch(std::move(centered), fm_rng, net.config().fm);
      net.params().zero_grad();
      Graph g;
      flowmatch::VelocityModel u = [&](Graph& gg, Var noisy, std::span<const float> t) {
        return net.velocity(gg, noisy, t, latents, batch_tokens, snorm);
      };
      Var loss = flowmatch::fm_loss(g, u, fb, &mask);
      const float l = loss.value().item();
      if (!std::isfinite(l)) {
        throw worldmodel::DivergenceError("policy training diverged in " + name + " at step " + std::to_string(step));
      }
      trace.loss.push_back(l);
      g.backward(loss);
      adam.step(net.params());
    }
    if (traces) traces->push_back(std::move(trace));
  }
  return net;
}

ChunkPredictor make_predictor(const PolicyNet& policy, std::uint64_t seed, int ode_steps) {
  auto rng = std::make_shared<Rng>(seed);
  return [&policy, rng, ode_steps](const Frame& f, const std::string& token, const ActionVector& state, std::size_t) {
    return policy.predict_chunk(f, token, state, *rng, ode_steps);
  };
}

sim::Episode rollout_policy(const ChunkPredictor& predictor, std::uint64_t sim_seed, const std::string& token,
                            std::size_t max_steps, std::size_t replan_every, const sim::FrameGeometry& geometry,
                            const sim::SimConfig& cfg) {
  if (replan_every < 1 || replan_every > kChunk) {
    throw std::invalid_argument("rollout_policy: replan_every must be in [1, 16], got " + std::to_string(replan_every));
  }
  sim::Episode e;
  e.meta.seed = sim_seed;
  e.meta.task = token;
  e.meta.source = sim::Source::kReal;
  e.meta.generator = "policy_rollout";
  e.meta.split = "eval";
  e.geometry = geometry;
  e.states.push_back(sim::reset(sim_seed, cfg));
  e.frames.push_back(sim::render(e.states.back(), geometry, cfg));
  ActionVector state = sim::home_pose_encoding(cfg);
  bool done = false;
  while (!done && e.actions.size() < max_steps) {
    std::vector<ActionVector> chunk;
    try {
      chunk = predictor(e.frames.back(), token, state, e.actions.size());
    } catch (const kinematics::RotationError&) {
      break;  // the prediction does not decode to a valid command
    }
    for (std::size_t k = 0; k < replan_every && k < chunk.size() && e.actions.size() < max_steps; ++k) {
      sim::SimState next;
      try {
        next = sim::step(e.states.back(), chunk[k], cfg);
      } catch (const std::invalid_argument&) {
        done = true;
        break;
      }
      e.actions.push_back(chunk[k]);
      e.states.push_back(next);
      e.frames.push_back(sim::render(next, geometry, cfg));
      state = chunk[k];
      if (sim::task_satisfied(e.states, token)) {
        done = true;
        break;
      }
    }
  }
  e.meta.success = sim::task_satisfied(e.states, token);
  return e;
}

}  // namespace wmsynth::policy
