#include "wmsynth/worldmodel/worldmodel.hpp"

#include <algorithm>
#include <cmath>

#include "wmsynth/kinematics/stats_io.hpp"
#include "wmsynth/numerics/adam.hpp"
#include "wmsynth/numerics/ops.hpp"

namespace wmsynth::worldmodel {

using numerics::Graph;
using numerics::GradMode;
using numerics::Rng;
using numerics::Shape;
using numerics::Var;

std::vector<std::string> default_vocabulary() {
  return {sim::kTaskGeneralMotion, sim::kTaskHandover, sim::kTaskGraspOnly};
}

WorldModel::WorldModel(FrameCodec codec, const DynamicsConfig& dyn, std::vector<std::string> vocabulary,
                       const flowmatch::FMConfig& fm, std::uint64_t seed)
    : codec_(std::move(codec)), vocab_(std::move(vocabulary)), fm_(fm) {
  fm_.validate();
  if (vocab_.empty()) throw std::invalid_argument("world model: empty task vocabulary");
  if (dyn.latent_dim != codec_.latent_dim()) {
    throw std::invalid_argument("world model: dynamics latent dim " + std::to_string(dyn.latent_dim) +
                                " does not match codec latent dim " + std::to_string(codec_.latent_dim()));
  }
  Rng rng(numerics::derive_seed(seed, "worldmodel.init"));
  net_ = DynamicsNet(store_, dyn, vocab_.size(), rng);
}

std::size_t WorldModel::token_id(const std::string& token) const {
  auto it = std::find(vocab_.begin(), vocab_.end(), token);
  if (it == vocab_.end()) throw UnknownTokenError("unknown task token '" + token + "'");
  return static_cast<std::size_t>(it - vocab_.begin());
}

void WorldModel::attach_adapters(const numerics::LoraConfig& cfg, std::uint64_t seed) {
  if (has_adapters()) throw std::logic_error("world model already carries adapters");
  Rng rng(numerics::derive_seed(seed, "worldmodel.lora"));
  store_.set_trainable("", false);
  net_.attach_adapters(store_, cfg, rng);
  lora_ = cfg;
}

void WorldModel::merge_adapters() { net_.merge_adapters(store_); }

Var WorldModel::velocity(Graph& g, Var noisy, std::span<const float> t, Var first, std::span<const std::size_t> tokens) {
  return net_.forward(g, store_, noisy, t, first, tokens);
}

std::vector<Frame> WorldModel::predict_rollout(const Frame& first, const std::string& token, std::size_t T, Rng& rng,
                                               int ode_steps) const {
  if (T < 1) throw std::invalid_argument("predict_rollout: T must be >= 1");
  const std::size_t tok = token_id(token);
  codec_.check_geometry(first.geometry);
  const std::size_t W = window(), L = codec_.latent_dim();
  const int steps = ode_steps > 0 ? ode_steps : fm_.steps;
  Tensor z0 = codec_.encode(std::span<const Frame>(&first, 1));
  std::vector<Frame> out;
  out.reserve(T);
  const std::vector<std::size_t> tokens{tok};
  while (out.size() < T) {
    flowmatch::VelocityField field = [&](const Tensor& x, float t) {
      Graph g(GradMode::kInference);
      const float tt[1] = {t};
      return net_.forward(g, store_, g.constant(x), tt, g.constant(z0), tokens).value();
    };
    const Tensor latents = flowmatch::ode_sample(field, {1, W, L}, rng, steps);
    auto frames = codec_.decode(latents.reshaped({W, L}));
    for (auto& f : frames) {
      if (out.size() < T) out.push_back(f);
    }
    z0 = codec_.encode(std::span<const Frame>(&frames.back(), 1));
  }
  return out;
}

std::vector<std::vector<Frame>> WorldModel::predict_rollouts(std::span<const Frame> firsts, const std::string& token,
                                                             std::size_t T, std::span<const std::uint64_t> seeds,
                                                             int ode_steps) const {
  if (firsts.size() != seeds.size()) throw std::invalid_argument("predict_rollouts: one seed per initial frame");
  if (T < 1) throw std::invalid_argument("predict_rollouts: T must be >= 1");
  const std::size_t tok = token_id(token);
  const std::size_t W = window(), L = codec_.latent_dim(), B = firsts.size();
  const int steps = ode_steps > 0 ? ode_steps : fm_.steps;
  std::vector<Rng> rngs;
  rngs.reserve(B);
  for (auto s : seeds) rngs.emplace_back(s);

  Tensor z0 = codec_.encode(firsts);
  std::vector<std::vector<Frame>> out(B);
  const std::vector<std::size_t> tokens(B, tok);
  while (out[0].size() < T) {
    // Each row draws its starting noise from its own generator, exactly as the single-rollout path.
    Tensor x({B, W, L});
    for (std::size_t b = 0; b < B; ++b) {
      const Tensor n = numerics::normal_tensor<float>({1, W, L}, rngs[b]);
      std::copy(n.data().begin(), n.data().end(), x.data().begin() + b * W * L);
    }
    flowmatch::VelocityField field = [&](const Tensor& xt, float t) {
      Graph g(GradMode::kInference);
      const std::vector<float> tt(B, t);
      return net_.forward(g, store_, g.constant(xt), tt, g.constant(z0), tokens).value();
    };
    const Tensor latents = flowmatch::ode_integrate(field, std::move(x), steps);
    auto frames = codec_.decode(latents.reshaped({B * W, L}));
    std::vector<Frame> last;
    last.reserve(B);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t w = 0; w < W; ++w) {
        if (out[b].size() < T) out[b].push_back(frames[b * W + w]);
      }
      last.push_back(frames[b * W + W - 1]);
    }
    z0 = codec_.encode(last);
  }
  return out;
}

numerics::Container WorldModel::to_container() const {
  numerics::Container c;
  c.kind = "world_model";
  codec_.save(c, "codec.");
  numerics::append_parameters(c, store_, "");
  const auto& d = net_.config();
  c.meta["vocabulary"] = vocab_;
  c.meta["fm"] = {{"mu", fm_.mu}, {"sigma", fm_.sigma}, {"steps", fm_.steps}};
  c.meta["dynamics"] = {{"latent_dim", d.latent_dim}, {"model_dim", d.model_dim}, {"heads", d.heads},
                        {"blocks", d.blocks},         {"ffn_dim", d.ffn_dim},     {"window", d.window},
                        {"token_dim", d.token_dim},   {"time_dim", d.time_dim}};
  c.meta["adapters"] = {{"attached", has_adapters()},
                        {"rank", lora_.rank},
                        {"alpha", lora_.alpha},
                        {"targets", has_adapters() ? net_.adapter_targets() : std::vector<std::string>{}}};
  c.meta["has_action_stats"] = stats_.has_value();
  if (stats_) kinematics::append_stats(c, *stats_);
  return c;
}

WorldModel WorldModel::from_container(const numerics::Container& c) {
  if (c.kind != "world_model") throw numerics::ContainerError("expected a world_model checkpoint, found '" + c.kind + "'");
  FrameCodec codec = FrameCodec::load(c, "codec.");
  const auto& m = c.meta.at("dynamics");
  DynamicsConfig d;
  d.latent_dim = m.at("latent_dim");
  d.model_dim = m.at("model_dim");
  d.heads = m.at("heads");
  d.blocks = m.at("blocks");
  d.ffn_dim = m.at("ffn_dim");
  d.window = m.at("window");
  d.token_dim = m.at("token_dim");
  d.time_dim = m.at("time_dim");
  flowmatch::FMConfig fm{c.meta.at("fm").at("mu"), c.meta.at("fm").at("sigma"), c.meta.at("fm").at("steps")};
  WorldModel wm(std::move(codec), d, c.meta.at("vocabulary").get<std::vector<std::string>>(), fm, 0);
  const auto& a = c.meta.at("adapters");
  wm.lora_ = {a.at("rank").get<std::size_t>(), a.at("alpha").get<double>()};
  if (a.at("attached").get<bool>()) {
    Rng rng(0);
    wm.store_.set_trainable("", false);
    wm.net_.attach_adapters(wm.store_, wm.lora_, rng);
  }
  // Only the dynamics parameters are stored unprefixed; codec entries carry "codec.".
  numerics::load_parameters(c, wm.store_, "");
  if (c.meta.value("has_action_stats", false)) wm.stats_ = kinematics::load_stats(c);
  return wm;
}

namespace {

struct Clip {
  Tensor first;  // [B, L]
  Tensor clean;  // [B, W, L]
  std::vector<std::size_t> tokens;
};

class ClipSampler {
 public:
  ClipSampler(const WorldModel& model, std::span<const sim::Episode> episodes) : W_(model.window()) {
    for (const auto& e : episodes) {
      if (e.meta.split == "test") throw std::invalid_argument("world model training: episode " + e.meta.id + " is a test episode");
      if (e.frames.size() < W_ + 1) continue;
      latents_.push_back(model.codec().encode(e.frames));
      tokens_.push_back(model.token_id(e.meta.task));
    }
    if (latents_.empty()) throw std::invalid_argument("world model training: no episode has at least W+1 frames");
    L_ = latents_[0].dim(1);
  }

  Clip sample(Rng& rng, std::size_t B) const {
    Clip c{Tensor({B, L_}), Tensor({B, W_, L_}), std::vector<std::size_t>(B)};
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t e = numerics::uniform_index(rng, latents_.size());
      const Tensor& z = latents_[e];
      const std::size_t s = numerics::uniform_index(rng, z.dim(0) - W_);
      std::copy_n(z.data().begin() + s * L_, L_, c.first.data().begin() + b * L_);
      std::copy_n(z.data().begin() + (s + 1) * L_, W_ * L_, c.clean.data().begin() + b * W_ * L_);
      c.tokens[b] = tokens_[e];
    }
    return c;
  }

 private:
  std::size_t W_, L_ = 0;
  std::vector<Tensor> latents_;
  std::vector<std::size_t> tokens_;
};

Var clip_loss(Graph& g, WorldModel& model, const Clip& clip, Rng& rng) {
  flowmatch::FMBatch batch = flowmatch::make_batch(clip.clean, rng, model.fm());
  Var first = g.constant(clip.first);
  flowmatch::VelocityModel u = [&](Graph& gg, Var noisy, std::span<const float> t) {
    return model.velocity(gg, noisy, t, first, clip.tokens);
  };
  return flowmatch::fm_loss(g, u, batch);
}

}  // namespace

WorldModel train_worldmodel(std::span<const sim::Episode> episodes, const WorldModel& init, bool use_adapters,
                            const WorldModelTrainConfig& cfg, std::uint64_t seed, WorldModelTrace* trace) {
  WorldModel model = init;
  if (use_adapters) {
    if (model.has_adapters()) throw std::invalid_argument("train_worldmodel: base already carries adapters");
    model.attach_adapters(cfg.lora, seed);
  }
  const ClipSampler sampler(model, episodes);
  Rng clip_rng(numerics::derive_seed(seed, "worldmodel.clips"));
  Rng fm_rng(numerics::derive_seed(seed, "worldmodel.fm"));
  numerics::Adam adam({cfg.learning_rate});
  for (int step = 0; step < cfg.steps; ++step) {
    const Clip clip = sampler.sample(clip_rng, cfg.batch);
    model.params().zero_grad();
    Graph g;
    Var loss = clip_loss(g, model, clip, fm_rng);
    const float l = loss.value().item();
    if (!std::isfinite(l)) throw DivergenceError("world model training diverged at step " + std::to_string(step));
    if (trace) trace->loss.push_back(l);
    g.backward(loss);
    adam.step(model.params());
  }
  return model;
}

float worldmodel_batch_loss(const WorldModel& model, std::span<const sim::Episode> episodes, std::size_t batch,
                            std::uint64_t seed) {
  WorldModel m = model;
  const ClipSampler sampler(m, episodes);
  Rng clip_rng(numerics::derive_seed(seed, "worldmodel.clips"));
  Rng fm_rng(numerics::derive_seed(seed, "worldmodel.fm"));
  const Clip clip = sampler.sample(clip_rng, batch);
  Graph g(GradMode::kInference);
  return clip_loss(g, m, clip, fm_rng).value().item();
}

}  // namespace wmsynth::worldmodel
