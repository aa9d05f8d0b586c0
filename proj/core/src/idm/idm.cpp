#include "wmsynth/idm/idm.hpp"

#include <cmath>

#include "wmsynth/kinematics/stats_io.hpp"
#include "wmsynth/numerics/adam.hpp"
#include "wmsynth/numerics/ops.hpp"

namespace wmsynth::idm {

using kinematics::kActionDim;
using numerics::Graph;
using numerics::GradMode;
using numerics::Rng;
using numerics::Var;

namespace {

constexpr std::size_t kChunkDim = kChunk * kActionDim;

Tensor draw_noise(std::span<Rng* const> rngs) {
  Tensor x({rngs.size(), kChunkDim});
  for (std::size_t b = 0; b < rngs.size(); ++b) {
    const Tensor n = numerics::normal_tensor<float>({kChunkDim}, *rngs[b]);
    std::copy(n.data().begin(), n.data().end(), x.data().begin() + b * kChunkDim);
  }
  return x;
}

}  // namespace

Tensor normalized_actions(const kinematics::MinMaxStats& stats, std::span<const ActionVector> actions) {
  Tensor out({actions.size(), kActionDim});
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const ActionVector n = kinematics::apply(stats, actions[i]);
    for (std::size_t k = 0; k < kActionDim; ++k) out.at(i, k) = static_cast<float>(n[k]);
  }
  return out;
}

IdmNet::IdmNet(worldmodel::FrameCodec codec, const kinematics::MinMaxStats& stats, const IdmConfig& cfg,
               std::uint64_t seed)
    : codec_(std::move(codec)), stats_(stats), cfg_(cfg) {
  cfg_.fm.validate();
  Rng rng(numerics::derive_seed(seed, "idm.init"));
  fusion_ = numerics::Mlp(store_, "idm.fusion", {3 * codec_.latent_dim(), cfg.fusion_hidden, cfg.feature_dim}, rng);
  flowmatch::FlowHeadConfig hc;
  hc.data_dim = kChunkDim;
  hc.cond_dim = cfg.feature_dim;
  hc.hidden = cfg.head_hidden;
  hc.depth = cfg.head_depth;
  head_ = flowmatch::FlowHead(store_, "idm.head", hc, rng);
  if (cfg_.train_encoder) {
    const std::size_t L = codec_.latent_dim();
    encoder_ = numerics::Mlp(store_, "idm.encoder", {codec_.input_dim(), codec_.config().hidden, L}, rng);
    for (const auto& [name, p] : codec_.params().items()) {
      if (name.starts_with("encoder.")) store_.at("idm." + name).value = p.value;
    }
    inv_std_ = Tensor({L});
    neg_mean_ = Tensor({L});
    for (std::size_t k = 0; k < L; ++k) {
      inv_std_[k] = 1.0f / codec_.latent_std()[k];
      neg_mean_[k] = -codec_.latent_mean()[k];
    }
  }
}

Var IdmNet::encode(Graph& g, Var pooled) const {
  if (!cfg_.train_encoder) return g.constant(codec_.encode_pooled(pooled.value()));
  Var raw = encoder_.forward(g, store_, pooled);
  return numerics::mul_rowvec(numerics::add_rowvec(raw, g.constant(neg_mean_)), g.constant(inv_std_));
}

Tensor IdmNet::encode_pooled(const Tensor& pooled) const {
  if (pooled.rank() != 2 || pooled.dim(1) != codec_.input_dim()) {
    throw numerics::ShapeError("idm encode", pooled.shape(), {0, codec_.input_dim()});
  }
  Graph g(GradMode::kInference);
  return encode(g, g.constant(pooled)).value();
}

Var IdmNet::velocity(Graph& g, Var noisy, std::span<const float> t, Var za, Var zb) const {
  Var pair = numerics::concat<float>({za, zb, numerics::sub(zb, za)}, 1);
  Var cond = numerics::gelu(fusion_.forward(g, store_, pair));
  return head_.forward(g, store_, noisy, t, cond);
}

Var IdmNet::velocity(Graph& g, Var noisy, std::span<const float> t, const Tensor& za, const Tensor& zb) const {
  return velocity(g, noisy, t, g.constant(za), g.constant(zb));
}

Tensor IdmNet::predict_latent_pairs(const Tensor& za, const Tensor& zb, std::span<Rng* const> rngs,
                                    int ode_steps) const {
  if (za.shape() != zb.shape() || za.rank() != 2 || za.dim(0) != rngs.size()) {
    throw numerics::ShapeError("idm latent pairs", za.shape(), zb.shape());
  }
  const std::size_t B = za.dim(0);
  if (B == 0) return Tensor({0, kChunk, kActionDim});
  Graph cg(GradMode::kInference);
  // The pair features do not depend on t; compute them once.
  Var a = cg.constant(za), b = cg.constant(zb);
  const Tensor cond =
      numerics::gelu(fusion_.forward(cg, store_, numerics::concat<float>({a, b, numerics::sub(b, a)}, 1))).value();
  flowmatch::VelocityField field = [&](const Tensor& x, float t) {
    Graph g(GradMode::kInference);
    const std::vector<float> tt(B, t);
    return head_.forward(g, store_, g.constant(x), tt, g.constant(cond)).value();
  };
  const int steps = ode_steps > 0 ? ode_steps : cfg_.fm.steps;
  Tensor x = flowmatch::ode_integrate(field, draw_noise(rngs), steps);
  kinematics::uncenter_rows(stats_, x.data());
  return x.reshaped({B, kChunk, kActionDim});
}

Tensor IdmNet::predict_actions(const Frame& a, const Frame& b, Rng& rng, int ode_steps) const {
  codec_.check_geometry(a.geometry);
  codec_.check_geometry(b.geometry);
  const auto pool = codec_.config().pool;
  const Tensor za = encode_pooled(worldmodel::pool_frames(std::span<const Frame>(&a, 1), pool));
  const Tensor zb = encode_pooled(worldmodel::pool_frames(std::span<const Frame>(&b, 1), pool));
  Rng* r[1] = {&rng};
  return predict_latent_pairs(za, zb, r, ode_steps).reshaped({kChunk, kActionDim});
}

std::vector<double> IdmNet::residuals(const Tensor& za, const Tensor& zb, const Tensor& chunks,
                                      std::span<Rng* const> rngs) const {
  const std::size_t B = za.dim(0);
  Tensor clean = chunks.reshaped({B, kChunkDim});
  kinematics::center_rows(stats_, clean.data());
  const Tensor noise = draw_noise(rngs);
  flowmatch::FMBatch batch{clean, noise, std::vector<float>(B, 0.5f)};
  Graph g(GradMode::kInference);
  const Tensor u = velocity(g, g.constant(batch.noisy()), batch.t, za, zb).value();
  const Tensor v = batch.target();
  std::vector<double> out(B, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t k = 0; k < kChunkDim; ++k) {
      const double d = u.at(b, k) - v.at(b, k);
      out[b] += d * d;
    }
    out[b] /= static_cast<double>(kChunkDim);
  }
  return out;
}

numerics::Container IdmNet::to_container() const {
  numerics::Container c;
  c.kind = "idm";
  codec_.save(c, "codec.");
  numerics::append_parameters(c, store_, "");
  kinematics::append_stats(c, stats_);
  c.meta["id"] = id_;
  c.meta["chunk"] = kChunk;
  c.meta["config"] = {{"fusion_hidden", cfg_.fusion_hidden}, {"feature_dim", cfg_.feature_dim},
                      {"head_hidden", cfg_.head_hidden},     {"head_depth", cfg_.head_depth},
                      {"fm_mu", cfg_.fm.mu},                 {"fm_sigma", cfg_.fm.sigma},
                      {"fm_steps", cfg_.fm.steps},           {"train_encoder", cfg_.train_encoder}};
  return c;
}

IdmNet IdmNet::from_container(const numerics::Container& c) {
  if (c.kind != "idm") throw numerics::ContainerError("expected an idm checkpoint, found '" + c.kind + "'");
  const auto& m = c.meta.at("config");
  IdmConfig cfg;
  cfg.fusion_hidden = m.at("fusion_hidden");
  cfg.feature_dim = m.at("feature_dim");
  cfg.head_hidden = m.at("head_hidden");
  cfg.head_depth = m.at("head_depth");
  cfg.fm = {m.at("fm_mu"), m.at("fm_sigma"), m.at("fm_steps")};
  cfg.train_encoder = m.value("train_encoder", false);
  IdmNet net(worldmodel::FrameCodec::load(c, "codec."), kinematics::load_stats(c), cfg, 0);
  numerics::load_parameters(c, net.store_, "");
  net.id_ = c.meta.at("id").get<std::string>();
  return net;
}

namespace {

// Inputs are pooled frames when the encoder trains, frozen latents otherwise.
struct Pool {
  std::vector<Tensor> inputs;  // [frames, D]
  std::vector<Tensor> actions;  // normalized [frames - 1, 20]
  bool empty() const { return inputs.empty(); }
};

Pool make_pool(const IdmNet& net, std::span<const sim::Episode> eps, IdmTrace* trace) {
  Pool p;
  for (const auto& e : eps) {
    if (e.meta.split == "test") throw std::invalid_argument("train_idm: episode " + e.meta.id + " is a test episode");
    if (e.frames.size() < kChunk + 1) {
      if (trace) trace->warnings.push_back("skipped episode " + e.meta.id + ": fewer than 17 frames");
      continue;
    }
    Tensor pooled = worldmodel::pool_frames(e.frames, net.codec().config().pool);
    p.inputs.push_back(net.config().train_encoder ? std::move(pooled) : net.codec().encode_pooled(pooled));
    p.actions.push_back(normalized_actions(net.stats(), e.actions));
  }
  return p;
}

}  // namespace

IdmNet train_idm(std::span<const sim::Episode> general, std::span<const sim::Episode> task, const IdmNet& init,
                 const IdmTrainConfig& cfg, std::uint64_t seed, IdmTrace* trace) {
  IdmNet net = init;
  const Pool gp = make_pool(net, general, trace);
  const Pool tp = make_pool(net, task, trace);
  if (gp.empty() && tp.empty()) throw std::invalid_argument("train_idm: no episode with at least 17 frames");
  const std::size_t D = (gp.empty() ? tp : gp).inputs[0].dim(1), B = cfg.batch;

  Rng rng(numerics::derive_seed(seed, "idm.samples"));
  Rng fm_rng(numerics::derive_seed(seed, "idm.fm"));
  numerics::Adam adam({cfg.learning_rate});
  Tensor xa({B, D}), xb({B, D}), chunk({B, kChunkDim});
  for (int step = 0; step < cfg.steps; ++step) {
    for (std::size_t b = 0; b < B; ++b) {
      const bool use_task = gp.empty() || (!tp.empty() && numerics::uniform(rng, 0.0, 1.0) < cfg.task_fraction);
      const Pool& p = use_task ? tp : gp;
      const std::size_t e = numerics::uniform_index(rng, p.inputs.size());
      const std::size_t n = p.actions[e].dim(0);
      const std::size_t t = numerics::uniform_index(rng, n - kChunk + 1);
      std::copy_n(p.inputs[e].data().begin() + t * D, D, xa.data().begin() + b * D);
      std::copy_n(p.inputs[e].data().begin() + (t + kChunk) * D, D, xb.data().begin() + b * D);
      std::copy_n(p.actions[e].data().begin() + t * kActionDim, kChunkDim, chunk.data().begin() + b * kChunkDim);
    }
    Tensor centered = chunk;
    kinematics::center_rows(net.stats(), centered.data());
    const flowmatch::FMBatch batch = flowmatch::make_batch(std::move(centered), fm_rng, net.config().fm);
    net.params().zero_grad();
    Graph g;
    const bool encode = net.config().train_encoder;
    Var za = encode ? net.encode(g, g.constant(xa)) : g.constant(xa);
    Var zb = encode ? net.encode(g, g.constant(xb)) : g.constant(xb);
    flowmatch::VelocityModel u = [&](Graph& gg, Var noisy, std::span<const float> t) {
      return net.velocity(gg, noisy, t, za, zb);
    };
    Var loss = flowmatch::fm_loss(g, u, batch);
    const float l = loss.value().item();
    if (!std::isfinite(l)) throw worldmodel::DivergenceError("IDM training diverged at step " + std::to_string(step));
    if (trace) trace->loss.push_back(l);
    g.backward(loss);
    adam.step(net.params());
  }
  return net;
}

std::vector<std::size_t> label_windows(std::size_t n) {
  if (n < kChunk) throw std::invalid_argument("pseudo_label: need at least 17 frames, got " + std::to_string(n + 1));
  std::vector<std::size_t> w;
  for (std::size_t k = 0; k + kChunk <= n; k += kChunk) w.push_back(k);
  if (w.back() + kChunk < n) w.push_back(n - kChunk);
  return w;
}

namespace {

std::vector<LabelResult> label_videos(const IdmNet& idm, std::span<const std::vector<Frame>> videos,
                                      std::span<Rng* const> video_rngs, int ode_steps) {
  std::vector<std::vector<std::size_t>> windows;
  std::vector<Rng*> row_rng;
  std::vector<const Frame*> fa, fb;
  for (std::size_t v = 0; v < videos.size(); ++v) {
    if (videos[v].empty()) throw std::invalid_argument("pseudo_label: empty video");
    for (const auto& f : videos[v]) idm.codec().check_geometry(f.geometry);
    windows.push_back(label_windows(videos[v].size() - 1));
    for (std::size_t k : windows.back()) {
      fa.push_back(&videos[v][k]);
      fb.push_back(&videos[v][k + kChunk]);
      row_rng.push_back(video_rngs[v]);
    }
  }
  const auto pool = idm.codec().config().pool;
  const Tensor za = idm.encode_pooled(worldmodel::pool_frames(std::span<const Frame* const>(fa), pool));
  const Tensor zb = idm.encode_pooled(worldmodel::pool_frames(std::span<const Frame* const>(fb), pool));
  const Tensor chunks = idm.predict_latent_pairs(za, zb, row_rng, ode_steps);
  const std::vector<double> conf = idm.residuals(za, zb, chunks, row_rng);

  std::vector<LabelResult> out;
  out.reserve(videos.size());
  std::size_t row = 0;
  for (std::size_t v = 0; v < videos.size(); ++v) {
    const std::size_t n = videos[v].size() - 1;
    std::vector<ActionVector> normalized(n);
    LabelResult r;
    // Later windows overwrite earlier ones where they overlap.
    for (std::size_t k : windows[v]) {
      for (std::size_t s = 0; s < kChunk; ++s) {
        for (std::size_t d = 0; d < kActionDim; ++d) {
          normalized[k + s][d] = chunks[(row * kChunk + s) * kActionDim + d];
        }
      }
      r.episode.meta.chunk_confidence.push_back(conf[row]);
      ++row;
    }
    r.episode.actions.reserve(n);
    for (const auto& a : normalized) {
      ActionVector raw = kinematics::invert(idm.stats(), a);
      try {
        raw = kinematics::reorthonormalize(raw);
      } catch (const kinematics::RotationError&) {
        ++r.rotation_failures;
      }
      r.episode.actions.push_back(raw);
    }
    r.episode.frames = videos[v];
    r.episode.geometry = videos[v][0].geometry;
    r.episode.meta.source = sim::Source::kSynthetic;
    r.episode.meta.success = false;
    r.episode.meta.generator = "world_model";
    r.episode.meta.split = "synthetic";
    r.episode.meta.label_source = idm.id();
    r.episode.meta.label_windows = windows[v];
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

std::vector<LabelResult> pseudo_label_batch(const IdmNet& idm, std::span<const std::vector<Frame>> videos,
                                            std::span<const std::uint64_t> seeds, int ode_steps) {
  if (videos.size() != seeds.size()) throw std::invalid_argument("pseudo_label_batch: one seed per video");
  std::vector<Rng> rngs;
  rngs.reserve(seeds.size());
  for (auto s : seeds) rngs.emplace_back(s);
  std::vector<Rng*> ptrs;
  for (auto& r : rngs) ptrs.push_back(&r);
  return label_videos(idm, videos, ptrs, ode_steps);
}

LabelResult pseudo_label(const IdmNet& idm, const std::vector<Frame>& frames, Rng& rng, int ode_steps) {
  Rng* ptr[1] = {&rng};
  return std::move(label_videos(idm, std::span<const std::vector<Frame>>(&frames, 1), ptr, ode_steps)[0]);
}

}  // namespace wmsynth::idm
