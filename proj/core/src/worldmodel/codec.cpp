#include "wmsynth/worldmodel/codec.hpp"

#include <algorithm>
#include <cmath>

#include "wmsynth/numerics/adam.hpp"
#include "wmsynth/numerics/ops.hpp"

namespace wmsynth::worldmodel {

using numerics::Graph;
using numerics::GradMode;
using numerics::ParameterStore;
using numerics::Shape;
using numerics::Var;

namespace {

void check_pool(const FrameGeometry& g, std::size_t pool) {
  if (pool == 0 || g.height % pool != 0 || g.width % pool != 0) {
    throw std::invalid_argument("codec: pool factor " + std::to_string(pool) + " does not divide frame " +
                                std::to_string(g.height) + "x" + std::to_string(g.width));
  }
}

void pool_into(const Frame& f, std::size_t pool, float* out) {
  const auto& g = f.geometry;
  const std::size_t ph = g.height / pool, pw = g.width / pool;
  const float norm = 1.0f / (255.0f * static_cast<float>(pool * pool));
  for (std::size_t r = 0; r < ph; ++r) {
    for (std::size_t c = 0; c < pw; ++c) {
      for (std::size_t ch = 0; ch < g.channels; ++ch) {
        unsigned acc = 0;
        for (std::size_t dr = 0; dr < pool; ++dr) {
          for (std::size_t dc = 0; dc < pool; ++dc) acc += f.at(r * pool + dr, c * pool + dc)[ch];
        }
        out[(r * pw + c) * g.channels + ch] = static_cast<float>(acc) * norm;
      }
    }
  }
}

}  // namespace

std::uint8_t to_byte(float v) {
  const float s = std::clamp(v, 0.0f, 1.0f) * 255.0f;
  return static_cast<std::uint8_t>(std::lround(s));
}

Tensor pool_frames(std::span<const Frame* const> frames, std::size_t pool) {
  if (frames.empty()) return Tensor({0, 0});
  const FrameGeometry& g = frames[0]->geometry;
  check_pool(g, pool);
  const std::size_t dim = (g.height / pool) * (g.width / pool) * g.channels;
  Tensor out({frames.size(), dim});
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i]->geometry != g) throw std::invalid_argument("pool_frames: mixed frame geometries");
    pool_into(*frames[i], pool, out.data().data() + i * dim);
  }
  return out;
}

Tensor pool_frames(std::span<const Frame> frames, std::size_t pool) {
  std::vector<const Frame*> ptrs;
  ptrs.reserve(frames.size());
  for (const auto& f : frames) ptrs.push_back(&f);
  return pool_frames(std::span<const Frame* const>(ptrs), pool);
}

FrameCodec::FrameCodec(const FrameGeometry& geometry, const CodecConfig& cfg, std::uint64_t seed)
    : geometry_(geometry), cfg_(cfg) {
  check_pool(geometry, cfg.pool);
  numerics::Rng rng(numerics::derive_seed(seed, "codec.init"));
  encoder_ = numerics::Mlp(store_, "encoder", {input_dim(), cfg.hidden, cfg.latent_dim}, rng);
  decoder_ = numerics::Mlp(store_, "decoder", {cfg.latent_dim, cfg.hidden, input_dim()}, rng);
  mean_ = Tensor({cfg.latent_dim}, 0.0f);
  std_ = Tensor({cfg.latent_dim}, 1.0f);
}

std::size_t FrameCodec::input_dim() const {
  return (geometry_.height / cfg_.pool) * (geometry_.width / cfg_.pool) * geometry_.channels;
}

void FrameCodec::check_geometry(const FrameGeometry& g) const {
  if (g != geometry_) {
    throw std::invalid_argument("frame geometry " + std::to_string(g.height) + "x" + std::to_string(g.width) + "x" +
                                std::to_string(g.channels) + " does not match model geometry " +
                                std::to_string(geometry_.height) + "x" + std::to_string(geometry_.width) + "x" +
                                std::to_string(geometry_.channels));
  }
}

Var FrameCodec::encode_raw(Graph& g, Var pooled) { return encoder_.forward(g, store_, pooled); }
Var FrameCodec::decode_raw(Graph& g, Var latent) { return decoder_.forward(g, store_, latent); }

Tensor FrameCodec::encode_pooled(const Tensor& pooled) const {
  if (pooled.rank() != 2 || pooled.dim(1) != input_dim()) {
    throw numerics::ShapeError("codec encode", pooled.shape(), {0, input_dim()});
  }
  Graph g(GradMode::kInference);
  Tensor z = encoder_.forward(g, store_, g.constant(pooled)).value();
  const std::size_t L = cfg_.latent_dim;
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = (z[i] - mean_[i % L]) / std_[i % L];
  return z;
}

Tensor FrameCodec::encode(std::span<const Frame> frames) const {
  for (const auto& f : frames) check_geometry(f.geometry);
  return encode_pooled(pool_frames(frames, cfg_.pool));
}

Tensor FrameCodec::decode_pooled(const Tensor& latents) const {
  if (latents.rank() != 2 || latents.dim(1) != cfg_.latent_dim) {
    throw numerics::ShapeError("codec decode", latents.shape(), {0, cfg_.latent_dim});
  }
  Tensor z = latents;
  const std::size_t L = cfg_.latent_dim;
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = z[i] * std_[i % L] + mean_[i % L];
  Graph g(GradMode::kInference);
  return decoder_.forward(g, store_, g.constant(std::move(z))).value();
}

std::vector<Frame> FrameCodec::decode(const Tensor& latents) const {
  const Tensor pooled = decode_pooled(latents);
  const std::size_t p = cfg_.pool, pw = geometry_.width / p, C = geometry_.channels;
  const std::size_t dim = input_dim();
  std::vector<Frame> out;
  out.reserve(latents.dim(0));
  for (std::size_t b = 0; b < latents.dim(0); ++b) {
    Frame f(geometry_);
    const float* src = pooled.data().data() + b * dim;
    for (std::size_t r = 0; r < geometry_.height; ++r) {
      for (std::size_t c = 0; c < geometry_.width; ++c) {
        const float* px = src + ((r / p) * pw + c / p) * C;
        for (std::size_t ch = 0; ch < C; ++ch) f.at(r, c)[ch] = to_byte(px[ch]);
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

void FrameCodec::set_statistics(Tensor mean, Tensor stddev) {
  if (mean.shape() != Shape{cfg_.latent_dim} || stddev.shape() != Shape{cfg_.latent_dim}) {
    throw numerics::ShapeError("codec statistics", mean.shape(), stddev.shape());
  }
  mean_ = std::move(mean);
  std_ = std::move(stddev);
}

void FrameCodec::save(numerics::Container& c, const std::string& prefix) const {
  numerics::append_parameters(c, store_, prefix);
  c.tensors.push_back({prefix + "latent_mean", mean_});
  c.tensors.push_back({prefix + "latent_std", std_});
  c.meta[prefix + "config"] = {{"height", geometry_.height},   {"width", geometry_.width},
                               {"channels", geometry_.channels}, {"latent_dim", cfg_.latent_dim},
                               {"hidden", cfg_.hidden},         {"pool", cfg_.pool}};
}

FrameCodec FrameCodec::load(const numerics::Container& c, const std::string& prefix) {
  const auto& m = c.meta.at(prefix + "config");
  FrameGeometry g{m.at("height").get<std::size_t>(), m.at("width").get<std::size_t>(),
                  m.at("channels").get<std::size_t>()};
  CodecConfig cfg;
  cfg.latent_dim = m.at("latent_dim").get<std::size_t>();
  cfg.hidden = m.at("hidden").get<std::size_t>();
  cfg.pool = m.at("pool").get<std::size_t>();
  FrameCodec codec(g, cfg, 0);
  numerics::load_parameters(c, codec.store_, prefix);
  codec.set_statistics(c.tensor(prefix + "latent_mean"), c.tensor(prefix + "latent_std"));
  return codec;
}

FrameCodec train_codec(std::span<const sim::Episode> episodes, const CodecConfig& cfg, std::uint64_t seed,
                       CodecReport* report) {
  std::vector<const Frame*> frames;
  for (const auto& e : episodes) {
    if (e.meta.split == "test") throw std::invalid_argument("train_codec: episode " + e.meta.id + " is a test episode");
    for (const auto& f : e.frames) frames.push_back(&f);
  }
  if (frames.empty()) throw std::invalid_argument("train_codec: no frames");
  FrameCodec codec(frames[0]->geometry, cfg, seed);
  for (const Frame* f : frames) codec.check_geometry(f->geometry);

  numerics::Rng rng(numerics::derive_seed(seed, "codec.batches"));
  numerics::Adam adam({cfg.learning_rate});
  std::vector<const Frame*> batch(cfg.batch);
  for (int step = 0; step < cfg.steps; ++step) {
    for (auto& b : batch) b = frames[numerics::uniform_index(rng, frames.size())];
    const Tensor x = pool_frames(std::span<const Frame* const>(batch), cfg.pool);
    codec.params().zero_grad();
    Graph g;
    Var in = g.constant(x);
    Var loss = numerics::mse(codec.decode_raw(g, codec.encode_raw(g, in)), in);
    const float l = loss.value().item();
    if (!std::isfinite(l)) throw DivergenceError("codec training diverged at step " + std::to_string(step));
    if (report) report->loss.push_back(l);
    g.backward(loss);
    adam.step(codec.params());
  }

  // Latent statistics over (at most 4096 evenly spaced) training frames.
  const std::size_t n = std::min<std::size_t>(frames.size(), 4096);
  std::vector<const Frame*> sample(n);
  for (std::size_t i = 0; i < n; ++i) sample[i] = frames[i * frames.size() / n];
  const Tensor z = codec.encode_pooled(pool_frames(std::span<const Frame* const>(sample), cfg.pool));
  const std::size_t L = cfg.latent_dim;
  std::vector<double> mean(L, 0.0), var(L, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < L; ++k) mean[k] += z.at(i, k);
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < L; ++k) var[k] += (z.at(i, k) - mean[k]) * (z.at(i, k) - mean[k]);
  }
  Tensor mt({L}), st({L});
  for (std::size_t k = 0; k < L; ++k) {
    mt[k] = static_cast<float>(mean[k]);
    st[k] = static_cast<float>(std::max(std::sqrt(var[k] / static_cast<double>(n)), 1e-3));
  }
  codec.set_statistics(std::move(mt), std::move(st));
  return codec;
}

double reconstruction_mse(const FrameCodec& codec, std::span<const Frame> frames) {
  if (frames.empty()) throw std::invalid_argument("reconstruction_mse: no frames");
  const auto recon = codec.decode(codec.encode(frames));
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    for (std::size_t k = 0; k < frames[i].pixels.size(); ++k) {
      const double d = (double(frames[i].pixels[k]) - double(recon[i].pixels[k])) / 255.0;
      acc += d * d;
    }
    count += frames[i].pixels.size();
  }
  return acc / static_cast<double>(count);
}

}  // namespace wmsynth::worldmodel
