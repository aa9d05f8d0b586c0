#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "wmsynth/numerics/container.hpp"
#include "wmsynth/numerics/layers.hpp"
#include "wmsynth/sim/episode.hpp"

namespace wmsynth::worldmodel {

using numerics::Tensor;
using sim::Frame;
using sim::FrameGeometry;

struct CodecConfig {
  std::size_t latent_dim = 64;
  std::size_t hidden = 128;
  std::size_t pool = 2;  // average-pool factor applied before encoding
  int steps = 1500;
  std::size_t batch = 32;
  double learning_rate = 1e-3;
  bool operator==(const CodecConfig&) const = default;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Frames as [B, (H/p)*(W/p)*C] floats in [0, 1] after p x p average pooling.
Tensor pool_frames(std::span<const Frame> frames, std::size_t pool);
Tensor pool_frames(std::span<const Frame* const> frames, std::size_t pool);

// MLP autoencoder on pooled frames. Latents are standardized with per-dimension
// statistics measured on the training frames; decode inverts that and
// upsamples back to the native geometry with nearest-neighbour replication.
class FrameCodec {
 public:
  FrameCodec() = default;
  FrameCodec(const FrameGeometry& geometry, const CodecConfig& cfg, std::uint64_t seed);

  const FrameGeometry& geometry() const { return geometry_; }
  const CodecConfig& config() const { return cfg_; }
  std::size_t latent_dim() const { return cfg_.latent_dim; }
  std::size_t input_dim() const;

  // pooled [B, input_dim] -> standardized latents [B, latent_dim]
  Tensor encode_pooled(const Tensor& pooled) const;
  Tensor encode(std::span<const Frame> frames) const;
  // standardized latents -> pooled reconstruction in [0, 1]
  Tensor decode_pooled(const Tensor& latents) const;
  std::vector<Frame> decode(const Tensor& latents) const;

  // Raw (unstandardized) graph paths used for training.
  numerics::Var encode_raw(numerics::Graph& g, numerics::Var pooled);
  numerics::Var decode_raw(numerics::Graph& g, numerics::Var latent);

  void set_statistics(Tensor mean, Tensor stddev);
  const Tensor& latent_mean() const { return mean_; }
  const Tensor& latent_std() const { return std_; }

  numerics::ParameterStore& params() { return store_; }
  const numerics::ParameterStore& params() const { return store_; }

  // Stores parameters and statistics under "<prefix>" and geometry/config under meta[<key>].
  void save(numerics::Container& c, const std::string& prefix = "codec.") const;
  static FrameCodec load(const numerics::Container& c, const std::string& prefix = "codec.");

  void check_geometry(const FrameGeometry& g) const;

 private:
  FrameGeometry geometry_;
  CodecConfig cfg_;
  mutable numerics::ParameterStore store_;
  numerics::Mlp encoder_, decoder_;
  Tensor mean_, std_;
};

struct CodecReport {
  std::vector<float> loss;
};

// Trains on every frame of `episodes`. Throws DivergenceError on a non-finite loss.
FrameCodec train_codec(std::span<const sim::Episode> episodes, const CodecConfig& cfg, std::uint64_t seed,
                       CodecReport* report = nullptr);

// Mean squared error on the [0, 1] scale between frames and their
// reconstructions at native resolution.
double reconstruction_mse(const FrameCodec& codec, std::span<const Frame> frames);

// Pixel [0,1] floats -> 8-bit with rounding and clamping.
std::uint8_t to_byte(float v);

}  // namespace wmsynth::worldmodel
