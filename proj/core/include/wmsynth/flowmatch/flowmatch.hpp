#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "wmsynth/numerics/graph.hpp"
#include "wmsynth/numerics/rng.hpp"

// Straight-path flow matching. Convention: t = 0 is data, t = 1 is noise.
namespace wmsynth::flowmatch {

using numerics::BasicGraph;
using numerics::BasicTensor;
using numerics::BasicVar;
using numerics::Rng;
using numerics::Tensor;

struct FMConfig {
  double mu = 0.0;     // logit-normal location
  double sigma = 1.0;  // logit-normal scale
  int steps = 32;      // Euler steps for sampling

  // Throws std::invalid_argument when sigma <= 0 or steps < 1.
  void validate() const;
  bool operator==(const FMConfig&) const = default;
};

// t = sigmoid(mu + sigma * z), z ~ N(0, 1).
double sample_timestep(Rng& rng, double mu, double sigma);
// Same map for a given z, for callers that supply their own normal draws.
double logit_normal(double z, double mu, double sigma);

// I_t = (1 - t) I + t eps.
template <typename T>
BasicTensor<T> interpolate(const BasicTensor<T>& clean, const BasicTensor<T>& noise, double t);
// v = eps - I.
template <typename T>
BasicTensor<T> velocity_target(const BasicTensor<T>& clean, const BasicTensor<T>& noise);

// One training batch: leading axis is the batch, one timestep per row.
template <typename T>
struct BasicFMBatch {
  BasicTensor<T> clean;
  BasicTensor<T> noise;
  std::vector<T> t;

  // I_t with each row interpolated at its own t.
  BasicTensor<T> noisy() const;
  BasicTensor<T> target() const;
  void validate() const;
};

using FMBatch = BasicFMBatch<float>;

// Draws noise and timesteps for `clean`.
template <typename T>
BasicFMBatch<T> make_batch(BasicTensor<T> clean, Rng& rng, const FMConfig& cfg);

// u_theta(I_t, t) with conditioning bound by the caller.
template <typename T>
using BasicVelocityModel = std::function<BasicVar<T>(BasicGraph<T>&, BasicVar<T> noisy, std::span<const T> t)>;
using VelocityModel = BasicVelocityModel<float>;

class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(const std::string& what, int step) : std::runtime_error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

// mean((u - v)^2) over batch and dimensions, or the masked mean when `mask`
// (shape of the batch) is given.
template <typename T>
BasicVar<T> fm_loss(BasicGraph<T>& g, const BasicVelocityModel<T>& model, const BasicFMBatch<T>& batch,
                    const BasicTensor<T>* mask = nullptr);

// Inference-time velocity field: rows of `noisy` all share time t.
using VelocityField = std::function<Tensor(const Tensor& noisy, float t)>;

// Euler integration from t = 1 to t = 0 starting at `start`:
// I_{t - d} = I_t - d * u(I_t, t), d = 1 / steps.
Tensor ode_integrate(const VelocityField& field, Tensor start, int steps);
// Draws the starting noise from `rng` and integrates.
Tensor ode_sample(const VelocityField& field, const numerics::Shape& shape, Rng& rng, int steps);

// Sinusoidal features of t: [sin(w_k t), cos(w_k t)] for dim/2 log-spaced
// frequencies. Returns [rows, dim].
template <typename T>
BasicTensor<T> timestep_features(std::span<const T> t, std::size_t dim);

}  // namespace wmsynth::flowmatch
