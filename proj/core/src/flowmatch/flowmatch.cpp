#include "wmsynth/flowmatch/flowmatch.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wmsynth/numerics/ops.hpp"

namespace wmsynth::flowmatch {

using numerics::Shape;
using numerics::ShapeError;

void FMConfig::validate() const {
  if (!(sigma > 0.0)) throw std::invalid_argument("flow matching: sigma must be positive, got " + std::to_string(sigma));
  if (steps < 1) throw std::invalid_argument("flow matching: steps must be >= 1, got " + std::to_string(steps));
}

double logit_normal(double z, double mu, double sigma) { return 1.0 / (1.0 + std::exp(-(mu + sigma * z))); }

double sample_timestep(Rng& rng, double mu, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sample_timestep: sigma must be positive");
  // Clamp away from the endpoints so t stays strictly inside (0, 1) in float.
  const double t = logit_normal(numerics::standard_normal(rng), mu, sigma);
  return std::clamp(t, 1e-6, 1.0 - 1e-6);
}

template <typename T>
BasicTensor<T> interpolate(const BasicTensor<T>& clean, const BasicTensor<T>& noise, double t) {
  if (clean.shape() != noise.shape()) throw ShapeError("interpolate", clean.shape(), noise.shape());
  BasicTensor<T> out(clean.shape());
  const T a = static_cast<T>(1.0 - t), b = static_cast<T>(t);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * clean[i] + b * noise[i];
  return out;
}

template <typename T>
BasicTensor<T> velocity_target(const BasicTensor<T>& clean, const BasicTensor<T>& noise) {
  if (clean.shape() != noise.shape()) throw ShapeError("velocity_target", clean.shape(), noise.shape());
  BasicTensor<T> out(clean.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = noise[i] - clean[i];
  return out;
}

template <typename T>
void BasicFMBatch<T>::validate() const {
  if (clean.shape() != noise.shape()) throw ShapeError("fm batch", clean.shape(), noise.shape());
  if (clean.rank() == 0 || clean.dim(0) != t.size()) {
    throw ShapeError("fm batch: expected one timestep per row, got " + std::to_string(t.size()) + " for shape " +
                     numerics::shape_string(clean.shape()));
  }
}

template <typename T>
BasicTensor<T> BasicFMBatch<T>::noisy() const {
  validate();
  BasicTensor<T> out(clean.shape());
  const std::size_t row = clean.size() / t.size();
  for (std::size_t r = 0; r < t.size(); ++r) {
    const T a = T(1) - t[r], b = t[r];
    for (std::size_t i = r * row; i < (r + 1) * row; ++i) out[i] = a * clean[i] + b * noise[i];
  }
  return out;
}

template <typename T>
BasicTensor<T> BasicFMBatch<T>::target() const {
  return velocity_target(clean, noise);
}

template <typename T>
BasicFMBatch<T> make_batch(BasicTensor<T> clean, Rng& rng, const FMConfig& cfg) {
  cfg.validate();
  if (clean.rank() == 0) throw ShapeError("make_batch: clean data needs a batch axis");
  BasicFMBatch<T> b;
  b.t.resize(clean.dim(0));
  for (auto& t : b.t) t = static_cast<T>(sample_timestep(rng, cfg.mu, cfg.sigma));
  b.noise = numerics::normal_tensor<T>(clean.shape(), rng);
  b.clean = std::move(clean);
  return b;
}

template <typename T>
BasicVar<T> fm_loss(BasicGraph<T>& g, const BasicVelocityModel<T>& model, const BasicFMBatch<T>& batch,
                    const BasicTensor<T>* mask) {
  batch.validate();
  BasicVar<T> u = model(g, g.constant(batch.noisy()), std::span<const T>(batch.t));
  if (u.shape() != batch.clean.shape()) throw ShapeError("fm_loss: model output", u.shape(), batch.clean.shape());
  if (!numerics::all_finite(u.value())) throw NonFiniteError("fm_loss: non-finite model output", 0);
  BasicVar<T> v = g.constant(batch.target());
  return mask ? numerics::masked_mse(u, v, *mask) : numerics::mse(u, v);
}

Tensor ode_integrate(const VelocityField& field, Tensor x, int steps) {
  if (steps < 1) throw std::invalid_argument("ode_sample: steps must be >= 1");
  const double dt = 1.0 / steps;
  for (int k = 0; k < steps; ++k) {
    const float t = static_cast<float>(1.0 - k * dt);
    const Tensor u = field(x, t);
    if (u.shape() != x.shape()) throw ShapeError("ode_sample: velocity", u.shape(), x.shape());
    const float d = static_cast<float>(dt);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= d * u[i];
    if (!numerics::all_finite(x)) {
      throw NonFiniteError("ode_sample: non-finite state after step " + std::to_string(k), k);
    }
  }
  return x;
}

Tensor ode_sample(const VelocityField& field, const Shape& shape, Rng& rng, int steps) {
  return ode_integrate(field, numerics::normal_tensor<float>(shape, rng), steps);
}

template <typename T>
BasicTensor<T> timestep_features(std::span<const T> t, std::size_t dim) {
  if (dim == 0 || dim % 2 != 0) throw std::invalid_argument("timestep_features: dim must be even and positive");
  const std::size_t half = dim / 2;
  BasicTensor<T> out({t.size(), dim});
  for (std::size_t r = 0; r < t.size(); ++r) {
    for (std::size_t k = 0; k < half; ++k) {
      // Frequencies from 1 to 1000, scaled so t in [0, 1] spans several periods.
      const double w = std::pow(1000.0, static_cast<double>(k) / std::max<std::size_t>(half - 1, 1));
      out.at(r, k) = static_cast<T>(std::sin(w * t[r]));
      out.at(r, half + k) = static_cast<T>(std::cos(w * t[r]));
    }
  }
  return out;
}

#define WMSYNTH_FM_INSTANTIATE(T)                                                                       \
  template BasicTensor<T> interpolate(const BasicTensor<T>&, const BasicTensor<T>&, double);           \
  template BasicTensor<T> velocity_target(const BasicTensor<T>&, const BasicTensor<T>&);               \
  template struct BasicFMBatch<T>;                                                                      \
  template BasicFMBatch<T> make_batch(BasicTensor<T>, Rng&, const FMConfig&);                           \
  template BasicVar<T> fm_loss(BasicGraph<T>&, const BasicVelocityModel<T>&, const BasicFMBatch<T>&,   \
                               const BasicTensor<T>*);                                                  \
  template BasicTensor<T> timestep_features(std::span<const T>, std::size_t);

WMSYNTH_FM_INSTANTIATE(float)
WMSYNTH_FM_INSTANTIATE(double)

}  // namespace wmsynth::flowmatch
