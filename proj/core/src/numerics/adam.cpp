#include "wmsynth/numerics/adam.hpp"

#include <cmath>

namespace wmsynth::numerics {

void Adam::step(ParameterStore& store) {
  for (auto& [name, p] : store.items()) {
    if (!p.trainable) continue;
    if (p.grad.size() != 0 && p.grad.shape() != p.value.shape()) {
      throw ShapeError("adam gradient for '" + name + "'", p.grad.shape(), p.value.shape());
    }
    if (!all_finite(p.grad)) throw NonFiniteGradient(name);
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (auto& [name, p] : store.items()) {
    if (!p.trainable) continue;
    auto [it, inserted] = moments_.try_emplace(name);
    Moments& mo = it->second;
    if (inserted || mo.m.shape() != p.value.shape()) {
      mo.m = Tensor(p.value.shape());
      mo.v = Tensor(p.value.shape());
    }
    const bool has_grad = p.grad.size() == p.value.size();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = has_grad ? p.grad[i] : 0.0;
      const double m = cfg_.beta1 * mo.m[i] + (1.0 - cfg_.beta1) * g;
      const double v = cfg_.beta2 * mo.v[i] + (1.0 - cfg_.beta2) * g * g;
      mo.m[i] = static_cast<float>(m);
      mo.v[i] = static_cast<float>(v);
      const double update = cfg_.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + cfg_.epsilon);
      p.value[i] = static_cast<float>(p.value[i] - update);
    }
  }
}

}  // namespace wmsynth::numerics
