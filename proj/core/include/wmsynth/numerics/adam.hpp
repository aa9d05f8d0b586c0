#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

#include "wmsynth/numerics/layers.hpp"

namespace wmsynth::numerics {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(const std::string& param)
      : std::runtime_error("non-finite gradient in parameter '" + param + "'"), param_(param) {}
  const std::string& parameter() const { return param_; }

 private:
  std::string param_;
};

// Adam with bias correction. Moment buffers are keyed by parameter name and
// created lazily with the parameter's shape.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  // Updates every trainable parameter in `store` from its gradient buffer.
  // All gradients are validated before any parameter is touched.
  void step(ParameterStore& store);

  std::uint64_t step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }
  void set_learning_rate(double lr) { cfg_.learning_rate = lr; }

  const Tensor& first_moment(const std::string& name) const { return moments_.at(name).m; }
  const Tensor& second_moment(const std::string& name) const { return moments_.at(name).v; }

 private:
  struct Moments {
    Tensor m, v;
  };
  AdamConfig cfg_;
  std::uint64_t step_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace wmsynth::numerics
