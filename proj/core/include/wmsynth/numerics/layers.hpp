#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wmsynth/numerics/graph.hpp"
#include "wmsynth/numerics/rng.hpp"

namespace wmsynth::numerics {

// Named parameters, iterated in name order. References stay valid across
// insertion and removal of other entries.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, Tensor value, bool trainable = true);
  void remove(const std::string& name);
  bool contains(const std::string& name) const { return params_.contains(name); }
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;

  std::map<std::string, Parameter>& items() { return params_; }
  const std::map<std::string, Parameter>& items() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t numel() const;

  void zero_grad();
  // Sets trainable on every parameter whose name starts with `prefix`.
  void set_trainable(const std::string& prefix, bool trainable);

 private:
  std::map<std::string, Parameter> params_;
};

struct LoraConfig {
  std::size_t rank = 8;
  double alpha = 16.0;
};

// y = x W + b, optionally plus (alpha / rank) * (x A) B when a low-rank adapter is attached.
class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, std::string name, std::size_t in, std::size_t out, Rng& rng,
         bool bias = true);

  // x: [..., in] -> [..., out]
  Var forward(Graph& g, ParameterStore& store, Var x) const;

  void attach_adapter(ParameterStore& store, const LoraConfig& cfg, Rng& rng);
  // Folds the adapter into the dense weight and removes the adapter parameters.
  void merge_adapter(ParameterStore& store);
  bool has_adapter() const { return adapter_.has_value(); }
  const std::string& name() const { return name_; }
  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }

 private:
  struct Adapter {
    std::size_t rank;
    double scale;
  };
  std::string name_;
  std::size_t in_ = 0, out_ = 0;
  bool bias_ = true;
  std::optional<Adapter> adapter_;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParameterStore& store, std::string name, std::size_t dim);
  Var forward(Graph& g, ParameterStore& store, Var x) const;

 private:
  std::string name_;
};

class Embedding {
 public:
  Embedding() = default;
  Embedding(ParameterStore& store, std::string name, std::size_t vocab, std::size_t dim, Rng& rng);
  Var forward(Graph& g, ParameterStore& store, std::span<const std::size_t> ids) const;
  std::size_t vocab() const { return vocab_; }

 private:
  std::string name_;
  std::size_t vocab_ = 0;
};

// Stack of Linear layers with GELU between them (none after the last).
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParameterStore& store, const std::string& name, const std::vector<std::size_t>& dims, Rng& rng);
  Var forward(Graph& g, ParameterStore& store, Var x) const;
  std::vector<Linear>& layers() { return layers_; }
  const std::vector<Linear>& layers() const { return layers_; }

 private:
  std::vector<Linear> layers_;
};

}  // namespace wmsynth::numerics
