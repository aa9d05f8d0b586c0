#include "wmsynth/numerics/layers.hpp"

#include <cmath>

#include "wmsynth/numerics/ops.hpp"

namespace wmsynth::numerics {

Parameter& ParameterStore::add(const std::string& name, Tensor value, bool trainable) {
  if (params_.contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  Parameter p;
  p.name = name;
  p.grad = Tensor(value.shape());
  p.value = std::move(value);
  p.trainable = trainable;
  return params_.emplace(name, std::move(p)).first->second;
}

void ParameterStore::remove(const std::string& name) { params_.erase(name); }

Parameter& ParameterStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

const Parameter& ParameterStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParameterStore::numel() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p.value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [_, p] : params_) {
    if (p.grad.shape() != p.value.shape()) {
      p.grad = Tensor(p.value.shape());
    } else {
      p.grad.fill(0.0f);
    }
  }
}

void ParameterStore::set_trainable(const std::string& prefix, bool trainable) {
  for (auto& [name, p] : params_) {
    if (name.starts_with(prefix)) p.trainable = trainable;
  }
}

Linear::Linear(ParameterStore& store, std::string name, std::size_t in, std::size_t out, Rng& rng,
               bool bias)
    : name_(std::move(name)), in_(in), out_(out), bias_(bias) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  store.add(name_ + ".weight", uniform_tensor<float>({in, out}, rng, -bound, bound));
  if (bias_) store.add(name_ + ".bias", Tensor({out}));
}

Var Linear::forward(Graph& g, ParameterStore& store, Var x) const {
  const Shape in_shape = x.shape();
  if (in_shape.empty() || in_shape.back() != in_) {
    throw ShapeError(name_ + ": input", in_shape, Shape{in_, out_});
  }
  const std::size_t rows = x.value().size() / in_;
  Var x2 = in_shape.size() == 2 ? x : reshape(x, {rows, in_});
  Var y = matmul(x2, g.parameter(store.at(name_ + ".weight")));
  if (adapter_) {
    Var low = matmul(x2, g.parameter(store.at(name_ + ".lora_a")));
    Var delta = matmul(low, g.parameter(store.at(name_ + ".lora_b")));
    y = add(y, scale(delta, adapter_->scale));
  }
  if (bias_) y = add_rowvec(y, g.parameter(store.at(name_ + ".bias")));
  if (in_shape.size() == 2) return y;
  Shape out_shape = in_shape;
  out_shape.back() = out_;
  return reshape(y, out_shape);
}

void Linear::attach_adapter(ParameterStore& store, const LoraConfig& cfg, Rng& rng) {
  if (cfg.rank < 1) throw std::invalid_argument(name_ + ": adapter rank must be >= 1");
  if (adapter_) throw std::logic_error(name_ + ": adapter already attached");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
  store.add(name_ + ".lora_a", uniform_tensor<float>({in_, cfg.rank}, rng, -bound, bound));
  store.add(name_ + ".lora_b", Tensor({cfg.rank, out_}));
  adapter_ = Adapter{cfg.rank, cfg.alpha / static_cast<double>(cfg.rank)};
}

void Linear::merge_adapter(ParameterStore& store) {
  if (!adapter_) return;
  const auto& a = store.at(name_ + ".lora_a").value;
  const auto& b = store.at(name_ + ".lora_b").value;
  Tensor delta({in_, out_});
  gemm_accumulate(a.data().data(), b.data().data(), delta.data().data(), in_, adapter_->rank, out_);
  auto& w = store.at(name_ + ".weight").value;
  const float s = static_cast<float>(adapter_->scale);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] += s * delta[i];
  store.remove(name_ + ".lora_a");
  store.remove(name_ + ".lora_b");
  adapter_.reset();
}

LayerNorm::LayerNorm(ParameterStore& store, std::string name, std::size_t dim) : name_(std::move(name)) {
  store.add(name_ + ".gamma", Tensor({dim}, 1.0f));
  store.add(name_ + ".beta", Tensor({dim}));
}

Var LayerNorm::forward(Graph& g, ParameterStore& store, Var x) const {
  Var y = layer_norm(x);
  y = mul_rowvec(y, g.parameter(store.at(name_ + ".gamma")));
  return add_rowvec(y, g.parameter(store.at(name_ + ".beta")));
}

Embedding::Embedding(ParameterStore& store, std::string name, std::size_t vocab, std::size_t dim, Rng& rng)
    : name_(std::move(name)), vocab_(vocab) {
  store.add(name_ + ".table", normal_tensor<float>({vocab, dim}, rng, 1.0));
}

Var Embedding::forward(Graph& g, ParameterStore& store, std::span<const std::size_t> ids) const {
  return embedding(g.parameter(store.at(name_ + ".table")), ids);
}

Mlp::Mlp(ParameterStore& store, const std::string& name, const std::vector<std::size_t>& dims, Rng& rng) {
  if (dims.size() < 2) throw std::invalid_argument(name + ": an MLP needs at least input and output sizes");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    layers_.emplace_back(store, name + "." + std::to_string(i), dims[i], dims[i + 1], rng);
  }
}

Var Mlp::forward(Graph& g, ParameterStore& store, Var x) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i].forward(g, store, x);
    if (i + 1 < layers_.size()) x = gelu(x);
  }
  return x;
}

}  // namespace wmsynth::numerics
