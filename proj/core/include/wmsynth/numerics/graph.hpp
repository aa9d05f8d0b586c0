#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wmsynth/numerics/tensor.hpp"

namespace wmsynth::numerics {

// A named trainable tensor with its gradient buffer.
template <typename T>
struct BasicParameter {
  std::string name;
  BasicTensor<T> value;
  BasicTensor<T> grad;
  bool trainable = true;

  void zero_grad() { grad = BasicTensor<T>(value.shape()); }
};

using Parameter = BasicParameter<float>;

enum class GradMode { kRecord, kInference };

class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

template <typename T>
class BasicGraph;

// Handle to a node on a graph. Cheap to copy; valid while the graph lives.
template <typename T>
class BasicVar {
 public:
  BasicVar() = default;

  const BasicTensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const { return id_; }
  BasicGraph<T>* graph() const { return graph_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class BasicGraph<T>;
  BasicVar(BasicGraph<T>* g, std::size_t id) : graph_(g), id_(id) {}

  BasicGraph<T>* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Computation tape. Nodes are appended in evaluation order, so the tape is
// topologically sorted by construction and backward walks it in reverse.
template <typename T>
class BasicGraph {
 public:
  using Var = BasicVar<T>;
  using Tensor = BasicTensor<T>;
  // Reads the gradient of `self` and accumulates into the gradients of its inputs.
  using BackwardFn = std::function<void(BasicGraph&, std::size_t self)>;

  explicit BasicGraph(GradMode mode = GradMode::kRecord) : mode_(mode) {}
  BasicGraph(const BasicGraph&) = delete;
  BasicGraph& operator=(const BasicGraph&) = delete;

  bool recording() const { return mode_ == GradMode::kRecord; }

  Var constant(Tensor value);
  // Trainable leaf that owns its value; read its gradient with grad().
  Var variable(Tensor value);
  // Leaf referencing a parameter. Gradients flow into param.grad when the
  // parameter is trainable and the graph records.
  Var parameter(BasicParameter<T>& param);

  void backward(Var loss);

  const Tensor& value(std::size_t id) const;
  const Tensor& grad(Var v) const;
  bool needs_grad(std::size_t id) const { return nodes_.at(id).needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Used by primitive ops.
  Var record(Tensor value, const std::vector<std::size_t>& inputs, BackwardFn fn);
  const Tensor& upstream(std::size_t id) const { return nodes_[id].grad; }
  Tensor& grad_sink(std::size_t id);

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    BasicParameter<T>* param = nullptr;
    Tensor grad;
    bool needs_grad = false;
    BackwardFn backward;
  };

  GradMode mode_;
  std::deque<Node> nodes_;
  bool backward_done_ = false;
};

template <typename T>
const BasicTensor<T>& BasicVar<T>::value() const {
  if (!graph_) throw GraphError("value() on an unbound variable");
  return graph_->value(id_);
}

using Graph = BasicGraph<float>;
using Graph64 = BasicGraph<double>;
using Var = BasicVar<float>;
using Var64 = BasicVar<double>;

}  // namespace wmsynth::numerics
