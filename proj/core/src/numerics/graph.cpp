#include "wmsynth/numerics/graph.hpp"

#include <cmath>
#include <numbers>

#include "wmsynth/numerics/ops.hpp"

namespace wmsynth::numerics {

// ---------------------------------------------------------------------------
// Tape

template <typename T>
BasicVar<T> BasicGraph<T>::constant(Tensor value) {
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  return Var(this, nodes_.size() - 1);
}

template <typename T>
BasicVar<T> BasicGraph<T>::variable(Tensor value) {
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.needs_grad = recording();
  return Var(this, nodes_.size() - 1);
}

template <typename T>
BasicVar<T> BasicGraph<T>::parameter(BasicParameter<T>& param) {
  Node& n = nodes_.emplace_back();
  n.external = &param.value;
  n.param = &param;
  n.needs_grad = recording() && param.trainable;
  if (n.needs_grad) {
    n.backward = [](BasicGraph& g, std::size_t self) {
      Node& node = g.nodes_[self];
      auto& pg = node.param->grad;
      if (pg.shape() != node.external->shape()) pg = Tensor(node.external->shape());
      auto dst = pg.data();
      auto src = node.grad.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    };
  }
  return Var(this, nodes_.size() - 1);
}

template <typename T>
const BasicTensor<T>& BasicGraph<T>::value(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.external ? *n.external : n.value;
}

template <typename T>
const BasicTensor<T>& BasicGraph<T>::grad(Var v) const {
  const Node& n = nodes_.at(v.id());
  if (!backward_done_) throw GraphError("grad() requested before backward()");
  return n.grad;
}

template <typename T>
BasicVar<T> BasicGraph<T>::record(Tensor value, const std::vector<std::size_t>& inputs,
                                  BackwardFn fn) {
  bool needs = false;
  if (recording()) {
    for (auto id : inputs) needs = needs || nodes_.at(id).needs_grad;
  }
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.needs_grad = needs;
  if (needs) n.backward = std::move(fn);
  return Var(this, nodes_.size() - 1);
}

template <typename T>
BasicTensor<T>& BasicGraph<T>::grad_sink(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0 && value(id).size() != 0) n.grad = Tensor(value(id).shape());
  if (n.grad.shape() != value(id).shape()) n.grad = Tensor(value(id).shape());
  return n.grad;
}

template <typename T>
void BasicGraph<T>::backward(Var loss) {
  if (loss.graph() != this) throw GraphError("backward: loss belongs to another graph");
  if (!recording()) throw GraphError("backward: graph was built in inference mode");
  if (backward_done_) throw GraphError("backward: already run on this tape");
  const Tensor& lv = value(loss.id());
  if (lv.size() != 1) {
    throw GraphError("backward: loss must be scalar, got shape " + shape_string(lv.shape()));
  }
  backward_done_ = true;
  if (!nodes_[loss.id()].needs_grad) return;
  grad_sink(loss.id())[0] = T{1};
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || !n.backward || n.grad.size() == 0) continue;
    n.backward(*this, i);
  }
}

template class BasicGraph<float>;
template class BasicGraph<double>;

// ---------------------------------------------------------------------------
// Kernels

template <typename T>
void gemm_accumulate(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template void gemm_accumulate(const float*, const float*, float*, std::size_t, std::size_t, std::size_t);
template void gemm_accumulate(const double*, const double*, double*, std::size_t, std::size_t, std::size_t);

namespace {

template <typename T>
std::vector<T> transposed(const T* src, std::size_t rows, std::size_t cols) {
  std::vector<T> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = src[r * cols + c];
  return out;
}

template <typename T>
void require_same_graph(BasicVar<T> a, BasicVar<T> b, const char* op) {
  if (a.graph() != b.graph() || !a.valid()) {
    throw GraphError(std::string(op) + ": operands belong to different graphs");
  }
}

template <typename T>
void require_same_shape(BasicVar<T> a, BasicVar<T> b, const char* op) {
  require_same_graph(a, b, op);
  if (a.shape() != b.shape()) throw ShapeError(op, a.shape(), b.shape());
}

// Applies f elementwise; df(x, y) gives dy/dx from input and output values.
template <typename T, typename F, typename DF>
BasicVar<T> unary(BasicVar<T> a, F f, DF df) {
  auto& g = *a.graph();
  const auto& x = a.value();
  BasicTensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id();
  return g.record(std::move(y), {ia}, [ia, df](BasicGraph<T>& g, std::size_t self) {
    const auto& dy = g.upstream(self);
    const auto& x = g.value(ia);
    const auto& y = g.value(self);
    auto& dx = g.grad_sink(ia);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * df(x[i], y[i]);
  });
}

struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit a;
  for (std::size_t i = 0; i < axis; ++i) a.outer *= s[i];
  a.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) a.inner *= s[i];
  return a;
}

}  // namespace

// ---------------------------------------------------------------------------
// Linear algebra

template <typename T>
BasicVar<T> matmul(BasicVar<T> a, BasicVar<T> b) {
  require_same_graph(a, b, "matmul");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw ShapeError("matmul", av.shape(), bv.shape());
  }
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  BasicTensor<T> c({m, n});
  gemm_accumulate(av.data().data(), bv.data().data(), c.data().data(), m, k, n);
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph()->record(std::move(c), {ia, ib}, [ia, ib, m, k, n](BasicGraph<T>& g, std::size_t self) {
    const auto& dc = g.upstream(self);
    if (g.needs_grad(ia)) {
      auto bt = transposed(g.value(ib).data().data(), k, n);
      gemm_accumulate(dc.data().data(), bt.data(), g.grad_sink(ia).data().data(), m, n, k);
    }
    if (g.needs_grad(ib)) {
      auto at = transposed(g.value(ia).data().data(), m, k);
      gemm_accumulate(at.data(), dc.data().data(), g.grad_sink(ib).data().data(), k, m, n);
    }
  });
}

template <typename T>
BasicVar<T> bmm(BasicVar<T> a, BasicVar<T> b) {
  require_same_graph(a, b, "bmm");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(1)) {
    throw ShapeError("bmm", av.shape(), bv.shape());
  }
  const std::size_t bs = av.dim(0), m = av.dim(1), k = av.dim(2), n = bv.dim(2);
  BasicTensor<T> c({bs, m, n});
  for (std::size_t i = 0; i < bs; ++i) {
    gemm_accumulate(av.data().data() + i * m * k, bv.data().data() + i * k * n,
                    c.data().data() + i * m * n, m, k, n);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph()->record(std::move(c), {ia, ib}, [=](BasicGraph<T>& g, std::size_t self) {
    const auto& dc = g.upstream(self);
    const auto& av = g.value(ia);
    const auto& bv = g.value(ib);
    for (std::size_t i = 0; i < bs; ++i) {
      const T* dci = dc.data().data() + i * m * n;
      if (g.needs_grad(ia)) {
        auto bt = transposed(bv.data().data() + i * k * n, k, n);
        gemm_accumulate(dci, bt.data(), g.grad_sink(ia).data().data() + i * m * k, m, n, k);
      }
      if (g.needs_grad(ib)) {
        auto at = transposed(av.data().data() + i * m * k, m, k);
        gemm_accumulate(at.data(), dci, g.grad_sink(ib).data().data() + i * k * n, k, m, n);
      }
    }
  });
}

template <typename T>
BasicVar<T> transpose(BasicVar<T> a) {
  const auto& av = a.value();
  if (av.rank() < 2) throw ShapeError("transpose requires rank >= 2, got " + shape_string(av.shape()));
  const std::size_t r = av.rank();
  const std::size_t rows = av.dim(r - 2), cols = av.dim(r - 1);
  const std::size_t batch = av.size() / (rows * cols);
  Shape out_shape = av.shape();
  std::swap(out_shape[r - 2], out_shape[r - 1]);
  BasicTensor<T> y(out_shape);
  for (std::size_t b = 0; b < batch; ++b) {
    auto t = transposed(av.data().data() + b * rows * cols, rows, cols);
    std::copy(t.begin(), t.end(), y.data().begin() + b * rows * cols);
  }
  const std::size_t ia = a.id();
  return a.graph()->record(std::move(y), {ia}, [=](BasicGraph<T>& g, std::size_t self) {
    const auto& dy = g.upstream(self);
    auto& dx = g.grad_sink(ia);
    for (std::size_t b = 0; b < batch; ++b) {
      auto t = transposed(dy.data().data() + b * rows * cols, cols, rows);
      for (std::size_t i = 0; i < t.size(); ++i) dx[b * rows * cols + i] += t[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
BasicVar<T> add(BasicVar<T> a, BasicVar<T> b) {
  require_same_shape(a, b, "add");
  const auto& av = a.value();
  const auto& bv = b.value();
  BasicTensor<T> y(av.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph()->record(std::move(y), {ia, ib}, [ia, ib](BasicGraph<T>& g, std::size_t self) {
    const auto& dy = g.upstream(self);
    for (auto id : {ia, ib}) {
      if (!g.needs_grad(id)) continue;
      auto& dx = g.grad_sink(id);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i];
    }
  });
}

template <typename T>
BasicVar<T> sub(BasicVar<T> a, BasicVar<T> b) {
  require_same_shape(a, b, "sub");
  const auto& av = a.value();
  const auto& bv = b.value();
  BasicTensor<T> y(av.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] - bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph()->record(std::move(y), {ia, ib}, [ia, ib](BasicGraph<T>& g, std::size_t self) {
    const auto& dy = g.upstream(self);
    if (g.needs_grad(ia)) {
      auto& dx = g.grad_sink(ia);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i];
    }
    if (g.needs_grad(ib)) {
      auto& dx = g.grad_sink(ib);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] -= dy[i];
    }
  });
}

template <typename T>
BasicVar<T> mul(BasicVar<T> a, BasicVar<T> b) {
  require_same_shape(a, b, "mul");
  const auto& av = a.value();
  const auto& bv = b.value();
  BasicTensor<T> y(av.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph()->record(std::move(y), {ia, ib}, [ia, ib](BasicGraph<T>& g, std::size_t self) {
    const auto& dy = g.upstream(self);
    const auto& av = g.value(ia);
    const auto& bv = g.value(ib);
    if (g.needs_grad(ia)) {
      auto& dx = g.grad_sink(ia);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * bv[i];
    }
    if (g.needs_grad(ib)) {
      auto& dx = g.grad_sink(ib);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * av[i];
    }
  });
}

template <typename T>
BasicVar<T> add_rowvec(BasicVar<T> a, BasicVar<T> v) {
  require_same_graph(a, v, "add_rowvec");
  const auto& av = a.value();
  const auto& vv = v.value();
  if (av.rank() < 1 || vv.rank() != 1 || av.shape().back() != vv.dim(0)) {
    throw ShapeError("add_rowvec", av.shape(), vv.shape());
  }
  const std::size_t d = vv.dim(0), rows = av.size() / d;
  BasicTensor<T> y(av.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < d; ++j) y[r * d + j] = av[r * d + j] + vv[j];
  const std::size_t ia = a.id(), iv = v.id();
  return a.graph()->record(std::move(y), {ia, iv}, [=](BasicGraph<T>& g, std::size_t self) {
    const auto& dy = g.upstream(self);
    if (g.needs_grad(ia)) {
      auto& dx = g.grad_sink(ia);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i];
    }
    if (g.needs_grad(iv)) {
      auto& dv = g.grad_sink(iv);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < d; ++j) dv[j] += dy[r * d + j];
    }
  });
}

template <typename T>
BasicVar<T> mul_rowvec(BasicVar<T> a, BasicVar<T> v) {
  require_same_graph(a, v, "mul_rowvec");
  const auto& av = a.value();
  const auto& vv = v.value();
  if (av.rank() < 1 || vv.rank() != 1 || av.shape().back() != vv.dim(0)) {
    throw ShapeError("mul_rowvec", av.shape(), vv.shape());
  }
  const std::size_t d = vv.dim(0), rows = av.size() / d;
  BasicTensor<T> y(av.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < d; ++j) y[r * d + j] = av[r * d + j] * vv[j];
  const std::size_t ia = a.id(), iv = v.id();
  return a.graph()->record(std::move(y), {ia, iv}, [=](BasicGraph<T>& g, std::size_t self) {
    const auto& dy = g.upstream(self);
    const auto& av = g.value(ia);
    const auto& vv = g.value(iv);
    if (g.needs_grad(ia)) {
      auto& dx = g.grad_sink(ia);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < d; ++j) dx[r * d + j] += dy[r * d + j] * vv[j];
    }
    if (g.needs_grad(iv)) {
      auto& dv = g.grad_sink(iv);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < d; ++j) dv[j] += dy[r * d + j] * av[r * d + j];
    }
  });
}

template <typename T>
BasicVar<T> scale(BasicVar<T> a, double c) {
  const T k = static_cast<T>(c);
  return unary(a, [k](T x) { return k * x; }, [k](T, T) { return k; });
}

template <typename T>
BasicVar<T> relu(BasicVar<T> a) {
  return unary(a, [](T x) { return x > T{0} ? x : T{0}; },
               [](T x, T) { return x > T{0} ? T{1} : T{0}; });
}

template <typename T>
BasicVar<T> gelu(BasicVar<T> a) {
  constexpr T kC = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  constexpr T kA = static_cast<T>(0.044715);
  return unary(
      a,
      [](T x) { return T{0.5} * x * (T{1} + std::tanh(kC * (x + kA * x * x * x))); },
      [](T x, T) {
        const T u = kC * (x + kA * x * x * x);
        const T th = std::tanh(u);
        const T du = kC * (T{1} + T{3} * kA * x * x);
        return T{0.5} * (T{1} + th) + T{0.5} * x * (T{1} - th * th) * du;
      });
}

template <typename T>
BasicVar<T> sigmoid(BasicVar<T> a) {
  return unary(a, [](T x) { return T{1} / (T{1} + std::exp(-x)); },
               [](T, T y) { return y * (T{1} - y); });
}

template <typename T>
BasicVar<T> tanh(BasicVar<T> a) {
  return unary(a, [](T x) { return std::tanh(x); }, [](T, T y) { return T{1} - y * y; });
}

// ---------------------------------------------------------------------------
// Row-wise normalizations

template <typename T>
BasicVar<T> layer_norm(BasicVar<T> a, double eps) {
  const auto& av = a.value();
  if (av.rank() < 1 || av.shape().back() == 0) throw ShapeError("layer_norm on shape " + shape_string(av.shape()));
  const std::size_t d = av.shape().back(), rows = av.size() / d;
  BasicTensor<T> y(av.shape());
  std::vector<T> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = av.data().data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += x[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (x[j] - mu) * (x[j] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = static_cast<T>(is);
    for (std::size_t j = 0; j < d; ++j) y[r * d + j] = static_cast<T>((x[j] - mu) * is);
  }
  const std::size_t ia = a.id();
  return a.graph()->record(std::move(y), {ia}, [=](BasicGraph<T>& g, std::size_t self) {
    const auto& dy = g.upstream(self);
    const auto& yv = g.value(self);
    auto& dx = g.grad_sink(ia);
    for (std::size_t r = 0; r < rows; ++r) {
      double mdy = 0.0, mdyy = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        mdy += dy[r * d + j];
        mdyy += static_cast<double>(dy[r * d + j]) * yv[r * d + j];
      }
      mdy /= static_cast<double>(d);
      mdyy /= static_cast<double>(d);
      for (std::size_t j = 0; j < d; ++j) {
        dx[r * d + j] += static_cast<T>(inv_std[r] * (dy[r * d + j] - mdy - yv[r * d + j] * mdyy));
      }
    }
  });
}

template <typename T>
BasicVar<T> softmax(BasicVar<T> a) {
  const auto& av = a.value();
  if (av.rank() < 1 || av.shape().back() == 0) throw ShapeError("softmax on shape " + shape_string(av.shape()));
  const std::size_t d = av.shape().back(), rows = av.size() / d;
  BasicTensor<T> y(av.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = av.data().data() + r * d;
    T mx = x[0];
    for (std::size_t j = 1; j < d; ++j) mx = std::max(mx, x[j]);
    T s = 0;
    for (std::size_t j = 0; j < d; ++j) {
      y[r * d + j] = std::exp(x[j] - mx);
      s += y[r * d + j];
    }
    for (std::size_t j = 0; j < d; ++j) y[r * d + j] /= s;
  }
  const std::size_t ia = a.id();
  return a.graph()->record(std::move(y), {ia}, [=](BasicGraph<T>& g, std::size_t self) {
    const auto& dy = g.upstream(self);
    const auto& yv = g.value(self);
    auto& dx = g.grad_sink(ia);
    for (std::size_t r = 0; r < rows; ++r) {
      T dot = 0;
      for (std::size_t j = 0; j < d; ++j) dot += dy[r * d + j] * yv[r * d + j];
      for (std::size_t j = 0; j < d; ++j) dx[r * d + j] += yv[r * d + j] * (dy[r * d + j] - dot);
    }
  });
}

// ---------------------------------------------------------------------------
// Shape manipulation

template <typename T>
BasicVar<T> reshape(BasicVar<T> a, Shape shape) {
  const auto& av = a.value();
  if (shape_numel(shape) != av.size()) throw ShapeError("reshape", av.shape(), shape);
  BasicTensor<T> y(std::move(shape), av.storage());
  const std::size_t ia = a.id();
  return a.graph()->record(std::move(y), {ia}, [ia](BasicGraph<T>& g, std::size_t self) {
    const auto& dy = g.upstream(self);
    auto& dx = g.grad_sink(ia);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i];
  });
}

template <typename T>
BasicVar<T> concat(const std::vector<BasicVar<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw ShapeError("concat axis out of range for " + shape_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> ids, extents;
  for (const auto& p : parts) {
    require_same_graph(parts[0], p, "concat");
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
    if (!ok) throw ShapeError("concat", first, s);
    out_shape[axis] += s[axis];
    ids.push_back(p.id());
    extents.push_back(s[axis]);
  }
  const AxisSplit sp = split_at(out_shape, axis);
  BasicTensor<T> y(out_shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& pv = parts[k].value();
    const std::size_t chunk = extents[k] * sp.inner;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      std::copy_n(pv.data().begin() + o * chunk, chunk,
                  y.data().begin() + o * sp.extent * sp.inner + offset * sp.inner);
    }
    offset += extents[k];
  }
  return parts[0].graph()->record(std::move(y), ids, [=](BasicGraph<T>& g, std::size_t self) {
    const auto& dy = g.upstream(self);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const std::size_t chunk = extents[k] * sp.inner;
      if (g.needs_grad(ids[k])) {
        auto& dx = g.grad_sink(ids[k]);
        for (std::size_t o = 0; o < sp.outer; ++o)
          for (std::size_t i = 0; i < chunk; ++i)
            dx[o * chunk + i] += dy[o * sp.extent * sp.inner + offset * sp.inner + i];
      }
      offset += extents[k];
    }
  });
}

template <typename T>
BasicVar<T> slice(BasicVar<T> a, std::size_t axis, std::size_t begin, std::size_t length) {
  const auto& av = a.value();
  if (axis >= av.rank() || begin + length > av.dim(axis)) {
    throw ShapeError("slice [" + std::to_string(begin) + ", +" + std::to_string(length) +
                     ") on axis " + std::to_string(axis) + " of " + shape_string(av.shape()));
  }
  const AxisSplit sp = split_at(av.shape(), axis);
  Shape out_shape = av.shape();
  out_shape[axis] = length;
  BasicTensor<T> y(out_shape);
  const std::size_t chunk = length * sp.inner;
  for (std::size_t o = 0; o < sp.outer; ++o) {
    std::copy_n(av.data().begin() + o * sp.extent * sp.inner + begin * sp.inner, chunk,
                y.data().begin() + o * chunk);
  }
  const std::size_t ia = a.id();
  return a.graph()->record(std::move(y), {ia}, [=](BasicGraph<T>& g, std::size_t self) {
    const auto& dy = g.upstream(self);
    auto& dx = g.grad_sink(ia);
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t i = 0; i < chunk; ++i)
        dx[o * sp.extent * sp.inner + begin * sp.inner + i] += dy[o * chunk + i];
  });
}

template <typename T>
BasicVar<T> expand(BasicVar<T> a, std::size_t axis, std::size_t n) {
  const auto& av = a.value();
  if (axis > av.rank()) throw ShapeError("expand axis out of range for " + shape_string(av.shape()));
  Shape out_shape = av.shape();
  out_shape.insert(out_shape.begin() + static_cast<std::ptrdiff_t>(axis), n);
  const AxisSplit sp = split_at(out_shape, axis);
  BasicTensor<T> y(out_shape);
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t r = 0; r < n; ++r)
      std::copy_n(av.data().begin() + o * sp.inner, sp.inner, y.data().begin() + (o * n + r) * sp.inner);
  const std::size_t ia = a.id();
  return a.graph()->record(std::move(y), {ia}, [=](BasicGraph<T>& g, std::size_t self) {
    const auto& dy = g.upstream(self);
    auto& dx = g.grad_sink(ia);
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t i = 0; i < sp.inner; ++i) dx[o * sp.inner + i] += dy[(o * n + r) * sp.inner + i];
  });
}

template <typename T>
BasicVar<T> embedding(BasicVar<T> table, std::span<const std::size_t> indices) {
  const auto& tv = table.value();
  if (tv.rank() != 2) throw ShapeError("embedding table must be rank 2, got " + shape_string(tv.shape()));
  const std::size_t vocab = tv.dim(0), d = tv.dim(1);
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  BasicTensor<T> y({idx.size(), d});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= vocab) {
      throw ShapeError("embedding index " + std::to_string(idx[r]) + " out of range for table " +
                       shape_string(tv.shape()));
    }
    std::copy_n(tv.data().begin() + idx[r] * d, d, y.data().begin() + r * d);
  }
  const std::size_t it = table.id();
  return table.graph()->record(std::move(y), {it}, [=](BasicGraph<T>& g, std::size_t self) {
    const auto& dy = g.upstream(self);
    auto& dt = g.grad_sink(it);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < d; ++j) dt[idx[r] * d + j] += dy[r * d + j];
  });
}

// ---------------------------------------------------------------------------
// Reductions (fixed left-to-right order, double accumulators)

template <typename T>
BasicVar<T> sum(BasicVar<T> a) {
  const auto& av = a.value();
  double s = 0.0;
  for (T v : av.data()) s += v;
  const std::size_t ia = a.id();
  return a.graph()->record(BasicTensor<T>::scalar(static_cast<T>(s)), {ia},
                           [ia](BasicGraph<T>& g, std::size_t self) {
                             const T dy = g.upstream(self)[0];
                             auto& dx = g.grad_sink(ia);
                             for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy;
                           });
}

template <typename T>
BasicVar<T> mean(BasicVar<T> a) {
  const auto& av = a.value();
  if (av.size() == 0) throw ShapeError("mean of empty tensor");
  double s = 0.0;
  for (T v : av.data()) s += v;
  const std::size_t ia = a.id();
  const double inv_n = 1.0 / static_cast<double>(av.size());
  return a.graph()->record(BasicTensor<T>::scalar(static_cast<T>(s * inv_n)), {ia},
                           [ia, inv_n](BasicGraph<T>& g, std::size_t self) {
                             const T dy = static_cast<T>(g.upstream(self)[0] * inv_n);
                             auto& dx = g.grad_sink(ia);
                             for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy;
                           });
}

template <typename T>
BasicVar<T> mse(BasicVar<T> a, BasicVar<T> b) {
  require_same_shape(a, b, "mse");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.size() == 0) throw ShapeError("mse of empty tensors");
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = static_cast<double>(av[i]) - bv[i];
    s += d * d;
  }
  const double inv_n = 1.0 / static_cast<double>(av.size());
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph()->record(BasicTensor<T>::scalar(static_cast<T>(s * inv_n)), {ia, ib},
                           [=](BasicGraph<T>& g, std::size_t self) {
                             const double dy = g.upstream(self)[0];
                             const auto& av = g.value(ia);
                             const auto& bv = g.value(ib);
                             const double k = 2.0 * dy * inv_n;
                             if (g.needs_grad(ia)) {
                               auto& dx = g.grad_sink(ia);
                               for (std::size_t i = 0; i < dx.size(); ++i)
                                 dx[i] += static_cast<T>(k * (av[i] - bv[i]));
                             }
                             if (g.needs_grad(ib)) {
                               auto& dx = g.grad_sink(ib);
                               for (std::size_t i = 0; i < dx.size(); ++i)
                                 dx[i] -= static_cast<T>(k * (av[i] - bv[i]));
                             }
                           });
}

template <typename T>
BasicVar<T> masked_mse(BasicVar<T> a, BasicVar<T> b, const BasicTensor<T>& mask) {
  require_same_shape(a, b, "masked_mse");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (mask.shape() != av.shape()) throw ShapeError("masked_mse mask", av.shape(), mask.shape());
  double s = 0.0, w = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = static_cast<double>(av[i]) - bv[i];
    s += mask[i] * d * d;
    w += mask[i];
  }
  if (w <= 0.0) throw ShapeError("masked_mse: mask has no positive weight");
  const double inv_w = 1.0 / w;
  const std::size_t ia = a.id(), ib = b.id();
  BasicTensor<T> m = mask;
  return a.graph()->record(BasicTensor<T>::scalar(static_cast<T>(s * inv_w)), {ia, ib},
                           [=](BasicGraph<T>& g, std::size_t self) {
                             const double dy = g.upstream(self)[0];
                             const auto& av = g.value(ia);
                             const auto& bv = g.value(ib);
                             const double k = 2.0 * dy * inv_w;
                             if (g.needs_grad(ia)) {
                               auto& dx = g.grad_sink(ia);
                               for (std::size_t i = 0; i < dx.size(); ++i)
                                 dx[i] += static_cast<T>(k * m[i] * (av[i] - bv[i]));
                             }
                             if (g.needs_grad(ib)) {
                               auto& dx = g.grad_sink(ib);
                               for (std::size_t i = 0; i < dx.size(); ++i)
                                 dx[i] -= static_cast<T>(k * m[i] * (av[i] - bv[i]));
                             }
                           });
}

#define WMSYNTH_INSTANTIATE_OPS(T)                                                        \
  template BasicVar<T> matmul(BasicVar<T>, BasicVar<T>);                                  \
  template BasicVar<T> bmm(BasicVar<T>, BasicVar<T>);                                     \
  template BasicVar<T> transpose(BasicVar<T>);                                            \
  template BasicVar<T> add(BasicVar<T>, BasicVar<T>);                                     \
  template BasicVar<T> sub(BasicVar<T>, BasicVar<T>);                                     \
  template BasicVar<T> mul(BasicVar<T>, BasicVar<T>);                                     \
  template BasicVar<T> add_rowvec(BasicVar<T>, BasicVar<T>);                              \
  template BasicVar<T> mul_rowvec(BasicVar<T>, BasicVar<T>);                              \
  template BasicVar<T> scale(BasicVar<T>, double);                                        \
  template BasicVar<T> relu(BasicVar<T>);                                                 \
  template BasicVar<T> gelu(BasicVar<T>);                                                 \
  template BasicVar<T> sigmoid(BasicVar<T>);                                              \
  template BasicVar<T> tanh(BasicVar<T>);                                                 \
  template BasicVar<T> layer_norm(BasicVar<T>, double);                                   \
  template BasicVar<T> softmax(BasicVar<T>);                                              \
  template BasicVar<T> reshape(BasicVar<T>, Shape);                                       \
  template BasicVar<T> concat(const std::vector<BasicVar<T>>&, std::size_t);              \
  template BasicVar<T> slice(BasicVar<T>, std::size_t, std::size_t, std::size_t);         \
  template BasicVar<T> expand(BasicVar<T>, std::size_t, std::size_t);                     \
  template BasicVar<T> embedding(BasicVar<T>, std::span<const std::size_t>);              \
  template BasicVar<T> sum(BasicVar<T>);                                                  \
  template BasicVar<T> mean(BasicVar<T>);                                                 \
  template BasicVar<T> mse(BasicVar<T>, BasicVar<T>);                                     \
  template BasicVar<T> masked_mse(BasicVar<T>, BasicVar<T>, const BasicTensor<T>&);

WMSYNTH_INSTANTIATE_OPS(float)
WMSYNTH_INSTANTIATE_OPS(double)

}  // namespace wmsynth::numerics
