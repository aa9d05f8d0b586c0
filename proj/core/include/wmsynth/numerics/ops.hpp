#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wmsynth/numerics/graph.hpp"

// Differentiable primitives. Every op validates shapes, computes its value
// eagerly, and records a backward closure when the graph is recording.
namespace wmsynth::numerics {

template <typename T> BasicVar<T> matmul(BasicVar<T> a, BasicVar<T> b);   // [M,K]x[K,N]
template <typename T> BasicVar<T> bmm(BasicVar<T> a, BasicVar<T> b);      // [B,M,K]x[B,K,N]
template <typename T> BasicVar<T> transpose(BasicVar<T> a);              // swap last two axes

template <typename T> BasicVar<T> add(BasicVar<T> a, BasicVar<T> b);
template <typename T> BasicVar<T> sub(BasicVar<T> a, BasicVar<T> b);
template <typename T> BasicVar<T> mul(BasicVar<T> a, BasicVar<T> b);
// Broadcast a [D] vector over the leading axes of a [..., D] tensor.
template <typename T> BasicVar<T> add_rowvec(BasicVar<T> a, BasicVar<T> v);
template <typename T> BasicVar<T> mul_rowvec(BasicVar<T> a, BasicVar<T> v);
template <typename T> BasicVar<T> scale(BasicVar<T> a, double c);

template <typename T> BasicVar<T> relu(BasicVar<T> a);
template <typename T> BasicVar<T> gelu(BasicVar<T> a);  // tanh approximation
template <typename T> BasicVar<T> sigmoid(BasicVar<T> a);
template <typename T> BasicVar<T> tanh(BasicVar<T> a);

// Normalizes each row over the last axis to zero mean and unit variance.
template <typename T> BasicVar<T> layer_norm(BasicVar<T> a, double eps = 1e-5);
template <typename T> BasicVar<T> softmax(BasicVar<T> a);  // over the last axis

template <typename T> BasicVar<T> reshape(BasicVar<T> a, Shape shape);
template <typename T> BasicVar<T> concat(const std::vector<BasicVar<T>>& parts, std::size_t axis);
template <typename T> BasicVar<T> slice(BasicVar<T> a, std::size_t axis, std::size_t begin, std::size_t length);
// Inserts a new axis of extent n at `axis` and repeats the input along it.
template <typename T> BasicVar<T> expand(BasicVar<T> a, std::size_t axis, std::size_t n);
// Gathers rows of a [V,D] table.
template <typename T> BasicVar<T> embedding(BasicVar<T> table, std::span<const std::size_t> indices);

template <typename T> BasicVar<T> sum(BasicVar<T> a);
template <typename T> BasicVar<T> mean(BasicVar<T> a);
template <typename T> BasicVar<T> mse(BasicVar<T> a, BasicVar<T> b);
// sum(mask * (a - b)^2) / sum(mask); mask is a constant with the shape of a.
template <typename T> BasicVar<T> masked_mse(BasicVar<T> a, BasicVar<T> b, const BasicTensor<T>& mask);

template <typename T> BasicVar<T> operator+(BasicVar<T> a, BasicVar<T> b) { return add(a, b); }
template <typename T> BasicVar<T> operator-(BasicVar<T> a, BasicVar<T> b) { return sub(a, b); }
template <typename T> BasicVar<T> operator*(BasicVar<T> a, BasicVar<T> b) { return mul(a, b); }

// Plain (non-recorded) kernel: c += a * b for row-major [M,K] and [K,N].
template <typename T>
void gemm_accumulate(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);

}  // namespace wmsynth::numerics
