#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

#include "wmsynth/numerics/tensor.hpp"

namespace wmsynth::numerics {

using Rng = std::mt19937_64;

// Mixes a base seed with a path of identifiers (splitmix64 finalizer per step).
// Pure function: the same inputs always give the same child seed.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path);
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                          std::initializer_list<std::uint64_t> path = {});

double standard_normal(Rng& rng);
double uniform(Rng& rng, double lo, double hi);
std::size_t uniform_index(Rng& rng, std::size_t n);  // in [0, n)

template <typename T>
BasicTensor<T> normal_tensor(Shape shape, Rng& rng, double stddev = 1.0);
template <typename T>
BasicTensor<T> uniform_tensor(Shape shape, Rng& rng, double lo, double hi);

}  // namespace wmsynth::numerics
