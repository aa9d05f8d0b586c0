#include "wmsynth/numerics/rng.hpp"

namespace wmsynth::numerics {

namespace {

std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix(base);
  for (auto p : path) h = mix(h ^ mix(p));
  return h;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                          std::initializer_list<std::uint64_t> path) {
  // FNV-1a over the tag, then the numeric path.
  std::uint64_t t = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) t = (t ^ c) * 0x100000001b3ULL;
  std::uint64_t h = mix(base ^ mix(t));
  for (auto p : path) h = mix(h ^ mix(p));
  return h;
}

double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

template <typename T>
BasicTensor<T> normal_tensor(Shape shape, Rng& rng, double stddev) {
  BasicTensor<T> t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.data()) v = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
BasicTensor<T> uniform_tensor(Shape shape, Rng& rng, double lo, double hi) {
  BasicTensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.data()) v = static_cast<T>(dist(rng));
  return t;
}

template BasicTensor<float> normal_tensor(Shape, Rng&, double);
template BasicTensor<double> normal_tensor(Shape, Rng&, double);
template BasicTensor<float> uniform_tensor(Shape, Rng&, double, double);
template BasicTensor<double> uniform_tensor(Shape, Rng&, double, double);

}  // namespace wmsynth::numerics
