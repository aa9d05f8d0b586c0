#pragma once

#include <cstddef>
#include <functional>

namespace wmsynth::pipeline {

// Calls fn(i) for every i in [0, n) on at most `workers` threads (0 picks the
// hardware concurrency). fn must only write to slots owned by index i, so the
// result does not depend on scheduling. The exception of the lowest failing
// index is rethrown after all workers finish.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace wmsynth::pipeline
