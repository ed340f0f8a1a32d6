#pragma once

#include <cstddef>
#include <functional>

namespace attribroi {

// Worker cap from ATTRIBROI_THREADS (0 or unset = hardware concurrency).
std::size_t worker_threads();

// Runs fn(i) for i in [0, count). Work is split into contiguous index
// blocks; results must be written to per-index slots so the outcome is
// independent of scheduling. Falls back to a plain loop for small counts
// or a single worker.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace attribroi
