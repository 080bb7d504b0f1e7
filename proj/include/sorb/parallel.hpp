#pragma once

#include <cstddef>
#include <functional>

namespace sorb {

// Worker count: SORB_THREADS if set and positive, else hardware concurrency.
int worker_count();

// Calls fn(i) for i in [0, n) across up to worker_count() threads. Chunks are
// contiguous, so results written by index are independent of scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace sorb
