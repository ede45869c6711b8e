#pragma once

#include <cstddef>
#include <functional>

namespace dga {

// Worker cap: DGA_THREADS when set to a positive integer, else the hardware
// concurrency (at least 1).
std::size_t worker_count();

// Runs fn(i) for i in [0, n) on up to worker_count() threads using contiguous
// static chunks. The first exception thrown by any task is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace dga
