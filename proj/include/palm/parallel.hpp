#pragma once

#include <cstddef>
#include <functional>

namespace palm {

/// Worker cap shared by every parallel region. Defaults to the hardware
/// concurrency; values below 1 are treated as 1.
void set_thread_count(int n);
int thread_count();

/// Calls body(i) for i in [0, n), split into contiguous chunks across at most
/// thread_count() threads. Each index is visited exactly once, so results
/// written to per-index slots do not depend on the thread count. The first
/// exception thrown by any worker is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)> &body);

} // namespace palm
