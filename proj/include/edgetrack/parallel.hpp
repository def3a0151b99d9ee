#pragma once

#include <cstddef>
#include <functional>

namespace edgetrack {

/// Worker count from EDGETRACK_THREADS (unset or 0 = hardware concurrency).
unsigned thread_count();

/// Runs fn(i) for i in [0, n). Each index runs exactly once; order across threads is unspecified.
/// The first exception thrown by any call is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace edgetrack
