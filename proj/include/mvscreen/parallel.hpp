#pragma once

#include <cstddef>
#include <functional>

namespace mvscreen {

/// Worker cap from MVSCREEN_THREADS; 1 when unset or invalid.
int worker_threads();

/// Runs fn(i) for i in [0, n) on up to worker_threads() threads. Callers
/// write results into per-index slots so the outcome is order independent.
/// The first exception thrown by any task is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace mvscreen
