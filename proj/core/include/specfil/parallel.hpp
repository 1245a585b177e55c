#pragma once

#include <cstddef>
#include <functional>

namespace specfil {

/// Worker cap: SPECFIL_THREADS if set (>=1), else hardware concurrency.
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) on up to worker_count() threads. Tasks must
/// write only to their own slot; callers reduce the slots afterwards in a
/// fixed order, which keeps results bit-reproducible. Exceptions from tasks
/// are rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace specfil
