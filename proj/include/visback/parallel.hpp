#pragma once

#include <cstddef>
#include <functional>

namespace visback {

/// Worker count: VISBACK_THREADS when set to a positive integer, else hardware concurrency.
int thread_count();

/// Calls fn(i) for i in [0, n). Work is split into contiguous chunks; callers
/// write results by index so the outcome does not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace visback
