#pragma once

#include <cstddef>
#include <functional>

namespace lipspline {

/// Worker cap: LIPSPLINE_THREADS when set to a positive integer, else the hardware concurrency.
std::size_t thread_limit();

/// Runs fn(0) ... fn(count - 1) on up to thread_limit() threads. The first
/// exception thrown by any task is rethrown after all workers finish.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace lipspline
