#pragma once

#include <cstddef>
#include <functional>

namespace fedprune {

/// Worker cap from FPSIM_THREADS; hardware concurrency when unset or invalid.
std::size_t default_thread_count();

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index runs
/// exactly once; callers write results into per-index slots so the outcome
/// does not depend on scheduling. The first exception thrown is rethrown.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace fedprune
