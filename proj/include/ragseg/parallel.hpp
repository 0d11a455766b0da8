#pragma once

#include <cstddef>
#include <functional>

namespace ragseg {

/// Worker count to use. `requested` > 0 wins; otherwise the RAGSEG_THREADS
/// environment variable (0 or unset = hardware concurrency).
std::size_t resolve_threads(std::size_t requested = 0);

/// Splits [0, count) into `threads` contiguous ranges and runs `body(begin, end)`
/// on each, blocking until all finish. The first exception thrown is rethrown.
/// Callers write results into pre-sized slots, so output order never depends
/// on scheduling.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace ragseg
