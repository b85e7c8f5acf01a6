#pragma once

#include <cstddef>
#include <functional>

namespace modalsav {

/// Worker count from MODALSAV_WORKERS, defaulting to the hardware concurrency.
std::size_t worker_count();

/// Calls fn(index, worker) for index in [0, count) on up to `workers` threads.
/// Each worker id in [0, workers) is used by one thread at a time, so callers
/// can index per-worker scratch space by it. Exceptions are rethrown after all
/// workers have joined (the one from the lowest index wins).
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t index, std::size_t worker)>& fn);

}  // namespace modalsav
