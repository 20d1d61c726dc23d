#pragma once

#include <cstddef>
#include <functional>

namespace gsreg {

/// Worker count used by the renderer and other parallel loops (default: hardware threads).
void set_num_threads(int threads);
int num_threads();

/**
 * Splits [0, n) into `num_threads()` contiguous chunks and runs
 * fn(begin, end, worker) on each. The partition depends only on n and the
 * thread count, so per-worker partial results reduced in worker order are
 * reproducible.
 */
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t, int)>& fn);

}  // namespace gsreg
