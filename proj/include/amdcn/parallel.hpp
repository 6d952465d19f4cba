#pragma once

#include <cstdint>
#include <functional>

namespace amdcn {

// Global cap on worker threads (default: hardware concurrency).
void set_max_threads(int n);
int max_threads();

// Runs fn(i) for i in [0, n). Work is split into contiguous index blocks,
// one block per thread, so every index is processed by exactly one thread
// in ascending order; results are therefore identical for any thread count
// as long as distinct indices touch disjoint state.
//
// `work_per_item` is a rough flop estimate used to skip thread spawn for
// small jobs.
void parallel_for(std::int64_t n, std::int64_t work_per_item,
                  const std::function<void(std::int64_t)>& fn);

} // namespace amdcn
