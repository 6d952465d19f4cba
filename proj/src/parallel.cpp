#include "amdcn/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace amdcn {

namespace {
std::atomic<int> g_max_threads{0}; // 0 = unset, resolve lazily

int resolve_default() {
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}
} // namespace

void set_max_threads(int n) {
    g_max_threads.store(n < 1 ? 1 : n);
}

int max_threads() {
    int n = g_max_threads.load();
    if (n == 0) {
        n = resolve_default();
        g_max_threads.store(n);
    }
    return n;
}

void parallel_for(std::int64_t n, std::int64_t work_per_item,
                  const std::function<void(std::int64_t)>& fn) {
    if (n <= 0) return;
    // Thread spawn costs ~tens of microseconds; stay serial below that.
    constexpr std::int64_t kMinParallelWork = 250000;
    const int want = static_cast<int>(std::min<std::int64_t>(n, max_threads()));
    if (want <= 1 || n * work_per_item < kMinParallelWork) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(want));
    for (int t = 0; t < want; ++t) {
        const std::int64_t lo = n * t / want;
        const std::int64_t hi = n * (t + 1) / want;
        workers.emplace_back([lo, hi, &fn] {
            for (std::int64_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& w : workers) w.join();
}

} // namespace amdcn
