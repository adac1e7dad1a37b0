#pragma once

// Deterministic data parallelism: parallel_for partitions an index range
// across threads, each index writing only to its own output slot, so results
// never depend on scheduling. KEEP_THREADS caps the pool; unset means
// hardware concurrency.

#include <algorithm>
#include <cstdlib>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace keep {

inline int max_threads() {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* env = std::getenv("KEEP_THREADS")) {
        int cap = std::atoi(env);
        if (cap >= 1) hw = std::min(hw, cap);
    }
    return hw;
}

/// Runs fn(i) for i in [0, count). fn must not touch state owned by another
/// index. Exceptions propagate from worker 0 only; workers must not throw in
/// normal operation.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
    int threads = std::min<std::size_t>(max_threads(), count);
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads) - 1);
    auto worker = [&](std::size_t first) {
        for (std::size_t i = first; i < count; i += static_cast<std::size_t>(threads)) fn(i);
    };
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker, static_cast<std::size_t>(t));
    worker(0);
    for (auto& th : pool) th.join();
}

} // namespace keep
