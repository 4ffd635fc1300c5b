#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace epismc {

/// Runs fn over contiguous index chunks [lo, hi) on up to `threads` workers.
/// Callers are responsible for making chunk work disjoint; with threads <= 1
/// the call runs inline.
inline void parallel_for_chunks(std::size_t count, int threads,
                                const std::function<void(std::size_t, std::size_t)>& fn) {
    if (count == 0) return;
    const std::size_t n_workers =
        std::min<std::size_t>(std::max(threads, 1), count);
    if (n_workers <= 1) {
        fn(0, count);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(n_workers - 1);
    const std::size_t base = count / n_workers;
    const std::size_t extra = count % n_workers;
    std::size_t lo = 0;
    for (std::size_t w = 0; w < n_workers; ++w) {
        const std::size_t hi = lo + base + (w < extra ? 1 : 0);
        if (w + 1 == n_workers) {
            fn(lo, hi);
        } else {
            pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
        }
        lo = hi;
    }
    for (auto& t : pool) t.join();
}

}  // namespace epismc
