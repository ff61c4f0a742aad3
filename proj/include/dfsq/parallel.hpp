#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace dfsq {

inline int thread_count(int requested = 0) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("DFSQ_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : int(hc);
}

/// Runs fn(batch) for batch = 0..n_batches-1 on `threads` workers. Each batch
/// must write only its own output slot; results are then independent of the
/// thread count.
inline void parallel_batches(int n_batches, const std::function<void(int)>& fn,
                             int threads = 0) {
    int t = thread_count(threads);
    if (t <= 1 || n_batches <= 1) {
        for (int b = 0; b < n_batches; ++b) fn(b);
        return;
    }
    if (t > n_batches) t = n_batches;
    std::vector<std::thread> pool;
    pool.reserve(t);
    for (int w = 0; w < t; ++w) {
        pool.emplace_back([&, w] {
            for (int b = w; b < n_batches; b += t) fn(b);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace dfsq
