// Chunked parallel-for with a fixed chunk partition: results never depend on
// the thread count, only on the chunk boundaries. TRIGFLOW_THREADS caps the
// pool (default: hardware concurrency).
#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace trigflow {

inline int thread_count() {
    if (const char* env = std::getenv("TRIGFLOW_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? int(hw) : 1;
}

inline void parallel_for_chunks(int n, int chunk, const std::function<void(int, int)>& fn) {
    if (n <= 0) return;
    const int workers = std::min(thread_count(), (n + chunk - 1) / chunk);
    if (workers <= 1) {
        for (int b = 0; b < n; b += chunk) fn(b, std::min(n, b + chunk));
        return;
    }
    std::atomic<int> next{0};
    auto work = [&] {
        while (true) {
            const int b = next.fetch_add(chunk);
            if (b >= n) break;
            fn(b, std::min(n, b + chunk));
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(size_t(workers) - 1);
    for (int i = 1; i < workers; ++i) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
}

} // namespace trigflow
