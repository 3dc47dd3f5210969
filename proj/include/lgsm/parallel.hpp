#pragma once

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace lgsm {

// Worker cap: LGSM_THREADS env var, 0 or 1 means serial, unset means
// hardware concurrency.
inline int worker_count() {
    if (const char* env = std::getenv("LGSM_THREADS")) {
        int n = std::atoi(env);
        return n <= 1 ? 1 : n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for i in [0, count). Work is split into contiguous chunks, one
// per worker; fn must only write to i-indexed slots so the split never
// changes results.
template <typename Fn>
void parallel_for(int count, Fn&& fn, int max_workers = -1) {
    int workers = max_workers < 0 ? worker_count() : max_workers;
    if (workers > count) workers = count;
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    int base = count / workers, extra = count % workers;
    int start = 0;
    for (int w = 0; w < workers; ++w) {
        int len = base + (w < extra ? 1 : 0);
        pool.emplace_back([&fn, start, len] {
            for (int i = start; i < start + len; ++i) fn(i);
        });
        start += len;
    }
    for (auto& t : pool) t.join();
}

}  // namespace lgsm
