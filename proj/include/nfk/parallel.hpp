#pragma once

#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace nfk {

// Worker count, overridable through NFK_THREADS; results are identical for
// any value because reductions always run in index order.
inline unsigned worker_count() {
    if (const char* env = std::getenv("NFK_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return unsigned(n);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Runs fn(i) for i in [0, n). Workers take contiguous chunks; results must be
// written to preallocated per-index slots so that any later reduction happens
// in a fixed order regardless of scheduling.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    unsigned workers = worker_count();
    if (n == 0) return;
    if (workers <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    if (std::size_t(workers) > n) workers = unsigned(n);
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex err_mutex;
    std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        std::size_t lo = std::size_t(w) * chunk;
        std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace nfk
