#pragma once
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace gaitnirs {

// Worker cap from GAITNIRS_THREADS, read per call so tests can change it at runtime.
inline int max_threads() {
    if (const char* env = std::getenv("GAITNIRS_THREADS")) {
        int v = std::atoi(env);
        if (v >= 1) return v;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc ? static_cast<int>(hc) : 1;
}

// Index-parallel loop. Callers must write results only into slot i so the outcome
// is independent of scheduling. First exception (if any) is rethrown.
template <class F>
void parallel_for(size_t n, F&& fn) {
    size_t nt = std::min<size_t>(static_cast<size_t>(max_threads()), n);
    if (nt <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mutex;
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (size_t t = 0; t < nt; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!err) err = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

} // namespace gaitnirs
