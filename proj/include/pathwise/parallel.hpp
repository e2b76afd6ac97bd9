#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace pathwise {

// Worker count for ensemble-level loops. Numeric output must never depend on
// it: workers only fill disjoint preallocated slots, reductions stay serial.
inline std::atomic<int>& max_threads_slot() {
    static std::atomic<int> value{static_cast<int>(std::thread::hardware_concurrency())};
    return value;
}

inline int max_threads() { return std::max(1, max_threads_slot().load()); }
inline void set_max_threads(int n) { max_threads_slot().store(std::max(1, n)); }

template <class F>
void parallel_for(std::size_t n, F&& body) {
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(max_threads()), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = n * w / workers;
        const std::size_t hi = n * (w + 1) / workers;
        pool.emplace_back([&, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failed) std::rethrow_exception(error);
}

} // namespace pathwise
