#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace hessian_lab {

namespace detail {
inline std::atomic<int>& thread_count()
{
    static std::atomic<int> count{1};
    return count;
}
}  // namespace detail

/// Number of worker threads used by per-point loops. Defaults to 1.
inline int num_threads() { return detail::thread_count().load(); }
inline void set_num_threads(int k) { detail::thread_count().store(std::max(1, k)); }

/// Runs fn(i) for i in [0, n). Chunks are contiguous, so any writes indexed
/// by i are deterministic regardless of the thread count.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn)
{
    const auto workers = static_cast<std::size_t>(num_threads());
    if (workers <= 1 || n < 4096) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t chunk = (n + workers - 1) / workers;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t lo = w * chunk;
            const std::size_t hi = std::min(n, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back([lo, hi, &fn, &failure, &failure_mutex] {
                try {
                    for (std::size_t i = lo; i < hi; ++i) fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace hessian_lab
