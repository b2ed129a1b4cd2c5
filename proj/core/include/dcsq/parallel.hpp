#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dcsq {

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
///
/// Work is handed out by an atomic counter, so scheduling is nondeterministic;
/// callers must write results into per-index slots and do any order-sensitive
/// reduction sequentially afterwards. That discipline is what makes every
/// pipeline output independent of the worker count.
template <typename Fn>
void parallel_for(int jobs, std::size_t n, Fn&& fn) {
    jobs = std::max(1, jobs);
    const std::size_t workers = std::min<std::size_t>(jobs, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace dcsq
