#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace glab {

/// Runs fn(i, worker) for i in [0, count) on up to `jobs` threads. Work is
/// handed out dynamically; callers write results into slot i, so output is
/// independent of scheduling. The first exception is rethrown after join.
template <class Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
    const std::size_t workers =
        std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i, 0);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i, static_cast<int>(w));
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next.store(count);
                    return;
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace glab
