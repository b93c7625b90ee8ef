#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rmlab {

/// Number of workers to use when the caller asks for 0 ("auto").
inline unsigned default_width() noexcept
{
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, count) on `width` workers. Tasks are claimed from a
/// shared counter, so callers must write results by index to stay
/// order-independent. The first exception thrown by any task is rethrown after
/// all workers join.
template <typename Fn>
void parallel_for(std::size_t count, unsigned width, Fn&& fn)
{
    if (width == 0) width = default_width();
    if (width == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(count, std::memory_order_relaxed);
            }
        }
    };

    const auto workers = static_cast<std::size_t>(std::min<std::size_t>(width, count));
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    pool.clear();

    if (failure) std::rethrow_exception(failure);
}

}  // namespace rmlab
