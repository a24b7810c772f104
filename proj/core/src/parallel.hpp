#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace endonoise::detail {

// Runs body(i) for i in [0, n). Work is split into contiguous chunks, so the
// result is independent of the thread count as long as body(i) only writes
// slot i. The first exception thrown by any chunk is rethrown on the caller.
template <class Body>
void parallel_for(std::size_t n, Body&& body, std::size_t min_chunk = 1)
{
    min_chunk = std::max<std::size_t>(min_chunk, 1);
    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers = std::min(hw, (n + min_chunk - 1) / min_chunk);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
        return;
    }

    std::exception_ptr first_error;
    std::mutex error_mutex;
    const std::size_t chunk = (n + workers - 1) / workers;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t lo = w * chunk;
            const std::size_t hi = std::min(n, lo + chunk);
            if (lo >= hi)
                break;
            pool.emplace_back([lo, hi, &body, &first_error, &error_mutex] {
                try {
                    for (std::size_t i = lo; i < hi; ++i)
                        body(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error)
                        first_error = std::current_exception();
                }
            });
        }
    }
    if (first_error)
        std::rethrow_exception(first_error);
}

} // namespace endonoise::detail
