/**
 * @file
 * @brief Minimal fork-join helper. Work is split into fixed chunks whose
 *        boundaries do not depend on the thread count.
 * @copyright Apache License v.2 (http://www.apache.org/licenses/LICENSE-2.0)
 */
#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace word2rate {

/// Calls fn(c) for every chunk index c in [0, chunks). With threads > 1 the
/// calls run concurrently; fn must only write chunk-private state. The
/// exception from the lowest failing chunk is rethrown.
template <class F>
void parallel_chunks(std::size_t chunks, std::size_t threads, F &&fn) {
    if (threads <= 1 || chunks <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) fn(c);
        return;
    }
    std::vector<std::exception_ptr> errors(chunks);
    std::atomic<std::size_t> next{0};
    {
        std::vector<std::jthread> pool;
        const std::size_t workers = threads < chunks ? threads : chunks;
        pool.reserve(workers);
        for (std::size_t t = 0; t < workers; ++t) {
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t c = next.fetch_add(1);
                    if (c >= chunks) return;
                    try {
                        fn(c);
                    } catch (...) {
                        errors[c] = std::current_exception();
                    }
                }
            });
        }
    }
    for (auto &e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

} // namespace word2rate
