#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace gpr {

inline unsigned resolve_threads(unsigned requested) {
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

/// Runs fn(block_index, begin, end) over fixed-size blocks of [0, total).
/// Block boundaries depend only on (total, block_size), never on the thread
/// count, so functions that write per-block or per-element results produce
/// identical output regardless of parallelism.
template <typename Fn>
void parallel_blocks(size_t total, size_t block_size, unsigned threads, Fn&& fn) {
    if (total == 0) return;
    if (block_size == 0) block_size = 1;
    const size_t n_blocks = (total + block_size - 1) / block_size;
    const unsigned n_threads = std::min<size_t>(resolve_threads(threads), n_blocks);

    if (n_threads <= 1) {
        for (size_t b = 0; b < n_blocks; ++b) {
            const size_t begin = b * block_size;
            const size_t end = std::min(total, begin + block_size);
            fn(b, begin, end);
        }
        return;
    }

    std::atomic<size_t> next{0};
    auto worker = [&] {
        while (true) {
            const size_t b = next.fetch_add(1);
            if (b >= n_blocks) break;
            const size_t begin = b * block_size;
            const size_t end = std::min(total, begin + block_size);
            fn(b, begin, end);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

}  // namespace gpr
