#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace fraclab {

inline int worker_count() {
    if (const char* env = std::getenv("FRACLAB_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

// Chunked parallel loop. The chunk grid depends only on n, never on the
// worker count, so per-chunk results can be combined in a fixed order and
// all reductions stay bit-reproducible.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                         std::size_t min_chunk = 256) {
    if (n == 0) return;
    const int workers = worker_count();
    if (workers <= 1 || n <= min_chunk) {
        body(0, n);
        return;
    }
    const std::size_t chunks = std::min<std::size_t>(4 * workers, (n + min_chunk - 1) / min_chunk);
    const std::size_t step = (n + chunks - 1) / chunks;
    std::vector<std::thread> pool;
    std::size_t next = 0;
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    while (next < n) {
        ranges.emplace_back(next, std::min(n, next + step));
        next += step;
    }
    std::size_t per = (ranges.size() + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const std::size_t lo = w * per;
        if (lo >= ranges.size()) break;
        const std::size_t hi = std::min(ranges.size(), lo + per);
        pool.emplace_back([&, lo, hi] {
            for (std::size_t c = lo; c < hi; ++c) body(ranges[c].first, ranges[c].second);
        });
    }
    for (auto& t : pool) t.join();
}

// Deterministic reduction: evaluates term(i) in parallel chunks, sums each
// chunk left-to-right, then folds chunks in index order.
inline double parallel_sum(std::size_t n, const std::function<double(std::size_t)>& term,
                           std::size_t min_chunk = 1024) {
    if (n == 0) return 0.0;
    const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(n, 64));
    const std::size_t step = (n + chunks - 1) / chunks;
    std::vector<double> partial((n + step - 1) / step, 0.0);
    parallel_for(partial.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t c = lo; c < hi; ++c) {
            double s = 0.0;
            const std::size_t e = std::min(n, (c + 1) * step);
            for (std::size_t i = c * step; i < e; ++i) s += term(i);
            partial[c] = s;
        }
    }, 1);
    double total = 0.0;
    for (double v : partial) total += v;
    return total;
    (void)min_chunk;
}

} // namespace fraclab
