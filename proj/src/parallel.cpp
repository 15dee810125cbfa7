#include "veil/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace veil {

namespace {

std::atomic<unsigned> g_requested_threads{0};

constexpr std::size_t kReductionBlock = 4096;

}  // namespace

void set_thread_count(unsigned count) { g_requested_threads.store(count); }

unsigned thread_count() {
    unsigned requested = g_requested_threads.load();
    if (requested == 0) {
        requested = std::max(1u, std::thread::hardware_concurrency());
    }
    return requested;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
    if (n == 0) return;
    const std::size_t workers = std::min<std::size_t>(thread_count(), n);
    if (workers <= 1) {
        body(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    const std::size_t step = (n + workers - 1) / workers;
    for (std::size_t w = 1; w < workers; ++w) {
        const std::size_t begin = w * step;
        const std::size_t end = std::min(n, begin + step);
        if (begin >= end) break;
        pool.emplace_back([&body, begin, end] { body(begin, end); });
    }
    body(0, std::min(n, step));
    for (auto& t : pool) t.join();
}

double deterministic_block_sum(std::size_t n,
                               const std::function<double(std::size_t, std::size_t)>& block_sum) {
    if (n == 0) return 0.0;
    const std::size_t blocks = (n + kReductionBlock - 1) / kReductionBlock;
    std::vector<double> partial(blocks, 0.0);
    parallel_for(blocks, [&](std::size_t b0, std::size_t b1) {
        for (std::size_t b = b0; b < b1; ++b) {
            const std::size_t begin = b * kReductionBlock;
            partial[b] = block_sum(begin, std::min(n, begin + kReductionBlock));
        }
    });
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

double deterministic_sum(std::size_t n, const std::function<double(std::size_t)>& term) {
    return deterministic_block_sum(n, [&](std::size_t begin, std::size_t end) {
        double s = 0.0;
        for (std::size_t i = begin; i < end; ++i) s += term(i);
        return s;
    });
}

}  // namespace veil
