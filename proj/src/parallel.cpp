#include "quitlab/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace quitlab {

namespace {
std::atomic<int> g_max_threads{0};
}

void set_max_threads(int n) {
    g_max_threads.store(n < 0 ? 0 : n);
}

int max_threads() {
    int n = g_max_threads.load();
    if (n > 0) return n;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace detail {

void parallel_for_impl(std::size_t n, void* ctx, void (*call)(void*, std::size_t)) {
    if (n == 0) return;
    std::size_t workers = static_cast<std::size_t>(max_threads());
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) call(ctx, i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        // Small fixed chunks keep load balanced without a scheduler.
        constexpr std::size_t kChunk = 16;
        for (;;) {
            std::size_t begin = next.fetch_add(kChunk);
            if (begin >= n) return;
            std::size_t end = std::min(begin + kChunk, n);
            try {
                for (std::size_t i = begin; i < end; ++i) call(ctx, i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };

    std::vector<std::thread> threads;
    threads.reserve(workers - 1);
    for (std::size_t t = 0; t + 1 < workers; ++t) threads.emplace_back(worker);
    worker();
    for (auto& th : threads) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace detail

}  // namespace quitlab
