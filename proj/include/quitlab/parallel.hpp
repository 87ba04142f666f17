#pragma once

#include <cstddef>

namespace quitlab {

// Global worker cap, settable from the QUITLAB_THREADS environment variable.
// 0 means "use hardware concurrency".
void set_max_threads(int n);
int max_threads();

// Runs fn(i) for i in [0, n). Work is chunked by index and every result slot
// is owned by exactly one index, so output is identical for any worker count.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn);

namespace detail {
void parallel_for_impl(std::size_t n, void* ctx, void (*call)(void*, std::size_t));
}

template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    detail::parallel_for_impl(n, &fn, [](void* ctx, std::size_t i) {
        (*static_cast<Fn*>(ctx))(i);
    });
}

}  // namespace quitlab
