#ifndef HOPFLAX_PARALLEL_HPP
#define HOPFLAX_PARALLEL_HPP

#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "hopflax/core.hpp"

namespace hopflax {

/// HOPFLAX_THREADS environment variable, else hardware concurrency.
inline int default_thread_count() {
    if (const char* env = std::getenv("HOPFLAX_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Static-chunk parallel loop: fn(worker, begin, end) over [0, n). Results
/// must not depend on the partition; exceptions from workers are rethrown.
template <class Fn>
void parallel_for(Index n, int threads, Fn&& fn) {
    threads = std::max(1, threads);
    if (threads > n) threads = std::max<Index>(1, n);
    if (threads == 1) {
        fn(0, Index{0}, n);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        const Index chunk = (n + threads - 1) / threads;
        for (int w = 0; w < threads; ++w) {
            const Index begin = std::min<Index>(n, w * chunk);
            const Index end = std::min<Index>(n, begin + chunk);
            pool.emplace_back([&, w, begin, end] {
                try {
                    fn(w, begin, end);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace hopflax

#endif
