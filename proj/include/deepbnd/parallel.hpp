#pragma once

#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace deepbnd {

// Bounded worker pool over an index range. Jobs are pure per index and write
// into caller-owned slots, so the result does not depend on the worker count.
template <class F>
void parallel_for(int n, int workers, F&& f) {
    workers = std::max(1, std::min(workers, n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (int t = 0; t < workers; ++t)
        pool.emplace_back([&, t] {
            try {
                for (int i = t; i < n; i += workers) f(i);
            } catch (...) {
                std::scoped_lock lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

inline int default_workers() {
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

} // namespace deepbnd
