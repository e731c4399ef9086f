#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace mlpbsde::detail {

// Runs fn(i) for i in [0, count) on up to `workers` threads, each index exactly once.
template <class Fn>
void for_each_index(std::size_t count, int workers, Fn&& fn) {
    const auto w = static_cast<std::size_t>(workers < 1 ? 1 : workers);
    if (w == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const std::size_t used = std::min(w, count);
    std::vector<std::exception_ptr> errors(used);
    std::vector<std::thread> pool;
    pool.reserve(used);
    for (std::size_t k = 0; k < used; ++k) {
        pool.emplace_back([&, k] {
            try {
                for (std::size_t i = k; i < count; i += used) fn(i);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace mlpbsde::detail
