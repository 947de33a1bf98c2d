#pragma once

#include <algorithm>
#include <cstddef>
#include <future>
#include <type_traits>
#include <vector>

namespace rolekit::util {

/// Calls f(0..n-1) with at most `parallelism` calls in flight and returns
/// the results in index order. The first exception (by index) propagates
/// after all started calls finish.
template <class F>
auto parallel_map(std::size_t n, std::size_t parallelism, F f) -> std::vector<std::invoke_result_t<F, std::size_t>> {
    using R = std::invoke_result_t<F, std::size_t>;
    std::vector<R> out;
    out.reserve(n);
    if (parallelism <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            out.push_back(f(i));
        }
        return out;
    }
    for (std::size_t batch = 0; batch < n; batch += parallelism) {
        std::vector<std::future<R>> pending;
        const auto end = std::min(n, batch + parallelism);
        for (std::size_t i = batch; i < end; ++i) {
            pending.push_back(std::async(std::launch::async, [&f, i] { return f(i); }));
        }
        for (auto& p : pending) {
            p.wait();
        }
        for (auto& p : pending) {
            out.push_back(p.get());
        }
    }
    return out;
}

} // namespace rolekit::util
