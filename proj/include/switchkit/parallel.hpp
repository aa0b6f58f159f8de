// Copyright (c) 2026 switchkit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace switchkit {

// Runs fn(i) for i in [0, n) on up to `jobs` worker threads. Each worker
// owns one index at a time, which bounds in-flight work to `jobs` items.
// The first exception wins and is rethrown after all workers join, so
// results are indistinguishable from a sequential run.
template <typename Fn>
void parallel_for(int64_t n, int jobs, Fn && fn) {
    if (n <= 0) {
        return;
    }
    if (jobs <= 1 || n == 1) {
        for (int64_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    const int workers = (int)std::min<int64_t>(jobs, n);
    std::atomic<int64_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex err_mutex;

    auto body = [&]() {
        while (!failed.load(std::memory_order_relaxed)) {
            const int64_t i = next.fetch_add(1);
            if (i >= n) {
                return;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                }
                failed.store(true);
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve((std::size_t)workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back(body);
    }
    for (auto & t : pool) {
        t.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

} // namespace switchkit
