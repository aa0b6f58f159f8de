// Copyright (c) 2026 switchkit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace switchkit {

namespace detail {

// Global accounting of live fp32 payload bytes. Tests use the peak counter
// to verify that streaming scans never hold more than one full tensor.
struct payload_stats {
    static std::atomic<std::size_t> live_bytes;
    static std::atomic<std::size_t> peak_bytes;

    static void on_alloc(std::size_t bytes) {
        const std::size_t now = live_bytes.fetch_add(bytes) + bytes;
        std::size_t prev = peak_bytes.load();
        while (prev < now && !peak_bytes.compare_exchange_weak(prev, now)) {
        }
    }
    static void on_free(std::size_t bytes) {
        live_bytes.fetch_sub(bytes);
    }
    static void reset_peak() {
        peak_bytes.store(live_bytes.load());
    }
};

template <typename T>
struct counting_allocator {
    using value_type = T;

    counting_allocator() = default;
    template <typename U>
    counting_allocator(const counting_allocator<U> &) {}

    T * allocate(std::size_t n) {
        payload_stats::on_alloc(n * sizeof(T));
        return static_cast<T *>(::operator new(n * sizeof(T)));
    }
    void deallocate(T * p, std::size_t n) {
        payload_stats::on_free(n * sizeof(T));
        ::operator delete(p);
    }

    friend bool operator==(const counting_allocator &, const counting_allocator &) { return true; }
};

} // namespace detail

using f32_buffer = std::vector<float, detail::counting_allocator<float>>;

// Dense row-major fp32 matrix. All pipeline arithmetic happens on this type
// regardless of the archive storage dtype.
struct matrix {
    int64_t rows = 0;
    int64_t cols = 0;
    f32_buffer values; // rows*cols, row-major

    matrix() = default;
    matrix(int64_t r, int64_t c) : rows(r), cols(c), values((std::size_t)(r * c), 0.0f) {}

    float & at(int64_t r, int64_t c) { return values[(std::size_t)(r * cols + c)]; }
    float at(int64_t r, int64_t c) const { return values[(std::size_t)(r * cols + c)]; }

    int64_t size() const { return rows * cols; }
    bool same_shape(const matrix & o) const { return rows == o.rows && cols == o.cols; }
};

// Frobenius norm, accumulated in fp64.
double frobenius_norm(const matrix & m);

// max_ij |a_ij - b_ij|; throws data_error on shape mismatch.
double max_abs_diff(const matrix & a, const matrix & b);

bool all_finite(const matrix & m);

} // namespace switchkit
