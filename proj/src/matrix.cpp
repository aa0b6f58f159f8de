// Copyright (c) 2026 switchkit contributors
// SPDX-License-Identifier: Apache-2.0

#include "switchkit/matrix.hpp"
#include "switchkit/errors.hpp"

#include <cmath>

namespace switchkit {

namespace detail {
std::atomic<std::size_t> payload_stats::live_bytes{0};
std::atomic<std::size_t> payload_stats::peak_bytes{0};
} // namespace detail

double frobenius_norm(const matrix & m) {
    double sum = 0.0;
    for (float v : m.values) {
        sum += (double)v * (double)v;
    }
    return std::sqrt(sum);
}

double max_abs_diff(const matrix & a, const matrix & b) {
    if (!a.same_shape(b)) {
        throw data_error("shape mismatch in max_abs_diff");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double d = std::fabs((double)a.values[i] - (double)b.values[i]);
        if (d > worst) {
            worst = d;
        }
    }
    return worst;
}

bool all_finite(const matrix & m) {
    for (float v : m.values) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

} // namespace switchkit
