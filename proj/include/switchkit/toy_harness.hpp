// Copyright (c) 2026 switchkit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "switchkit/matrix.hpp"
#include "switchkit/rank_policy.hpp"

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace switchkit {

// Synthetic delta with a planted split: a strong low-rank component O
// standing in for the behavior the adapter should capture, plus a weaker
// independent component R that must survive truncation. D = O + R.
struct planted_spec {
    int64_t n = 256;
    int64_t m = 256;
    int64_t rank_over = 4;
    int64_t rank_reason = 4;
    float scale_over = 10.0f;
    float scale_reason = 1.0f;
    uint64_t seed = 0;

    void validate() const; // ranks fit, scales positive, ratio >= 2
};

struct planted_delta {
    matrix d; // o + r
    matrix o;
    matrix r;
};

// Both components use orthonormalized seeded-Gaussian singular vectors and
// singular values uniform in [0.8, 1.0] * scale; the subspaces are drawn
// independently rather than forced orthogonal. Bit-reproducible per seed.
planted_delta plant_delta(const planted_spec & spec);

// ||l - o||_F / ||o||_F; +inf when ||o||_F = 0.
float recovery_error(const matrix & l, const matrix & o);

struct recovery_report {
    int64_t selected_r = 0;
    float rel_error_over = 0.0f;  // ||L - O|| / ||O||
    float rel_error_delta = 0.0f; // ||L - D|| / ||D||
    float tail_at_r = 0.0f;
};

// svd(D) -> select_rank -> truncate -> materialize L, then measure how
// much of the planted strong component the adapter recovered.
recovery_report run_planted_experiment(const planted_spec & spec, const rank_policy & policy);

// Small dense stack with tanh between layers (odd, saturating, bounded).
struct toy_model {
    int64_t dim = 0;
    std::vector<matrix> layers;
};

// reasoning = base + seeded per-layer perturbations.
std::pair<toy_model, toy_model> build_toy_stack(uint64_t seed, int64_t dim, int64_t depth);

std::vector<float> toy_forward(const toy_model & model, std::span<const float> x);

// Extracts a full-spectrum adapter from the (base, reasoning) pair, merges
// it into reasoning at alpha = 1, and returns the max-abs output deviation
// from the base stack over a seeded probe batch.
float end_to_end_check(uint64_t seed, int64_t dim, int64_t depth, int64_t probe_batch = 16);

} // namespace switchkit
