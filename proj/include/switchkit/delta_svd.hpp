// Copyright (c) 2026 switchkit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "switchkit/matrix.hpp"
#include "switchkit/tensor_archive.hpp"

#include <string>
#include <utility>
#include <vector>

namespace switchkit {

// A layer present in both checkpoints with identical 2-D shape.
struct layer_pair {
    std::string name;
    int64_t rows = 0;
    int64_t cols = 0;
    const archive_index * base = nullptr;
    const archive_index * reasoning = nullptr;
};

// d = W_base - W_reasoning, the full per-layer weight delta. Adding the
// delta back onto the reasoning weights recovers the base behavior.
struct delta_matrix {
    std::string layer;
    matrix d;
};

// Thin SVD triplet: u is N x k, v is M x k (columns are the singular
// vectors), s is non-increasing. Individual columns are only defined up to
// sign, and up to rotation under ties; compare subspaces, not entries.
struct spectral_decomposition {
    matrix u;
    std::vector<float> s;
    matrix v;
    int64_t k = 0;
};

struct pairing_options {
    bool skip_mismatched = false; // warn + skip instead of erroring on shape mismatch
};

// fnmatch-style glob ('*', '?', '[..]').
bool glob_match(const std::string & pattern, const std::string & name);

// Exclusions applied by the CLI when none are given: embedding and output
// head matrices, which are not linear layers in the adapter sense.
const std::vector<std::string> & default_exclude_globs();

// Intersects the two archives: names present in both, 2-D on both sides,
// equal shape, include-glob selected (empty include = everything) and not
// excluded. Deterministic name-sorted order. Shape mismatches throw unless
// opts.skip_mismatched; selecting nothing is an error.
std::vector<layer_pair> pair_layers(const archive_index & base, const archive_index & reasoning,
                                    const std::vector<std::string> & include,
                                    const std::vector<std::string> & exclude,
                                    const pairing_options & opts = {},
                                    std::vector<std::string> * warnings = nullptr);

delta_matrix compute_delta(const layer_pair & pair);

// Full thin SVD, k = min(N,M). Deterministic for identical input bytes.
spectral_decomposition svd(const matrix & m, const std::string & layer = "");
spectral_decomposition svd(const delta_matrix & delta);

// Leading-r truncation (Eckart-Young optimal among rank-r matrices).
spectral_decomposition truncate(const spectral_decomposition & dec, int64_t r);

// Splits the kept singular mass evenly: u_factor = U*sqrt(S) (N x r),
// v_factor = sqrt(S)*V^T (r x M). Retained zero singular values are an
// error; rank selection must have excluded them.
std::pair<matrix, matrix> build_factors(const spectral_decomposition & dec);

// u_factor * v_factor, in fp32.
matrix materialize(const matrix & u_factor, const matrix & v_factor);

} // namespace switchkit
