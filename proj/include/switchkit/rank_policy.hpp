// Copyright (c) 2026 switchkit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace switchkit {

// Singular spectrum of one layer plus its reversed cumulative energy curve.
// tail has k+1 entries: tail[r] is the fraction of squared singular mass
// left after keeping the top r values, so tail[0] = 1 and tail[k] = 0.
// The 1-indexed residual curve e(r) equals tail[r-1].
struct energy_profile {
    std::string layer;
    std::vector<float> s;     // non-increasing, non-negative
    double total_energy = 0.0; // sum of s_i^2, fp64 accumulation
    std::vector<double> tail;  // length k+1
    bool degenerate = false;   // all-zero spectrum; tail treated as all-zero
};

enum class rank_policy_kind {
    energy_threshold, // keep ranks while the residual tail energy stays >= tau
    fixed_ratio,      // r = round(rho * k), half-to-even
    fixed_rank,       // r = min(r_fixed, k)
};

struct rank_policy {
    rank_policy_kind kind = rank_policy_kind::energy_threshold;
    double tau = 0.6;
    double rho = 0.0;
    int64_t r_fixed = 0;

    // Compatibility readings of the threshold rule. The default keeps the
    // largest r whose residual tail[r] >= tau; `strict_inequality` demands
    // tail[r] > tau, and `legacy_indexing` compares the 1-indexed curve
    // e(r) = tail[r-1] instead.
    bool strict_inequality = false;
    bool legacy_indexing = false;

    static rank_policy energy(double tau) {
        rank_policy p;
        p.kind = rank_policy_kind::energy_threshold;
        p.tau = tau;
        return p;
    }
    static rank_policy ratio(double rho) {
        rank_policy p;
        p.kind = rank_policy_kind::fixed_ratio;
        p.rho = rho;
        return p;
    }
    static rank_policy fixed(int64_t r) {
        rank_policy p;
        p.kind = rank_policy_kind::fixed_rank;
        p.r_fixed = r;
        return p;
    }
};

// Validates monotonicity/non-negativity of s and accumulates the tail
// curve right-to-left in fp64.
energy_profile compute_energy_profile(const std::string & layer, const std::vector<float> & s);

int64_t select_rank(const energy_profile & profile, const rank_policy & policy);

// CSV rows `layer,rank_index,singular_value,tail_energy` for rank_index
// 1..k; tail_energy is the residual after keeping rank_index values.
void write_spectrum_csv(std::ostream & out, const energy_profile & profile, bool with_header);

std::string policy_name(rank_policy_kind kind);

} // namespace switchkit
