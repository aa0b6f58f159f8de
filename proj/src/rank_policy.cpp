// Copyright (c) 2026 switchkit contributors
// SPDX-License-Identifier: Apache-2.0

#include "switchkit/rank_policy.hpp"
#include "switchkit/errors.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace switchkit {

energy_profile compute_energy_profile(const std::string & layer, const std::vector<float> & s) {
    energy_profile p;
    p.layer = layer;
    p.s = s;
    const std::size_t k = s.size();
    for (std::size_t i = 0; i < k; ++i) {
        if (!(s[i] >= 0.0f) || !std::isfinite(s[i])) {
            throw data_error("spectrum of '" + layer + "' has a negative or non-finite value at index " +
                             std::to_string(i));
        }
        if (i > 0 && s[i] > s[i - 1]) {
            throw data_error("spectrum of '" + layer + "' is not non-increasing at index " +
                             std::to_string(i));
        }
    }
    // right-to-left suffix sums avoid cancellation on long spectra
    std::vector<double> suffix(k + 1, 0.0);
    for (std::size_t i = k; i-- > 0;) {
        suffix[i] = suffix[i + 1] + (double)s[i] * (double)s[i];
    }
    p.total_energy = suffix[0];
    p.tail.assign(k + 1, 0.0);
    if (p.total_energy > 0.0) {
        for (std::size_t r = 0; r <= k; ++r) {
            p.tail[r] = suffix[r] / p.total_energy;
        }
        p.tail[0] = 1.0;
        p.tail[k] = 0.0;
    } else {
        p.degenerate = true;
    }
    return p;
}

int64_t select_rank(const energy_profile & profile, const rank_policy & policy) {
    const int64_t k = (int64_t)profile.s.size();
    switch (policy.kind) {
        case rank_policy_kind::energy_threshold: {
            if (!(policy.tau >= 0.0 && policy.tau <= 1.0)) {
                throw data_error("tau must lie in [0,1], got " + std::to_string(policy.tau));
            }
            if (profile.degenerate) {
                return 0;
            }
            auto keeps = [&](int64_t r) {
                const double residual = policy.legacy_indexing ? profile.tail[(std::size_t)(r - 1)]
                                                               : profile.tail[(std::size_t)r];
                return policy.strict_inequality ? residual > policy.tau : residual >= policy.tau;
            };
            // tail is non-increasing, so `keeps` is true on a prefix of the
            // candidate range; binary-search the last kept rank
            int64_t lo = policy.legacy_indexing ? 1 : 0;
            if (!keeps(lo)) {
                return 0;
            }
            int64_t hi = k;
            while (lo < hi) {
                const int64_t mid = lo + (hi - lo + 1) / 2;
                if (keeps(mid)) {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            return lo;
        }
        case rank_policy_kind::fixed_ratio: {
            if (!(policy.rho > 0.0 && policy.rho <= 1.0)) {
                throw data_error("rho must lie in (0,1], got " + std::to_string(policy.rho));
            }
            // nearbyint under the default FE_TONEAREST mode rounds half to even
            int64_t r = (int64_t)std::nearbyint(policy.rho * (double)k);
            r = std::max<int64_t>(0, std::min(r, k));
            return r;
        }
        case rank_policy_kind::fixed_rank: {
            if (policy.r_fixed < 0) {
                throw data_error("fixed rank must be non-negative, got " +
                                 std::to_string(policy.r_fixed));
            }
            return std::min(policy.r_fixed, k);
        }
    }
    throw data_error("unknown rank policy");
}

void write_spectrum_csv(std::ostream & out, const energy_profile & profile, bool with_header) {
    if (with_header) {
        out << "layer,rank_index,singular_value,tail_energy\n";
    }
    char line[256];
    for (std::size_t i = 0; i < profile.s.size(); ++i) {
        std::snprintf(line, sizeof(line), ",%zu,%.9g,%.17g\n", i + 1, (double)profile.s[i],
                      profile.tail[i + 1]);
        out << profile.layer << line;
    }
}

std::string policy_name(rank_policy_kind kind) {
    switch (kind) {
        case rank_policy_kind::energy_threshold: return "energy_threshold";
        case rank_policy_kind::fixed_ratio:      return "fixed_ratio";
        case rank_policy_kind::fixed_rank:       return "fixed_rank";
    }
    return "unknown";
}

} // namespace switchkit
