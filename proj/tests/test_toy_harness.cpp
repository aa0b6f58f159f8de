// Copyright (c) 2026 switchkit contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "switchkit/delta_svd.hpp"
#include "switchkit/errors.hpp"
#include "switchkit/toy_harness.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

using namespace switchkit;

namespace {

float median_error(const std::vector<float> & values) {
    std::vector<float> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    return sorted[sorted.size() / 2];
}

} // namespace

TEST_CASE("plant_delta is reproducible and respects degenerate ranks") {
    planted_spec spec;
    spec.n = 32;
    spec.m = 24;
    spec.rank_over = 3;
    spec.rank_reason = 2;
    spec.scale_over = 8.0f;
    spec.scale_reason = 1.0f;
    spec.seed = 5;

    SUBCASE("equal seeds give bit-identical deltas") {
        const planted_delta a = plant_delta(spec);
        const planted_delta b = plant_delta(spec);
        REQUIRE(a.d.values.size() == b.d.values.size());
        for (std::size_t i = 0; i < a.d.values.size(); ++i) {
            CHECK(std::bit_cast<uint32_t>(a.d.values[i]) == std::bit_cast<uint32_t>(b.d.values[i]));
        }
    }
    SUBCASE("different seeds differ") {
        planted_spec other = spec;
        other.seed = 6;
        CHECK(max_abs_diff(plant_delta(spec).d, plant_delta(other).d) > 1e-3);
    }
    SUBCASE("rank_over = 0 plants only the weak component") {
        planted_spec ro = spec;
        ro.rank_over = 0;
        ro.scale_over = 2.0f; // ratio vs 1.0 still >= 2
        const planted_delta planted = plant_delta(ro);
        for (float v : planted.o.values) {
            CHECK(v == 0.0f);
        }
        CHECK(max_abs_diff(planted.d, planted.r) == 0.0);
    }
    SUBCASE("invalid specs are rejected") {
        planted_spec overflow = spec;
        overflow.rank_over = 30; // 30 + 2 > min(32, 24)
        CHECK_THROWS_WITH_AS(plant_delta(overflow), doctest::Contains("must fit"), data_error);
        planted_spec ratio = spec;
        ratio.scale_reason = 5.0f; // ratio 1.6 < 2
        CHECK_THROWS_WITH_AS(plant_delta(ratio), doctest::Contains("at least 2"), data_error);
    }
}

TEST_CASE("planted spectrum exhibits the expected gap") {
    planted_spec spec;
    spec.n = spec.m = 256;
    spec.rank_over = 4;
    spec.rank_reason = 4;
    spec.scale_over = 10.0f;
    spec.scale_reason = 1.0f;
    spec.seed = 42;

    const planted_delta planted = plant_delta(spec);
    const spectral_decomposition dec = svd(planted.d, "planted");
    REQUIRE(dec.k == 256);
    // strong block near 10 * [0.8, 1.0], weak block near 1 * [0.8, 1.0]
    for (int i = 0; i < 4; ++i) {
        CHECK(dec.s[(std::size_t)i] >= 7.8f);
        CHECK(dec.s[(std::size_t)i] <= 10.2f);
    }
    for (int i = 4; i < 8; ++i) {
        CHECK(dec.s[(std::size_t)i] <= 1.3f);
    }
    // D has rank at most 8; everything beyond is numerics
    for (int i = 8; i < 16; ++i) {
        CHECK(dec.s[(std::size_t)i] <= 1e-4f);
    }
}

TEST_CASE("recovery_error basics") {
    seeded_rng rng(9);
    const matrix o = testsup::random_matrix(rng, 6, 7);

    CHECK(recovery_error(o, o) == 0.0f);

    const matrix zero(6, 7);
    CHECK(recovery_error(zero, o) == doctest::Approx(1.0).epsilon(1e-6));

    matrix doubled = o;
    for (auto & v : doubled.values) {
        v *= 2.0f;
    }
    CHECK(recovery_error(doubled, o) == doctest::Approx(1.0).epsilon(1e-6));

    CHECK(std::isinf(recovery_error(zero, zero)));

    const matrix wrong(7, 6);
    CHECK_THROWS_AS(recovery_error(wrong, o), data_error);
}

TEST_CASE("planted experiment endpoints: full spectrum and empty selection") {
    planted_spec spec;
    spec.n = spec.m = 96;
    spec.rank_over = 3;
    spec.rank_reason = 3;
    spec.scale_over = 10.0f;
    spec.scale_reason = 1.0f;
    spec.seed = 11;

    SUBCASE("tau = 0 recovers the whole delta") {
        const recovery_report report = run_planted_experiment(spec, rank_policy::energy(0.0));
        CHECK(report.rel_error_delta <= 1e-4f);
        CHECK(report.selected_r >= 6); // at least the planted rank survives
    }
    SUBCASE("tau = 1 selects nothing") {
        const recovery_report report = run_planted_experiment(spec, rank_policy::energy(1.0));
        CHECK(report.selected_r == 0);
        CHECK(report.rel_error_over == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(report.tail_at_r == 1.0f);
    }
    SUBCASE("reports are pure functions of the spec") {
        const recovery_report a = run_planted_experiment(spec, rank_policy::energy(0.01));
        const recovery_report b = run_planted_experiment(spec, rank_policy::energy(0.01));
        CHECK(a.selected_r == b.selected_r);
        CHECK(std::bit_cast<uint32_t>(a.rel_error_over) == std::bit_cast<uint32_t>(b.rel_error_over));
        CHECK(std::bit_cast<uint32_t>(a.rel_error_delta) ==
              std::bit_cast<uint32_t>(b.rel_error_delta));
    }
}

TEST_CASE("strong planted component is recovered first at a calibrated tau") {
    // operating point frozen from the calibration runs: ratio 8, tau 0.005
    planted_spec spec;
    spec.n = spec.m = 128;
    spec.rank_over = 4;
    spec.rank_reason = 4;
    spec.scale_over = 10.0f;
    spec.scale_reason = 1.25f;

    for (uint64_t seed : {1ull, 2ull, 3ull}) {
        spec.seed = seed;
        const recovery_report report = run_planted_experiment(spec, rank_policy::energy(0.005));
        CHECK(report.selected_r >= spec.rank_over);
        CHECK(report.selected_r <= spec.rank_over + spec.rank_reason);
        CHECK(report.rel_error_over <= 0.25f);
    }
}

TEST_CASE("median recovery error degrades monotonically as the scale ratio shrinks") {
    // medians frozen from calibration: 0.011 (x16) / 0.022 (x8) / 0.048 (x4) / 0.120 (x2)
    const std::vector<double> ratios = {16.0, 8.0, 4.0, 2.0};
    std::vector<float> medians;
    for (double ratio : ratios) {
        std::vector<float> errors;
        for (uint64_t seed = 1; seed <= 11; ++seed) {
            planted_spec spec;
            spec.n = spec.m = 256;
            spec.rank_over = 4;
            spec.rank_reason = 4;
            spec.scale_over = (float)ratio;
            spec.scale_reason = 1.0f;
            spec.seed = seed;
            errors.push_back(
                run_planted_experiment(spec, rank_policy::fixed(spec.rank_over)).rel_error_over);
        }
        medians.push_back(median_error(errors));
    }
    for (std::size_t i = 1; i < medians.size(); ++i) {
        CHECK(medians[i] >= medians[i - 1]);
    }
    CHECK(medians.front() <= 0.05f);
}

TEST_CASE("toy stack forward passes and the adapter identity") {
    SUBCASE("depth 1 reduces to the full-rank merge identity") {
        CHECK(end_to_end_check(3, 8, 1) <= 1e-4f);
        CHECK(end_to_end_check(42, 32, 1) <= 1e-4f);
    }
    SUBCASE("depth 3 with tanh stays within 1e-3") {
        CHECK(end_to_end_check(42, 32, 3, 16) <= 1e-3f);
        CHECK(end_to_end_check(7, 32, 3, 16) <= 1e-3f);
    }
    SUBCASE("checks are deterministic per seed") {
        CHECK(end_to_end_check(5, 16, 2) == end_to_end_check(5, 16, 2));
    }
    SUBCASE("zero-strength application leaves the reasoning outputs unchanged") {
        auto [base, reasoning] = build_toy_stack(13, 16, 2);
        toy_model zero_merged;
        zero_merged.dim = 16;
        for (std::size_t layer = 0; layer < reasoning.layers.size(); ++layer) {
            matrix delta = base.layers[layer];
            for (std::size_t i = 0; i < delta.values.size(); ++i) {
                delta.values[i] -= reasoning.layers[layer].values[i];
            }
            auto [u_factor, v_factor] = build_factors(truncate(svd(delta), 16));
            const matrix l = materialize(u_factor, v_factor);
            matrix w = reasoning.layers[layer];
            for (std::size_t i = 0; i < w.values.size(); ++i) {
                w.values[i] += 0.0f * l.values[i];
            }
            zero_merged.layers.push_back(std::move(w));
        }
        seeded_rng rng(77);
        std::vector<float> x(16);
        for (auto & v : x) {
            v = (float)rng.gaussian();
        }
        const auto a = toy_forward(reasoning, x);
        const auto b = toy_forward(zero_merged, x);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i] == b[i]);
        }
    }
    SUBCASE("bad dimensions are rejected") {
        CHECK_THROWS_AS(build_toy_stack(1, 0, 1), data_error);
        auto [base, reasoning] = build_toy_stack(1, 4, 1);
        std::vector<float> wrong(5, 0.0f);
        CHECK_THROWS_AS(toy_forward(base, wrong), data_error);
    }
}
