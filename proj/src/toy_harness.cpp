// Copyright (c) 2026 switchkit contributors
// SPDX-License-Identifier: Apache-2.0

#include "switchkit/toy_harness.hpp"
#include "switchkit/delta_svd.hpp"
#include "switchkit/errors.hpp"
#include "switchkit/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace switchkit {

namespace {

using eigen_row_major_f =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using map_const_f = Eigen::Map<const eigen_row_major_f>;

// Orthonormal columns from a seeded Gaussian draw (thin Q of its QR).
Eigen::MatrixXd random_orthonormal(seeded_rng & rng, int64_t rows, int64_t cols) {
    Eigen::MatrixXd g(rows, cols);
    for (int64_t i = 0; i < rows; ++i) {
        for (int64_t j = 0; j < cols; ++j) {
            g(i, j) = rng.gaussian();
        }
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    return qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
}

Eigen::MatrixXd planted_component(seeded_rng & rng, int64_t n, int64_t m, int64_t rank,
                                  double scale) {
    if (rank == 0) {
        return Eigen::MatrixXd::Zero(n, m);
    }
    std::vector<double> sigma((std::size_t)rank);
    for (auto & s : sigma) {
        s = rng.uniform(0.8, 1.0) * scale;
    }
    std::sort(sigma.begin(), sigma.end(), std::greater<>());
    const Eigen::MatrixXd u = random_orthonormal(rng, n, rank);
    const Eigen::MatrixXd v = random_orthonormal(rng, m, rank);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, m);
    for (int64_t i = 0; i < rank; ++i) {
        out += sigma[(std::size_t)i] * u.col(i) * v.col(i).transpose();
    }
    return out;
}

matrix to_matrix(const Eigen::MatrixXd & a) {
    matrix out(a.rows(), a.cols());
    for (int64_t i = 0; i < a.rows(); ++i) {
        for (int64_t j = 0; j < a.cols(); ++j) {
            out.at(i, j) = (float)a(i, j);
        }
    }
    return out;
}

} // namespace

void planted_spec::validate() const {
    if (n < 1 || m < 1) {
        throw data_error("planted spec: dims must be positive");
    }
    if (rank_over < 0 || rank_reason < 0 || rank_over + rank_reason > std::min(n, m)) {
        throw data_error("planted spec: rank_over + rank_reason must fit within min(n,m)");
    }
    if (!(scale_over > 0.0f) || !(scale_reason > 0.0f)) {
        throw data_error("planted spec: scales must be positive");
    }
    if (scale_over / scale_reason < 2.0f) {
        throw data_error("planted spec: scale_over / scale_reason must be at least 2");
    }
}

planted_delta plant_delta(const planted_spec & spec) {
    spec.validate();
    seeded_rng rng(spec.seed);
    const Eigen::MatrixXd o = planted_component(rng, spec.n, spec.m, spec.rank_over,
                                                (double)spec.scale_over);
    const Eigen::MatrixXd r = planted_component(rng, spec.n, spec.m, spec.rank_reason,
                                                (double)spec.scale_reason);
    planted_delta out;
    out.o = to_matrix(o);
    out.r = to_matrix(r);
    out.d = to_matrix(o + r);
    return out;
}

float recovery_error(const matrix & l, const matrix & o) {
    if (!l.same_shape(o)) {
        throw data_error("recovery_error: shape mismatch");
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < l.values.size(); ++i) {
        const double d = (double)l.values[i] - (double)o.values[i];
        num += d * d;
        den += (double)o.values[i] * (double)o.values[i];
    }
    if (den == 0.0) {
        return std::numeric_limits<float>::infinity();
    }
    return (float)std::sqrt(num / den);
}

recovery_report run_planted_experiment(const planted_spec & spec, const rank_policy & policy) {
    const planted_delta planted = plant_delta(spec);
    const spectral_decomposition dec = svd(planted.d, "planted");
    const energy_profile profile = compute_energy_profile("planted", dec.s);
    const int64_t selected = select_rank(profile, policy);
    int64_t positive = 0;
    while (positive < dec.k && dec.s[(std::size_t)positive] > 0.0f) {
        ++positive;
    }
    const int64_t r = std::min(selected, positive);

    matrix l(planted.d.rows, planted.d.cols);
    if (r >= 1) {
        auto [u_factor, v_factor] = build_factors(truncate(dec, r));
        l = materialize(u_factor, v_factor);
    }

    recovery_report report;
    report.selected_r = r;
    report.rel_error_over = recovery_error(l, planted.o);
    report.rel_error_delta = recovery_error(l, planted.d);
    report.tail_at_r = profile.degenerate ? 0.0f : (float)profile.tail[(std::size_t)r];
    return report;
}

std::pair<toy_model, toy_model> build_toy_stack(uint64_t seed, int64_t dim, int64_t depth) {
    if (dim < 1 || depth < 1) {
        throw data_error("toy stack needs dim >= 1 and depth >= 1");
    }
    seeded_rng rng(seed);
    const double base_scale = 1.0 / std::sqrt((double)dim);
    const double perturb_scale = 0.2 / std::sqrt((double)dim);

    toy_model base;
    toy_model reasoning;
    base.dim = reasoning.dim = dim;
    for (int64_t layer = 0; layer < depth; ++layer) {
        matrix w(dim, dim);
        for (auto & v : w.values) {
            v = (float)(rng.gaussian() * base_scale);
        }
        matrix w_r = w;
        for (auto & v : w_r.values) {
            v += (float)(rng.gaussian() * perturb_scale);
        }
        base.layers.push_back(std::move(w));
        reasoning.layers.push_back(std::move(w_r));
    }
    return {std::move(base), std::move(reasoning)};
}

std::vector<float> toy_forward(const toy_model & model, std::span<const float> x) {
    if ((int64_t)x.size() != model.dim) {
        throw data_error("toy_forward: input size does not match model dim");
    }
    Eigen::VectorXf v = Eigen::Map<const Eigen::VectorXf>(x.data(), (int64_t)x.size());
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const matrix & w = model.layers[i];
        v = map_const_f(w.values.data(), w.rows, w.cols) * v;
        if (i + 1 < model.layers.size()) {
            v = v.array().tanh();
        }
    }
    return {v.data(), v.data() + v.size()};
}

float end_to_end_check(uint64_t seed, int64_t dim, int64_t depth, int64_t probe_batch) {
    auto [base, reasoning] = build_toy_stack(seed, dim, depth);

    // full-spectrum adapter per layer, merged back at alpha = 1
    toy_model merged;
    merged.dim = dim;
    for (int64_t layer = 0; layer < depth; ++layer) {
        matrix delta = base.layers[(std::size_t)layer];
        for (std::size_t i = 0; i < delta.values.size(); ++i) {
            delta.values[i] -= reasoning.layers[(std::size_t)layer].values[i];
        }
        const spectral_decomposition dec = svd(delta, "toy");
        int64_t positive = 0;
        while (positive < dec.k && dec.s[(std::size_t)positive] > 0.0f) {
            ++positive;
        }
        matrix w = reasoning.layers[(std::size_t)layer];
        if (positive >= 1) {
            auto [u_factor, v_factor] = build_factors(truncate(dec, positive));
            const matrix l = materialize(u_factor, v_factor);
            for (std::size_t i = 0; i < w.values.size(); ++i) {
                w.values[i] += l.values[i];
            }
        }
        merged.layers.push_back(std::move(w));
    }

    seeded_rng probe_rng(seed ^ 0x9e3779b97f4a7c15ull);
    float worst = 0.0f;
    std::vector<float> x((std::size_t)dim);
    for (int64_t b = 0; b < probe_batch; ++b) {
        for (auto & v : x) {
            v = (float)probe_rng.gaussian();
        }
        const auto out_base = toy_forward(base, x);
        const auto out_merged = toy_forward(merged, x);
        for (std::size_t i = 0; i < out_base.size(); ++i) {
            worst = std::max(worst, std::fabs(out_base[i] - out_merged[i]));
        }
    }
    return worst;
}

} // namespace switchkit
