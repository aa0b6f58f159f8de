// Copyright (c) 2026 switchkit contributors
// SPDX-License-Identifier: Apache-2.0

#include "switchkit/delta_svd.hpp"
#include "switchkit/errors.hpp"

#include <Eigen/Dense>

#include <fnmatch.h>

#include <algorithm>
#include <cmath>

namespace switchkit {

namespace {

using eigen_row_major_f =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using map_const_f = Eigen::Map<const eigen_row_major_f>;
using map_f = Eigen::Map<eigen_row_major_f>;

bool any_glob_match(const std::vector<std::string> & globs, const std::string & name) {
    for (const auto & g : globs) {
        if (glob_match(g, name)) {
            return true;
        }
    }
    return false;
}

} // namespace

bool glob_match(const std::string & pattern, const std::string & name) {
    return ::fnmatch(pattern.c_str(), name.c_str(), 0) == 0;
}

const std::vector<std::string> & default_exclude_globs() {
    static const std::vector<std::string> globs = {
        "*embed*",
        "*lm_head*",
        "output.weight",
    };
    return globs;
}

std::vector<layer_pair> pair_layers(const archive_index & base, const archive_index & reasoning,
                                    const std::vector<std::string> & include,
                                    const std::vector<std::string> & exclude,
                                    const pairing_options & opts,
                                    std::vector<std::string> * warnings) {
    std::vector<layer_pair> pairs;
    for (const auto & meta : base.header) {
        const tensor_meta * other = reasoning.find(meta.name);
        if (!other) {
            continue;
        }
        if (!include.empty() && !any_glob_match(include, meta.name)) {
            continue;
        }
        if (any_glob_match(exclude, meta.name)) {
            continue;
        }
        if (!meta.is_matrix() || !other->is_matrix()) {
            continue;
        }
        if (meta.shape != other->shape) {
            if (opts.skip_mismatched) {
                if (warnings) {
                    warnings->push_back("skipping '" + meta.name + "': shape mismatch between checkpoints");
                }
                continue;
            }
            throw data_error("layer '" + meta.name + "' has mismatched shapes [" +
                             std::to_string(meta.shape[0]) + "," + std::to_string(meta.shape[1]) +
                             "] vs [" + std::to_string(other->shape[0]) + "," +
                             std::to_string(other->shape[1]) + "]");
        }
        pairs.push_back({meta.name, meta.shape[0], meta.shape[1], &base, &reasoning});
    }
    std::sort(pairs.begin(), pairs.end(),
              [](const layer_pair & a, const layer_pair & b) { return a.name < b.name; });
    if (pairs.empty()) {
        throw data_error("empty selection: no layers matched in both checkpoints");
    }
    return pairs;
}

delta_matrix compute_delta(const layer_pair & pair) {
    matrix d = read_matrix(*pair.base, pair.name);
    {
        const matrix r = read_matrix(*pair.reasoning, pair.name);
        for (std::size_t i = 0; i < d.values.size(); ++i) {
            d.values[i] -= r.values[i];
        }
    }
    if (!all_finite(d)) {
        throw numeric_error("non-finite delta for layer '" + pair.name + "'");
    }
    return {pair.name, std::move(d)};
}

spectral_decomposition svd(const matrix & m, const std::string & layer) {
    spectral_decomposition dec;
    dec.k = std::min(m.rows, m.cols);
    if (dec.k == 0) {
        dec.u = matrix(m.rows, 0);
        dec.v = matrix(m.cols, 0);
        return dec;
    }
    // fp64 internally for orthogonality and residual quality, fp32 out
    const Eigen::MatrixXd a =
        map_const_f(m.values.data(), m.rows, m.cols).cast<double>();
    Eigen::BDCSVD<Eigen::MatrixXd> solver(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (solver.info() != Eigen::Success) {
        throw numeric_error("svd failed to converge" + (layer.empty() ? "" : " for layer '" + layer + "'"));
    }
    dec.u = matrix(m.rows, dec.k);
    dec.v = matrix(m.cols, dec.k);
    dec.s.resize((std::size_t)dec.k);
    map_f(dec.u.values.data(), m.rows, dec.k) = solver.matrixU().cast<float>();
    map_f(dec.v.values.data(), m.cols, dec.k) = solver.matrixV().cast<float>();
    for (int64_t i = 0; i < dec.k; ++i) {
        dec.s[(std::size_t)i] = std::max(0.0f, (float)solver.singularValues()[i]);
    }
    return dec;
}

spectral_decomposition svd(const delta_matrix & delta) {
    return svd(delta.d, delta.layer);
}

spectral_decomposition truncate(const spectral_decomposition & dec, int64_t r) {
    if (r < 0 || r > dec.k) {
        throw data_error("truncation rank " + std::to_string(r) + " out of range [0," +
                         std::to_string(dec.k) + "]");
    }
    spectral_decomposition out;
    out.k = r;
    out.s.assign(dec.s.begin(), dec.s.begin() + r);
    out.u = matrix(dec.u.rows, r);
    out.v = matrix(dec.v.rows, r);
    for (int64_t i = 0; i < dec.u.rows; ++i) {
        for (int64_t j = 0; j < r; ++j) {
            out.u.at(i, j) = dec.u.at(i, j);
        }
    }
    for (int64_t i = 0; i < dec.v.rows; ++i) {
        for (int64_t j = 0; j < r; ++j) {
            out.v.at(i, j) = dec.v.at(i, j);
        }
    }
    return out;
}

std::pair<matrix, matrix> build_factors(const spectral_decomposition & dec) {
    const int64_t n = dec.u.rows;
    const int64_t m = dec.v.rows;
    const int64_t r = dec.k;
    matrix u_factor(n, r);
    matrix v_factor(r, m);
    for (int64_t j = 0; j < r; ++j) {
        const float sj = dec.s[(std::size_t)j];
        if (!(sj > 0.0f)) {
            throw data_error("retained zero singular value at index " + std::to_string(j) +
                             "; rank selection must drop zero modes");
        }
        const float root = std::sqrt(sj);
        for (int64_t i = 0; i < n; ++i) {
            u_factor.at(i, j) = dec.u.at(i, j) * root;
        }
        for (int64_t i = 0; i < m; ++i) {
            v_factor.at(j, i) = dec.v.at(i, j) * root;
        }
    }
    return {std::move(u_factor), std::move(v_factor)};
}

matrix materialize(const matrix & u_factor, const matrix & v_factor) {
    if (u_factor.cols != v_factor.rows) {
        throw data_error("factor shapes do not compose: " + std::to_string(u_factor.cols) +
                         " vs " + std::to_string(v_factor.rows));
    }
    matrix out(u_factor.rows, v_factor.cols);
    if (out.size() == 0) {
        return out;
    }
    if (u_factor.cols == 0) {
        return out; // rank 0 materializes to the zero matrix
    }
    map_f(out.values.data(), out.rows, out.cols) =
        map_const_f(u_factor.values.data(), u_factor.rows, u_factor.cols) *
        map_const_f(v_factor.values.data(), v_factor.rows, v_factor.cols);
    return out;
}

} // namespace switchkit
