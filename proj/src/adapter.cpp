// Copyright (c) 2026 switchkit contributors
// SPDX-License-Identifier: Apache-2.0

#include "switchkit/adapter.hpp"
#include "switchkit/errors.hpp"
#include "switchkit/parallel.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>

namespace switchkit {

namespace fs = std::filesystem;

namespace {

using eigen_row_major_f =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using map_const_f = Eigen::Map<const eigen_row_major_f>;
using map_f = Eigen::Map<eigen_row_major_f>;

constexpr const char * k_u_suffix = ".unlearn_u";
constexpr const char * k_v_suffix = ".unlearn_v";

std::string format_double(double v, const char * fmt = "%.9g") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, v);
    return buf;
}

void validate_entry(const adapter_entry & e) {
    if (e.r < 1) {
        throw data_error("adapter entry '" + e.layer + "' has rank " + std::to_string(e.r) +
                         "; rank-0 layers must be dropped");
    }
    if (e.u_factor.cols != e.r || e.v_factor.rows != e.r) {
        throw data_error("adapter entry '" + e.layer + "': factor shapes disagree with rank " +
                         std::to_string(e.r));
    }
    if (e.r > std::min(e.u_factor.rows, e.v_factor.cols)) {
        throw data_error("adapter entry '" + e.layer + "': rank exceeds min(N,M)");
    }
}

std::string ranks_json(const low_rank_adapter & adapter) {
    nlohmann::json ranks = nlohmann::json::object();
    for (const auto & [name, e] : adapter.entries) {
        ranks[name] = e.r;
    }
    return ranks.dump();
}

std::string require_digest(const archive_index & index) {
    return index.digest.empty() ? file_digest(index.path) : index.digest;
}

// Streams src into out_path, rewriting adapted layers as
// W + alpha_signed * (u_factor * v_factor) and copying everything else
// bit-exactly. Windows of consecutive adapted layers are computed in
// parallel but written in header order, so output bytes are independent
// of opts.jobs.
archive_index apply_factors(const archive_index & src, const low_rank_adapter & adapter,
                            float alpha_signed, const fs::path & out_path,
                            const merge_options & opts,
                            const std::map<std::string, std::string> & out_metadata) {
    for (const auto & [name, e] : adapter.entries) {
        const tensor_meta * meta = src.find(name);
        if (!meta) {
            throw data_error("layer '" + name + "' in adapter missing from checkpoint");
        }
        if (!meta->is_matrix() || meta->shape[0] != e.u_factor.rows ||
            meta->shape[1] != e.v_factor.cols) {
            throw data_error("layer '" + name + "': adapter factors do not match checkpoint shape");
        }
    }

    archive_writer writer(out_path);
    writer.set_metadata(out_metadata);

    const int jobs = std::max(1, opts.jobs);
    std::size_t i = 0;
    while (i < src.header.size()) {
        const tensor_meta & meta = src.header[i];
        if (adapter.entries.find(meta.name) == adapter.entries.end()) {
            const auto raw = read_raw(src, meta);
            writer.add_raw(meta.name, meta.dt, meta.shape, raw);
            ++i;
            continue;
        }
        // window of consecutive adapted layers, at most `jobs` in flight
        std::size_t end = i;
        while (end < src.header.size() && end - i < (std::size_t)jobs &&
               adapter.entries.find(src.header[end].name) != adapter.entries.end()) {
            ++end;
        }
        std::vector<matrix> merged(end - i);
        parallel_for((int64_t)(end - i), jobs, [&](int64_t w) {
            const tensor_meta & m = src.header[i + (std::size_t)w];
            const adapter_entry & e = adapter.entries.at(m.name);
            matrix values = read_matrix(src, m.name);
            map_f(values.values.data(), values.rows, values.cols).noalias() +=
                alpha_signed *
                (map_const_f(e.u_factor.values.data(), e.u_factor.rows, e.u_factor.cols) *
                 map_const_f(e.v_factor.values.data(), e.v_factor.rows, e.v_factor.cols));
            if (!all_finite(values)) {
                throw numeric_error("non-finite result while applying adapter to layer '" +
                                    m.name + "'");
            }
            merged[(std::size_t)w] = std::move(values);
        });
        for (std::size_t w = 0; w < merged.size(); ++w) {
            const tensor_meta & m = src.header[i + w];
            // bf16 sources are written back as fp32; fp16 stays fp16
            const dtype store = m.dt == dtype::f16 ? dtype::f16 : dtype::f32;
            writer.add_matrix(m.name, merged[w], store);
            merged[w] = matrix();
        }
        i = end;
    }
    return writer.finish();
}

void check_alpha(float alpha, const merge_options & opts) {
    if (!(alpha >= 0.0f && alpha <= opts.alpha_max)) {
        throw data_error("alpha " + format_double(alpha) + " outside [0, " +
                         format_double(opts.alpha_max) + "]");
    }
}

} // namespace

std::string size_report::display() const {
    return format_double(relative_size, "%.2f") + "×";
}

std::map<std::string, std::string> policy_metadata(const rank_policy & policy) {
    std::map<std::string, std::string> meta;
    meta["policy"] = policy_name(policy.kind);
    switch (policy.kind) {
        case rank_policy_kind::energy_threshold:
            meta["tau"] = format_double(policy.tau, "%.17g");
            break;
        case rank_policy_kind::fixed_ratio:
            meta["rho"] = format_double(policy.rho, "%.17g");
            break;
        case rank_policy_kind::fixed_rank:
            meta["rank"] = std::to_string(policy.r_fixed);
            break;
    }
    if (policy.strict_inequality) {
        meta["selection_inequality"] = "strict";
    }
    if (policy.legacy_indexing) {
        meta["selection_indexing"] = "legacy";
    }
    return meta;
}

low_rank_adapter assemble_adapter(std::vector<adapter_entry> factors,
                                  const std::string & base_digest,
                                  const std::string & reasoning_digest,
                                  const rank_policy & policy) {
    low_rank_adapter adapter;
    for (auto & e : factors) {
        validate_entry(e);
        const std::string name = e.layer;
        if (!adapter.entries.emplace(name, std::move(e)).second) {
            throw data_error("duplicate layer '" + name + "' in adapter assembly");
        }
    }
    adapter.metadata = policy_metadata(policy);
    adapter.metadata["sign_convention"] = k_sign_convention;
    adapter.metadata["base_digest"] = base_digest;
    adapter.metadata["reasoning_digest"] = reasoning_digest;
    adapter.metadata["ranks"] = ranks_json(adapter);
    adapter.metadata["tool_version"] = k_tool_version;
    return adapter;
}

archive_index save_adapter(const low_rank_adapter & adapter, const fs::path & path, dtype store) {
    if (adapter.metadata.find("sign_convention") == adapter.metadata.end()) {
        throw data_error("refusing to save an adapter without sign_convention metadata");
    }
    archive_writer writer(path);
    for (const auto & [name, e] : adapter.entries) {
        validate_entry(e);
        writer.add_matrix(name + k_u_suffix, e.u_factor, store);
        writer.add_matrix(name + k_v_suffix, e.v_factor, store);
    }
    writer.set_metadata(adapter.metadata);
    return writer.finish();
}

low_rank_adapter load_adapter(const fs::path & path) {
    const archive_index index = open_archive(path);

    auto meta_it = index.metadata.find("sign_convention");
    if (meta_it == index.metadata.end()) {
        throw data_error("adapter '" + path.string() +
                         "' has no sign_convention metadata; refusing to merge an ambiguous adapter");
    }
    if (meta_it->second != k_sign_convention) {
        throw data_error("adapter '" + path.string() + "' uses sign convention '" +
                         meta_it->second + "'; this tool only applies '" +
                         std::string(k_sign_convention) + "' adapters");
    }

    low_rank_adapter adapter;
    adapter.metadata = index.metadata;
    adapter.archive_digest = index.digest;

    std::map<std::string, std::pair<bool, bool>> seen; // layer -> (has_u, has_v)
    for (const auto & t : index.header) {
        if (t.name.ends_with(k_u_suffix)) {
            seen[t.name.substr(0, t.name.size() - std::string(k_u_suffix).size())].first = true;
        } else if (t.name.ends_with(k_v_suffix)) {
            seen[t.name.substr(0, t.name.size() - std::string(k_v_suffix).size())].second = true;
        } else {
            throw data_error("unexpected tensor '" + t.name + "' in adapter file");
        }
    }
    for (const auto & [layer, uv] : seen) {
        if (!uv.first || !uv.second) {
            throw data_error("incomplete entry '" + layer + "': missing " +
                             (uv.first ? "unlearn_v" : "unlearn_u") + " tensor");
        }
        adapter_entry e;
        e.layer = layer;
        e.u_factor = read_matrix(index, layer + k_u_suffix);
        e.v_factor = read_matrix(index, layer + k_v_suffix);
        if (e.u_factor.cols != e.v_factor.rows) {
            throw data_error("entry '" + layer + "': factor ranks disagree (" +
                             std::to_string(e.u_factor.cols) + " vs " +
                             std::to_string(e.v_factor.rows) + ")");
        }
        e.r = e.u_factor.cols;
        validate_entry(e);
        adapter.entries.emplace(layer, std::move(e));
    }

    // cross-check the recorded rank map when present
    auto ranks_it = adapter.metadata.find("ranks");
    if (ranks_it != adapter.metadata.end()) {
        nlohmann::json ranks;
        try {
            ranks = nlohmann::json::parse(ranks_it->second);
        } catch (const nlohmann::json::parse_error & e) {
            throw data_error("adapter metadata 'ranks' is not valid JSON: " + std::string(e.what()));
        }
        for (const auto & [layer, e] : adapter.entries) {
            if (!ranks.contains(layer) || !ranks[layer].is_number_integer() ||
                ranks[layer].get<int64_t>() != e.r) {
                throw data_error("adapter metadata ranks disagree with stored factors for '" +
                                 layer + "'");
            }
        }
    }
    return adapter;
}

archive_index merge(const archive_index & reasoning, const low_rank_adapter & adapter, float alpha,
                    const fs::path & out_path, const merge_options & opts) {
    check_alpha(alpha, opts);
    if (!opts.force) {
        auto it = adapter.metadata.find("reasoning_digest");
        if (it == adapter.metadata.end()) {
            throw data_error("adapter records no reasoning_digest; pass force to merge anyway");
        }
        const std::string digest = require_digest(reasoning);
        if (it->second != digest) {
            throw data_error("digest mismatch: adapter was extracted from a checkpoint with digest " +
                             it->second + " but this checkpoint has " + digest +
                             "; pass force to merge anyway");
        }
    }
    std::map<std::string, std::string> metadata = reasoning.metadata;
    metadata["alpha"] = format_double(alpha);
    if (!adapter.archive_digest.empty()) {
        metadata["adapter_digest"] = adapter.archive_digest;
    }
    return apply_factors(reasoning, adapter, alpha, out_path, opts, metadata);
}

archive_index unmerge(const archive_index & merged, const low_rank_adapter & adapter, float alpha,
                      const fs::path & out_path, const merge_options & opts) {
    check_alpha(alpha, opts);
    if (!opts.force) {
        auto it = merged.metadata.find("adapter_digest");
        if (it == merged.metadata.end()) {
            throw data_error("checkpoint records no adapter_digest; pass force to unmerge anyway");
        }
        if (adapter.archive_digest.empty()) {
            throw data_error("adapter digest unknown (not loaded from a file); pass force to unmerge anyway");
        }
        if (it->second != adapter.archive_digest) {
            throw data_error("wrong adapter: checkpoint was merged with digest " + it->second +
                             " but this adapter has " + adapter.archive_digest);
        }
    }
    std::map<std::string, std::string> metadata = merged.metadata;
    metadata.erase("alpha");
    metadata.erase("adapter_digest");
    return apply_factors(merged, adapter, -alpha, out_path, opts, metadata);
}

size_report make_size_report(const low_rank_adapter & adapter, const archive_index & reasoning) {
    size_report report;
    for (const auto & [name, e] : adapter.entries) {
        size_report_row row;
        row.layer = name;
        row.rows = e.u_factor.rows;
        row.cols = e.v_factor.cols;
        row.r = e.r;
        row.params = (uint64_t)e.r * (uint64_t)(row.rows + row.cols);
        report.adapter_params += row.params;
        report.per_layer.push_back(std::move(row));
    }
    report.model_params = reasoning.total_params();
    report.relative_size =
        report.model_params == 0
            ? 1.0
            : 1.0 + (double)report.adapter_params / (double)report.model_params;
    return report;
}

extract_result extract_adapter(const archive_index & base, const archive_index & reasoning,
                               const extract_options & opts) {
    extract_result result;
    const auto pairs = pair_layers(base, reasoning, opts.include, opts.exclude,
                                   {.skip_mismatched = opts.skip_mismatched}, &result.warnings);

    std::vector<layer_extract_stats> stats(pairs.size());
    std::vector<std::optional<adapter_entry>> entries(pairs.size());

    parallel_for((int64_t)pairs.size(), std::max(1, opts.jobs), [&](int64_t i) {
        const layer_pair & pair = pairs[(std::size_t)i];
        spectral_decomposition dec;
        {
            const delta_matrix delta = compute_delta(pair);
            dec = svd(delta);
        }
        const energy_profile profile = compute_energy_profile(pair.name, dec.s);
        const int64_t selected = select_rank(profile, opts.policy);
        int64_t positive = 0;
        while (positive < dec.k && dec.s[(std::size_t)positive] > 0.0f) {
            ++positive;
        }
        const int64_t r = std::min(selected, positive);

        layer_extract_stats & st = stats[(std::size_t)i];
        st.name = pair.name;
        st.rows = pair.rows;
        st.cols = pair.cols;
        st.k = dec.k;
        st.rank = r;
        st.tail_at_rank = profile.degenerate ? 0.0 : profile.tail[(std::size_t)r];
        st.energy_retained = 1.0 - st.tail_at_rank;

        if (r >= 1) {
            auto [u_factor, v_factor] = build_factors(truncate(dec, r));
            entries[(std::size_t)i] =
                adapter_entry{pair.name, r, std::move(u_factor), std::move(v_factor)};
        }
    });

    std::vector<adapter_entry> kept;
    for (auto & e : entries) {
        if (e) {
            kept.push_back(std::move(*e));
        }
    }
    result.adapter = assemble_adapter(std::move(kept), require_digest(base),
                                      require_digest(reasoning), opts.policy);
    result.layers = std::move(stats);
    return result;
}

} // namespace switchkit
