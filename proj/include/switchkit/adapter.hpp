// Copyright (c) 2026 switchkit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "switchkit/delta_svd.hpp"
#include "switchkit/matrix.hpp"
#include "switchkit/rank_policy.hpp"
#include "switchkit/tensor_archive.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace switchkit {

inline constexpr const char * k_tool_version = "0.1.0";
inline constexpr const char * k_sign_convention = "base_minus_reasoning";

// One adapted layer: L = u_factor (N x r) * v_factor (r x M), rank r >= 1.
struct adapter_entry {
    std::string layer;
    int64_t r = 0;
    matrix u_factor;
    matrix v_factor;
};

// The low-rank unlearning adapter for a checkpoint pair. metadata carries
// the provenance keys persisted to disk (sign_convention, policy, digests,
// per-layer ranks, tool_version).
struct low_rank_adapter {
    std::map<std::string, adapter_entry> entries;
    std::map<std::string, std::string> metadata;
    std::string archive_digest; // digest of the adapter file, "" until saved/loaded
};

struct size_report_row {
    std::string layer;
    int64_t rows = 0;
    int64_t cols = 0;
    int64_t r = 0;
    uint64_t params = 0; // r * (rows + cols)
};

struct size_report {
    uint64_t adapter_params = 0;
    uint64_t model_params = 0;
    double relative_size = 1.0; // 1 + adapter/model
    std::vector<size_report_row> per_layer;

    // Two-decimal display string, e.g. "1.11x".
    std::string display() const;
};

std::map<std::string, std::string> policy_metadata(const rank_policy & policy);

low_rank_adapter assemble_adapter(std::vector<adapter_entry> factors,
                                  const std::string & base_digest,
                                  const std::string & reasoning_digest,
                                  const rank_policy & policy);

// Adapter container layout: `{layer}.unlearn_u` (N x r) and
// `{layer}.unlearn_v` (r x M) tensors plus the metadata map.
archive_index save_adapter(const low_rank_adapter & adapter, const std::filesystem::path & path,
                           dtype store = dtype::f32);

low_rank_adapter load_adapter(const std::filesystem::path & path);

struct merge_options {
    bool force = false;     // skip digest checks
    float alpha_max = 1.0f; // upper bound for alpha
    int jobs = 1;           // layer-level parallelism
};

// Writes a new checkpoint with W' = W + alpha * (u_factor * v_factor) on
// adapted layers; all other tensors are copied bit-exactly. The source
// archive is never mutated.
archive_index merge(const archive_index & reasoning, const low_rank_adapter & adapter, float alpha,
                    const std::filesystem::path & out_path, const merge_options & opts = {});

// Inverse of merge: W = W' - alpha * (u_factor * v_factor). Verifies the
// adapter digest recorded by merge unless opts.force.
archive_index unmerge(const archive_index & merged, const low_rank_adapter & adapter, float alpha,
                      const std::filesystem::path & out_path, const merge_options & opts = {});

size_report make_size_report(const low_rank_adapter & adapter, const archive_index & reasoning);

// --- extraction pipeline -------------------------------------------------

struct extract_options {
    rank_policy policy;
    std::vector<std::string> include;
    std::vector<std::string> exclude; // callers wanting defaults pass default_exclude_globs()
    bool skip_mismatched = false;
    int jobs = 1;
};

struct layer_extract_stats {
    std::string name;
    int64_t rows = 0;
    int64_t cols = 0;
    int64_t k = 0;
    int64_t rank = 0;        // effective kept rank (zero modes excluded)
    double tail_at_rank = 0; // residual energy fraction after keeping `rank`
    double energy_retained = 0;
};

struct extract_result {
    low_rank_adapter adapter;
    std::vector<layer_extract_stats> layers; // name-sorted, includes rank-0 layers
    std::vector<std::string> warnings;
};

// Full per-layer pipeline: delta -> svd -> energy profile -> rank
// selection -> factors. Rank-0 layers are reported but omitted from the
// adapter. Layer order and results are independent of opts.jobs.
extract_result extract_adapter(const archive_index & base, const archive_index & reasoning,
                               const extract_options & opts);

} // namespace switchkit
