// Copyright (c) 2026 switchkit contributors
// SPDX-License-Identifier: Apache-2.0

#include "switchkit/cli.hpp"
#include "switchkit/adapter.hpp"
#include "switchkit/delta_svd.hpp"
#include "switchkit/errors.hpp"
#include "switchkit/parallel.hpp"
#include "switchkit/rank_policy.hpp"
#include "switchkit/switch_runtime.hpp"
#include "switchkit/tensor_archive.hpp"
#include "switchkit/toy_harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace switchkit {

namespace {

using nlohmann::json;

void log_config(std::ostream & err, const std::string & command, const json & resolved) {
    err << "config " << command << ": " << resolved.dump() << "\n";
}

void log_warnings(std::ostream & err, const std::vector<std::string> & warnings) {
    for (const auto & w : warnings) {
        err << "warning: " << w << "\n";
    }
}

json layer_stats_json(const std::vector<layer_extract_stats> & layers) {
    json rows = json::array();
    for (const auto & st : layers) {
        json row;
        row["name"] = st.name;
        row["rows"] = st.rows;
        row["cols"] = st.cols;
        row["k"] = st.k;
        row["rank"] = st.rank;
        row["energy_retained"] = st.energy_retained;
        row["tail_at_rank"] = st.tail_at_rank;
        row["adapter_params"] = st.rank * (st.rows + st.cols);
        rows.push_back(std::move(row));
    }
    return rows;
}

json size_report_json(const size_report & report) {
    json out;
    out["adapter_params"] = report.adapter_params;
    out["model_params"] = report.model_params;
    out["relative_size"] = report.relative_size;
    out["relative_size_display"] = report.display();
    return out;
}

struct extract_args {
    std::string base;
    std::string reasoning;
    std::string out_path;
    double tau = 0.6;
    double fixed_ratio = 0.0;
    int64_t fixed_rank = -1;
    std::vector<std::string> include;
    std::vector<std::string> exclude;
    bool no_default_excludes = false;
    bool skip_mismatched = false;
    bool strict_tail = false;
    bool legacy_indexing = false;
    std::string store_dtype = "fp32";

    rank_policy policy(const CLI::App * cmd) const {
        rank_policy p;
        if (cmd->count("--fixed-ratio")) {
            p = rank_policy::ratio(fixed_ratio);
        } else if (cmd->count("--rank")) {
            p = rank_policy::fixed(fixed_rank);
        } else {
            p = rank_policy::energy(tau);
        }
        p.strict_inequality = strict_tail;
        p.legacy_indexing = legacy_indexing;
        return p;
    }

    std::vector<std::string> effective_excludes() const {
        if (!exclude.empty()) {
            return exclude;
        }
        if (no_default_excludes) {
            return {};
        }
        return default_exclude_globs();
    }
};

void add_policy_flags(CLI::App * cmd, extract_args & args) {
    auto * tau_opt = cmd->add_option("--tau", args.tau,
                                     "energy threshold: keep ranks while the residual tail "
                                     "energy stays >= tau")
                         ->capture_default_str();
    auto * ratio_opt = cmd->add_option("--fixed-ratio", args.fixed_ratio,
                                       "keep round(ratio * k) ranks per layer");
    auto * rank_opt = cmd->add_option("--rank", args.fixed_rank, "keep a fixed rank per layer");
    tau_opt->excludes(ratio_opt)->excludes(rank_opt);
    ratio_opt->excludes(tau_opt)->excludes(rank_opt);
    rank_opt->excludes(tau_opt)->excludes(ratio_opt);
    cmd->add_flag("--strict-tail", args.strict_tail,
                  "require the residual to stay strictly above tau");
    cmd->add_flag("--legacy-indexing", args.legacy_indexing,
                  "threshold the 1-indexed residual curve e(r) instead of tail[r]");
}

void add_selection_flags(CLI::App * cmd, extract_args & args) {
    cmd->add_option("--include", args.include, "glob of layer names to include (repeatable)");
    cmd->add_option("--exclude", args.exclude,
                    "glob of layer names to exclude (repeatable; replaces the default "
                    "embedding/head excludes)");
    cmd->add_flag("--no-default-excludes", args.no_default_excludes,
                  "pair every 2-D layer, including embeddings and heads");
    cmd->add_flag("--skip-mismatched", args.skip_mismatched,
                  "warn and skip shape-mismatched layers instead of failing");
}

int run_extract(const CLI::App * cmd, const extract_args & args, int jobs, std::ostream & out,
                std::ostream & err) {
    const rank_policy policy = args.policy(cmd);
    json cfg;
    cfg["base"] = args.base;
    cfg["reasoning"] = args.reasoning;
    cfg["out"] = args.out_path;
    cfg["policy"] = policy_metadata(policy);
    cfg["include"] = args.include;
    cfg["exclude"] = args.effective_excludes();
    cfg["skip_mismatched"] = args.skip_mismatched;
    cfg["store_dtype"] = args.store_dtype;
    cfg["jobs"] = jobs;
    log_config(err, "extract", cfg);

    const archive_index base = open_archive(args.base);
    const archive_index reasoning = open_archive(args.reasoning);

    extract_options opts;
    opts.policy = policy;
    opts.include = args.include;
    opts.exclude = args.effective_excludes();
    opts.skip_mismatched = args.skip_mismatched;
    opts.jobs = jobs;

    extract_result result = extract_adapter(base, reasoning, opts);
    log_warnings(err, result.warnings);

    const dtype store = args.store_dtype == "fp16" ? dtype::f16 : dtype::f32;
    const archive_index saved = save_adapter(result.adapter, args.out_path, store);
    result.adapter.archive_digest = saved.digest;

    const size_report report = make_size_report(result.adapter, reasoning);

    json summary;
    summary["command"] = "extract";
    summary["out"] = args.out_path;
    summary["policy"] = policy_metadata(policy);
    summary["base_digest"] = base.digest;
    summary["reasoning_digest"] = reasoning.digest;
    summary["adapter_digest"] = saved.digest;
    summary["layers"] = layer_stats_json(result.layers);
    summary["size_report"] = size_report_json(report);
    out << summary.dump(2) << "\n";
    return 0;
}

int run_inspect(const std::string & adapter_path, const std::string & format, std::ostream & out,
                std::ostream & err) {
    json cfg;
    cfg["adapter"] = adapter_path;
    cfg["format"] = format;
    log_config(err, "inspect", cfg);

    const archive_index index = open_archive(adapter_path);

    struct row {
        std::string layer;
        int64_t rows, cols, rank;
    };
    std::map<std::string, std::pair<const tensor_meta *, const tensor_meta *>> grouped;
    for (const auto & t : index.header) {
        if (t.name.ends_with(".unlearn_u")) {
            grouped[t.name.substr(0, t.name.size() - 10)].first = &t;
        } else if (t.name.ends_with(".unlearn_v")) {
            grouped[t.name.substr(0, t.name.size() - 10)].second = &t;
        } else {
            throw data_error("unexpected tensor '" + t.name + "' in adapter file");
        }
    }
    std::vector<row> rows;
    uint64_t adapter_params = 0;
    for (const auto & [layer, uv] : grouped) {
        if (!uv.first || !uv.second) {
            throw data_error("incomplete entry '" + layer + "': missing " +
                             (uv.first ? "unlearn_v" : "unlearn_u") + " tensor");
        }
        row r;
        r.layer = layer;
        r.rows = uv.first->shape[0];
        r.rank = uv.first->shape[1];
        r.cols = uv.second->shape[1];
        rows.push_back(r);
        adapter_params += (uint64_t)r.rank * (uint64_t)(r.rows + r.cols);
    }

    if (format == "csv") {
        out << "layer,rows,cols,rank,params\n";
        for (const auto & r : rows) {
            out << r.layer << ',' << r.rows << ',' << r.cols << ',' << r.rank << ','
                << (uint64_t)r.rank * (uint64_t)(r.rows + r.cols) << "\n";
        }
        return 0;
    }
    json summary;
    summary["command"] = "inspect";
    summary["adapter"] = adapter_path;
    summary["digest"] = index.digest;
    summary["metadata"] = index.metadata;
    json jrows = json::array();
    for (const auto & r : rows) {
        json jr;
        jr["name"] = r.layer;
        jr["rows"] = r.rows;
        jr["cols"] = r.cols;
        jr["rank"] = r.rank;
        jr["params"] = (uint64_t)r.rank * (uint64_t)(r.rows + r.cols);
        jrows.push_back(std::move(jr));
    }
    summary["layers"] = std::move(jrows);
    summary["adapter_params"] = adapter_params;
    out << summary.dump(2) << "\n";
    return 0;
}

int run_spectrum(const extract_args & args, const std::string & layer, int jobs,
                 std::ostream & out, std::ostream & err) {
    json cfg;
    cfg["base"] = args.base;
    cfg["reasoning"] = args.reasoning;
    cfg["out"] = args.out_path;
    cfg["layer"] = layer;
    cfg["jobs"] = jobs;
    log_config(err, "spectrum", cfg);

    const archive_index base = open_archive(args.base);
    const archive_index reasoning = open_archive(args.reasoning);

    std::vector<std::string> include = args.include;
    std::vector<std::string> exclude = args.effective_excludes();
    if (!layer.empty()) {
        const tensor_meta * in_base = base.find(layer);
        const tensor_meta * in_reasoning = reasoning.find(layer);
        if (!in_base || !in_reasoning || !in_base->is_matrix() || !in_reasoning->is_matrix()) {
            throw data_error("layer '" + layer + "' is not a 2-D tensor present in both checkpoints");
        }
        include = {layer};
        exclude = {};
    }

    std::vector<std::string> warnings;
    const auto pairs = pair_layers(base, reasoning, include, exclude,
                                   {.skip_mismatched = args.skip_mismatched}, &warnings);
    log_warnings(err, warnings);

    std::vector<energy_profile> profiles(pairs.size());
    parallel_for((int64_t)pairs.size(), jobs, [&](int64_t i) {
        const delta_matrix delta = compute_delta(pairs[(std::size_t)i]);
        const spectral_decomposition dec = svd(delta);
        profiles[(std::size_t)i] = compute_energy_profile(pairs[(std::size_t)i].name, dec.s);
    });

    std::ofstream csv(args.out_path, std::ios::trunc);
    if (!csv) {
        throw data_error("unwritable path: " + args.out_path);
    }
    std::size_t total_rows = 0;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        write_spectrum_csv(csv, profiles[i], i == 0);
        total_rows += profiles[i].s.size();
    }
    csv.close();

    json summary;
    summary["command"] = "spectrum";
    summary["out"] = args.out_path;
    summary["layers"] = profiles.size();
    summary["rows"] = total_rows;
    out << summary.dump(2) << "\n";
    return 0;
}

struct merge_args {
    std::string checkpoint;
    std::string adapter;
    std::string out_path;
    double alpha = 1.0;
    bool alpha_given = false;
    double alpha_max = 1.0;
    bool force = false;
};

float clamp_alpha(const merge_args & args, std::ostream & err) {
    double a = args.alpha;
    if (a < 0.0 || a > args.alpha_max) {
        const double clamped = std::clamp(a, 0.0, args.alpha_max);
        err << "warning: alpha " << a << " clamped to " << clamped << "\n";
        a = clamped;
    }
    return (float)a;
}

int run_merge(const merge_args & args, int jobs, std::ostream & out, std::ostream & err) {
    json cfg;
    cfg["reasoning"] = args.checkpoint;
    cfg["adapter"] = args.adapter;
    cfg["out"] = args.out_path;
    cfg["alpha"] = args.alpha;
    cfg["alpha_max"] = args.alpha_max;
    cfg["force"] = args.force;
    cfg["jobs"] = jobs;
    log_config(err, "merge", cfg);

    const float alpha = clamp_alpha(args, err);
    const archive_index reasoning = open_archive(args.checkpoint);
    const low_rank_adapter adapter = load_adapter(args.adapter);

    merge_options opts;
    opts.force = args.force;
    opts.alpha_max = (float)args.alpha_max;
    opts.jobs = jobs;
    const archive_index merged = merge(reasoning, adapter, alpha, args.out_path, opts);

    json summary;
    summary["command"] = "merge";
    summary["out"] = args.out_path;
    summary["digest"] = merged.digest;
    summary["alpha"] = (double)alpha;
    summary["adapted_layers"] = adapter.entries.size();
    summary["tensors"] = merged.header.size();
    out << summary.dump(2) << "\n";
    return 0;
}

int run_unmerge(const merge_args & args, int jobs, std::ostream & out, std::ostream & err) {
    json cfg;
    cfg["merged"] = args.checkpoint;
    cfg["adapter"] = args.adapter;
    cfg["out"] = args.out_path;
    cfg["alpha_max"] = args.alpha_max;
    cfg["force"] = args.force;
    cfg["jobs"] = jobs;

    const archive_index merged = open_archive(args.checkpoint);
    const low_rank_adapter adapter = load_adapter(args.adapter);

    double alpha = args.alpha;
    if (!args.alpha_given) {
        auto it = merged.metadata.find("alpha");
        alpha = it != merged.metadata.end() ? std::strtod(it->second.c_str(), nullptr) : 1.0;
    }
    cfg["alpha"] = alpha;
    log_config(err, "unmerge", cfg);

    merge_args resolved = args;
    resolved.alpha = alpha;
    const float alpha_f = clamp_alpha(resolved, err);

    merge_options opts;
    opts.force = args.force;
    opts.alpha_max = (float)args.alpha_max;
    opts.jobs = jobs;
    const archive_index restored = unmerge(merged, adapter, alpha_f, args.out_path, opts);

    json summary;
    summary["command"] = "unmerge";
    summary["out"] = args.out_path;
    summary["digest"] = restored.digest;
    summary["alpha"] = alpha;
    summary["adapted_layers"] = adapter.entries.size();
    out << summary.dump(2) << "\n";
    return 0;
}

struct route_args {
    std::string scores_path;
    std::string texts_path;
    std::string scorer_url;
    std::string out_path;
    double threshold = 0.78;
    std::string mode = "hard";
    double alpha = 1.0;
    bool invert = false;
    int timeout_seconds = 5;
    int retries = 2;
};

std::vector<query_score> fetch_scores_for_texts(const route_args & args, int jobs,
                                                std::ostream & err) {
    std::ifstream in(args.texts_path);
    if (!in) {
        throw data_error("cannot open texts file: " + args.texts_path);
    }
    std::vector<std::pair<std::string, std::string>> texts;
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error & e) {
            throw data_error(args.texts_path + " line " + std::to_string(line_no) +
                             ": malformed JSON: " + e.what());
        }
        if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string() ||
            !obj.contains("text") || !obj["text"].is_string()) {
            throw data_error(args.texts_path + " line " + std::to_string(line_no) +
                             ": expected an object with string \"id\" and \"text\"");
        }
        const std::string id = obj["id"].get<std::string>();
        if (!ids.insert(id).second) {
            throw data_error(args.texts_path + " line " + std::to_string(line_no) +
                             ": duplicate id '" + id + "'");
        }
        texts.emplace_back(id, obj["text"].get<std::string>());
    }
    if (texts.empty()) {
        err << "warning: " << args.texts_path << ": no texts loaded\n";
    }

    fetch_options opts;
    opts.retries = args.retries;
    opts.timeout_seconds = args.timeout_seconds;
    std::vector<query_score> scores(texts.size());
    parallel_for((int64_t)texts.size(), jobs, [&](int64_t i) {
        const auto & [id, text] = texts[(std::size_t)i];
        scores[(std::size_t)i] = fetch_score(args.scorer_url, id, text, opts);
    });
    return scores;
}

int run_route(const route_args & args, int jobs, std::ostream & out, std::ostream & err) {
    json cfg;
    cfg["scores"] = args.scores_path;
    cfg["texts"] = args.texts_path;
    cfg["scorer_url"] = args.scorer_url;
    cfg["out"] = args.out_path;
    cfg["threshold"] = args.threshold;
    cfg["mode"] = args.mode;
    cfg["alpha"] = args.alpha;
    cfg["invert"] = args.invert;
    cfg["jobs"] = jobs;
    log_config(err, "route", cfg);

    switch_config config;
    config.threshold_t = (float)args.threshold;
    config.mode = switch_mode_from_name(args.mode);
    config.alpha = (float)args.alpha;
    config.invert_scores = args.invert;
    config.validate();

    std::vector<query_score> scores;
    if (!args.scores_path.empty()) {
        std::vector<std::string> warnings;
        scores = load_scores(args.scores_path, &warnings);
        log_warnings(err, warnings);
    } else {
        scores = fetch_scores_for_texts(args, jobs, err);
    }

    const routing_run run = simulate_routing(scores, config);

    std::ofstream decisions(args.out_path, std::ios::trunc);
    if (!decisions) {
        throw data_error("unwritable path: " + args.out_path);
    }
    write_decisions_jsonl(decisions, run.decisions);
    decisions.close();

    json summary;
    summary["command"] = "route";
    summary["out"] = args.out_path;
    summary["queries"] = run.decisions.size();
    summary["slow"] = run.summary.slow_count;
    summary["fast"] = run.summary.fast_count;
    summary["fast_fraction"] = run.summary.fast_fraction;
    out << summary.dump(2) << "\n";
    return 0;
}

struct simulate_args {
    uint64_t seed = 42;
    int64_t dim = 256;
    int64_t rank_over = 4;
    int64_t rank_reason = 4;
    double scale_over = 10.0;
    double scale_reason = 1.0;
    double tau = 0.6;
    int64_t repeats = 1;
    std::string out_path;
    std::string format = "csv";
};

int run_simulate(const simulate_args & args, int jobs, std::ostream & out, std::ostream & err) {
    json cfg;
    cfg["seed"] = args.seed;
    cfg["dim"] = args.dim;
    cfg["rank_over"] = args.rank_over;
    cfg["rank_reason"] = args.rank_reason;
    cfg["scale_over"] = args.scale_over;
    cfg["scale_reason"] = args.scale_reason;
    cfg["tau"] = args.tau;
    cfg["repeats"] = args.repeats;
    cfg["out"] = args.out_path;
    cfg["format"] = args.format;
    cfg["jobs"] = jobs;
    log_config(err, "simulate", cfg);

    if (args.repeats < 1) {
        throw data_error("--repeats must be at least 1");
    }
    const rank_policy policy = rank_policy::energy(args.tau);

    std::vector<recovery_report> reports((std::size_t)args.repeats);
    parallel_for(args.repeats, jobs, [&](int64_t i) {
        planted_spec spec;
        spec.n = spec.m = args.dim;
        spec.rank_over = args.rank_over;
        spec.rank_reason = args.rank_reason;
        spec.scale_over = (float)args.scale_over;
        spec.scale_reason = (float)args.scale_reason;
        spec.seed = args.seed + (uint64_t)i;
        reports[(std::size_t)i] = run_planted_experiment(spec, policy);
    });

    std::ofstream file(args.out_path, std::ios::trunc);
    if (!file) {
        throw data_error("unwritable path: " + args.out_path);
    }
    if (args.format == "json") {
        json rows = json::array();
        for (std::size_t i = 0; i < reports.size(); ++i) {
            json row;
            row["seed"] = args.seed + i;
            row["selected_r"] = reports[i].selected_r;
            row["rel_error_over"] = (double)reports[i].rel_error_over;
            row["rel_error_delta"] = (double)reports[i].rel_error_delta;
            row["tail_at_r"] = (double)reports[i].tail_at_r;
            rows.push_back(std::move(row));
        }
        file << rows.dump(2) << "\n";
    } else {
        file << "seed,selected_r,rel_error_over,rel_error_delta,tail_at_r\n";
        char line[192];
        for (std::size_t i = 0; i < reports.size(); ++i) {
            std::snprintf(line, sizeof(line), "%llu,%lld,%.9g,%.9g,%.9g\n",
                          (unsigned long long)(args.seed + i),
                          (long long)reports[i].selected_r, (double)reports[i].rel_error_over,
                          (double)reports[i].rel_error_delta, (double)reports[i].tail_at_r);
            file << line;
        }
    }
    file.close();

    std::vector<float> errors;
    errors.reserve(reports.size());
    for (const auto & r : reports) {
        errors.push_back(r.rel_error_over);
    }
    std::sort(errors.begin(), errors.end());
    const auto quantile = [&](double q) {
        if (errors.empty()) {
            return 0.0;
        }
        const std::size_t idx =
            std::min(errors.size() - 1, (std::size_t)std::llround(q * (double)(errors.size() - 1)));
        return (double)errors[idx];
    };

    json summary;
    summary["command"] = "simulate";
    summary["out"] = args.out_path;
    summary["repeats"] = args.repeats;
    summary["median_rel_error_over"] = quantile(0.5);
    summary["p90_rel_error_over"] = quantile(0.9);
    out << summary.dump(2) << "\n";
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string> & args, std::ostream & out, std::ostream & err) {
    CLI::App app{"low-rank unlearning adapter toolkit: extract per-layer adapters from a "
                 "base/reasoning checkpoint pair, merge them on demand, and route queries"};
    app.set_config("--config", "", "TOML config overlay; command-line flags take precedence");
    app.require_subcommand(1);

    int jobs = 1;
    app.add_option("--jobs", jobs, "bound on layer-level parallelism")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);

    extract_args ex;
    auto * extract_cmd = app.add_subcommand("extract", "extract a low-rank unlearning adapter");
    extract_cmd->fallthrough();
    extract_cmd->add_option("--base", ex.base, "base (fast-thinking) checkpoint")->required();
    extract_cmd->add_option("--reasoning", ex.reasoning, "reasoning checkpoint")->required();
    extract_cmd->add_option("--out", ex.out_path, "adapter output path")->required();
    add_policy_flags(extract_cmd, ex);
    add_selection_flags(extract_cmd, ex);
    extract_cmd->add_option("--store-dtype", ex.store_dtype, "factor storage dtype")
        ->check(CLI::IsMember({"fp32", "fp16"}))
        ->capture_default_str();

    std::string inspect_path;
    std::string inspect_format = "json";
    auto * inspect_cmd = app.add_subcommand("inspect", "show adapter metadata and per-layer ranks");
    inspect_cmd->fallthrough();
    inspect_cmd->add_option("--adapter", inspect_path, "adapter file")->required();
    inspect_cmd->add_option("--format", inspect_format, "output format")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();

    extract_args sp;
    std::string spectrum_layer;
    auto * spectrum_cmd =
        app.add_subcommand("spectrum", "export singular values and tail energies as CSV");
    spectrum_cmd->fallthrough();
    spectrum_cmd->add_option("--base", sp.base, "base checkpoint")->required();
    spectrum_cmd->add_option("--reasoning", sp.reasoning, "reasoning checkpoint")->required();
    spectrum_cmd->add_option("--out", sp.out_path, "CSV output path")->required();
    spectrum_cmd->add_option("--layer", spectrum_layer, "restrict to one layer");
    add_selection_flags(spectrum_cmd, sp);

    merge_args mg;
    auto * merge_cmd = app.add_subcommand("merge", "apply an adapter: W' = W + alpha * L");
    merge_cmd->fallthrough();
    merge_cmd->add_option("--reasoning", mg.checkpoint, "reasoning checkpoint")->required();
    merge_cmd->add_option("--adapter", mg.adapter, "adapter file")->required();
    merge_cmd->add_option("--out", mg.out_path, "merged checkpoint output path")->required();
    merge_cmd->add_option("--alpha", mg.alpha, "adapter strength")->capture_default_str();
    merge_cmd->add_option("--alpha-max", mg.alpha_max, "upper bound for alpha")
        ->capture_default_str();
    merge_cmd->add_flag("--force", mg.force, "skip digest verification");

    merge_args um;
    auto * unmerge_cmd =
        app.add_subcommand("unmerge", "remove a merged adapter: W = W' - alpha * L");
    unmerge_cmd->fallthrough();
    unmerge_cmd->add_option("--merged", um.checkpoint, "merged checkpoint")->required();
    unmerge_cmd->add_option("--adapter", um.adapter, "adapter file")->required();
    unmerge_cmd->add_option("--out", um.out_path, "restored checkpoint output path")->required();
    auto * um_alpha =
        unmerge_cmd->add_option("--alpha", um.alpha, "adapter strength (default: recorded alpha)");
    unmerge_cmd->add_option("--alpha-max", um.alpha_max, "upper bound for alpha")
        ->capture_default_str();
    unmerge_cmd->add_flag("--force", um.force, "skip digest verification");

    route_args rt;
    auto * route_cmd =
        app.add_subcommand("route", "decide slow vs fast thinking per query from difficulty scores");
    route_cmd->fallthrough();
    auto * scores_opt = route_cmd->add_option("--scores", rt.scores_path,
                                              "JSONL scores file {\"id\",\"score\"}");
    auto * texts_opt = route_cmd->add_option("--texts", rt.texts_path,
                                             "JSONL texts file {\"id\",\"text\"} scored via --scorer-url");
    auto * url_opt = route_cmd->add_option("--scorer-url", rt.scorer_url, "difficulty scorer endpoint")
                         ->envname("SWITCHKIT_SCORER_URL");
    scores_opt->excludes(texts_opt);
    texts_opt->needs(url_opt);
    route_cmd->add_option("--out", rt.out_path, "decisions JSONL output path")->required();
    route_cmd->add_option("--threshold", rt.threshold, "difficulty threshold t; score >= t routes slow")
        ->capture_default_str();
    route_cmd->add_option("--mode", rt.mode, "switch mode")
        ->check(CLI::IsMember({"hard", "soft", "always-on", "always-off"}))
        ->capture_default_str();
    route_cmd->add_option("--alpha", rt.alpha, "soft-mode adapter strength")->capture_default_str();
    route_cmd->add_flag("--invert", rt.invert, "scores mean easiness: route slow iff score <= t");
    route_cmd->add_option("--timeout", rt.timeout_seconds, "scorer timeout in seconds")
        ->capture_default_str();
    route_cmd->add_option("--retries", rt.retries, "scorer retries after the first attempt")
        ->capture_default_str();

    simulate_args sim;
    auto * simulate_cmd =
        app.add_subcommand("simulate", "planted-subspace recovery experiments on synthetic deltas");
    simulate_cmd->fallthrough();
    simulate_cmd->add_option("--seed", sim.seed, "base seed")->capture_default_str();
    simulate_cmd->add_option("--dim", sim.dim, "square matrix dimension")->capture_default_str();
    simulate_cmd->add_option("--rank-over", sim.rank_over, "planted strong-component rank")
        ->capture_default_str();
    simulate_cmd->add_option("--rank-reason", sim.rank_reason, "planted weak-component rank")
        ->capture_default_str();
    simulate_cmd->add_option("--scale-over", sim.scale_over, "strong-component singular scale")
        ->capture_default_str();
    simulate_cmd->add_option("--scale-reason", sim.scale_reason, "weak-component singular scale")
        ->capture_default_str();
    simulate_cmd->add_option("--tau", sim.tau, "energy threshold")->capture_default_str();
    simulate_cmd->add_option("--repeats", sim.repeats, "number of seeds (seed, seed+1, ...)")
        ->capture_default_str();
    simulate_cmd->add_option("--out", sim.out_path, "report output path")->required();
    simulate_cmd->add_option("--format", sim.format, "report format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();

    std::vector<const char *> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("switchkit");
    for (const auto & a : args) {
        argv.push_back(a.c_str());
    }

    try {
        app.parse((int)argv.size(), argv.data());
    } catch (const CLI::ParseError & e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*extract_cmd) {
            return run_extract(extract_cmd, ex, jobs, out, err);
        }
        if (*inspect_cmd) {
            return run_inspect(inspect_path, inspect_format, out, err);
        }
        if (*spectrum_cmd) {
            return run_spectrum(sp, spectrum_layer, jobs, out, err);
        }
        if (*merge_cmd) {
            return run_merge(mg, jobs, out, err);
        }
        if (*unmerge_cmd) {
            merge_args resolved = um;
            resolved.alpha_given = um_alpha->count() > 0;
            return run_unmerge(resolved, jobs, out, err);
        }
        if (*route_cmd) {
            if (rt.scores_path.empty() && rt.texts_path.empty()) {
                err << "error: route needs either --scores or --texts with --scorer-url\n";
                return 1;
            }
            return run_route(rt, jobs, out, err);
        }
        if (*simulate_cmd) {
            return run_simulate(sim, jobs, out, err);
        }
        err << "error: no command selected\n";
        return 1;
    } catch (const numeric_error & e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const data_error & e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const error & e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception & e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace switchkit
