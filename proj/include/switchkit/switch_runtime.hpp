// Copyright (c) 2026 switchkit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace switchkit {

enum class switch_mode {
    hard,       // adapter fully on for easy queries, off for hard ones
    soft,       // alpha-scaled adapter for easy queries
    always_on,  // adapter on for every query
    always_off, // adapter off for every query
};

switch_mode switch_mode_from_name(const std::string & name);
std::string switch_mode_name(switch_mode mode);

struct switch_config {
    float threshold_t = 0.78f;
    switch_mode mode = switch_mode::hard;
    float alpha = 1.0f; // soft-mode strength
    bool invert_scores = false;
    float alpha_max = 1.0f;

    void validate() const;
};

// score semantics: higher = more likely to need slow thinking.
struct query_score {
    std::string query_id;
    float score = 0.0f;
};

enum class route_kind { slow, fast };

const char * route_name(route_kind r);

struct routing_decision {
    std::string query_id;
    route_kind decision = route_kind::slow;
    float alpha_effective = 0.0f; // 0 slow, 1 hard-fast, alpha soft-fast
};

// JSONL {"id": string, "score": number in [0,1]} per line. Duplicate ids
// and out-of-range scores are errors reported with their line number.
std::vector<query_score> load_scores(const std::filesystem::path & path,
                                     std::vector<std::string> * warnings = nullptr);

struct fetch_options {
    int retries = 2;         // attempts = retries + 1
    int timeout_seconds = 5; // per attempt, connect + read
};

// POSTs {"text": ...} to the scorer endpoint and expects a 200 response
// with {"score": number in [0,1]}. URLs without a path use /score.
query_score fetch_score(const std::string & endpoint_url, const std::string & query_id,
                        const std::string & text, const fetch_options & opts = {});

// Routes one query. slow keeps the reasoning weights untouched
// (alpha_effective 0); fast applies the unlearning adapter. The boundary
// score == threshold resolves to slow. invert_scores reflects both the
// score and the threshold (slow iff score <= t), covering classifiers
// that emit easiness instead of difficulty.
routing_decision decide(const query_score & score, const switch_config & config);

struct routing_summary {
    uint64_t slow_count = 0;
    uint64_t fast_count = 0;
    double fast_fraction = 0.0;
};

struct routing_run {
    std::vector<routing_decision> decisions; // input order
    routing_summary summary;
};

routing_run simulate_routing(const std::vector<query_score> & scores,
                             const switch_config & config);

// JSONL {"id","decision","alpha_effective"} per decision.
void write_decisions_jsonl(std::ostream & out, const std::vector<routing_decision> & decisions);

} // namespace switchkit
