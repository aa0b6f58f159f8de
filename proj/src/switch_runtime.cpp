// Copyright (c) 2026 switchkit contributors
// SPDX-License-Identifier: Apache-2.0

#include "switchkit/switch_runtime.hpp"
#include "switchkit/errors.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>

namespace switchkit {

switch_mode switch_mode_from_name(const std::string & name) {
    if (name == "hard")       return switch_mode::hard;
    if (name == "soft")       return switch_mode::soft;
    if (name == "always-on" || name == "always_on")   return switch_mode::always_on;
    if (name == "always-off" || name == "always_off") return switch_mode::always_off;
    throw data_error("unknown switch mode '" + name + "'");
}

std::string switch_mode_name(switch_mode mode) {
    switch (mode) {
        case switch_mode::hard:       return "hard";
        case switch_mode::soft:       return "soft";
        case switch_mode::always_on:  return "always-on";
        case switch_mode::always_off: return "always-off";
    }
    return "unknown";
}

void switch_config::validate() const {
    if (!(threshold_t >= 0.0f && threshold_t <= 1.0f)) {
        throw data_error("threshold must lie in [0,1], got " + std::to_string(threshold_t));
    }
    if (!(alpha >= 0.0f && alpha <= alpha_max)) {
        throw data_error("alpha must lie in [0, " + std::to_string(alpha_max) + "], got " +
                         std::to_string(alpha));
    }
}

const char * route_name(route_kind r) {
    return r == route_kind::slow ? "slow" : "fast";
}

std::vector<query_score> load_scores(const std::filesystem::path & path,
                                     std::vector<std::string> * warnings) {
    std::ifstream in(path);
    if (!in) {
        throw data_error("cannot open scores file: " + path.string());
    }
    std::vector<query_score> scores;
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error & e) {
            throw data_error(path.string() + " line " + std::to_string(line_no) +
                             ": malformed JSON: " + e.what());
        }
        if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string() ||
            !obj.contains("score") || !obj["score"].is_number()) {
            throw data_error(path.string() + " line " + std::to_string(line_no) +
                             ": expected an object with string \"id\" and numeric \"score\"");
        }
        query_score qs;
        qs.query_id = obj["id"].get<std::string>();
        const double raw = obj["score"].get<double>();
        if (!std::isfinite(raw) || raw < 0.0 || raw > 1.0) {
            throw data_error(path.string() + " line " + std::to_string(line_no) + ": score " +
                             std::to_string(raw) + " outside [0,1]");
        }
        qs.score = (float)raw;
        if (!ids.insert(qs.query_id).second) {
            throw data_error(path.string() + " line " + std::to_string(line_no) +
                             ": duplicate id '" + qs.query_id + "'");
        }
        scores.push_back(std::move(qs));
    }
    if (scores.empty() && warnings) {
        warnings->push_back(path.string() + ": no scores loaded");
    }
    return scores;
}

query_score fetch_score(const std::string & endpoint_url, const std::string & query_id,
                        const std::string & text, const fetch_options & opts) {
    std::string base = endpoint_url;
    std::string path = "/score";
    if (base.rfind("https://", 0) == 0) {
        throw data_error("https scorer endpoints are not supported: " + endpoint_url);
    }
    if (base.rfind("http://", 0) != 0) {
        throw data_error("scorer url must start with http://: " + endpoint_url);
    }
    const std::size_t slash = base.find('/', std::string("http://").size());
    if (slash != std::string::npos) {
        path = base.substr(slash);
        base = base.substr(0, slash);
        if (path == "/") {
            path = "/score";
        }
    }

    nlohmann::json body;
    body["text"] = text;
    const std::string payload = body.dump();

    const auto started = std::chrono::steady_clock::now();
    std::string last_error;
    for (int attempt = 0; attempt <= opts.retries; ++attempt) {
        httplib::Client client(base);
        client.set_connection_timeout(opts.timeout_seconds, 0);
        client.set_read_timeout(opts.timeout_seconds, 0);
        client.set_write_timeout(opts.timeout_seconds, 0);
        auto res = client.Post(path, payload, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "status " + std::to_string(res->status);
            continue;
        }
        nlohmann::json reply;
        try {
            reply = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::parse_error &) {
            throw data_error("scorer returned a non-JSON body for query '" + query_id + "'");
        }
        if (!reply.is_object() || !reply.contains("score") || !reply["score"].is_number()) {
            throw data_error("scorer response for query '" + query_id +
                             "' has no numeric \"score\" field");
        }
        const double raw = reply["score"].get<double>();
        if (!std::isfinite(raw) || raw < 0.0 || raw > 1.0) {
            throw data_error("scorer returned score " + std::to_string(raw) +
                             " outside [0,1] for query '" + query_id + "'");
        }
        return {query_id, (float)raw};
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    char msg[256];
    std::snprintf(msg, sizeof(msg), "scorer request failed after %d attempts (%.2fs elapsed): %s",
                  opts.retries + 1, elapsed, last_error.c_str());
    throw data_error(msg);
}

routing_decision decide(const query_score & score, const switch_config & config) {
    config.validate();
    routing_decision d;
    d.query_id = score.query_id;

    switch (config.mode) {
        case switch_mode::always_on:
            d.decision = route_kind::fast;
            d.alpha_effective = 1.0f;
            return d;
        case switch_mode::always_off:
            d.decision = route_kind::slow;
            d.alpha_effective = 0.0f;
            return d;
        default:
            break;
    }

    // reflecting both sides keeps the boundary on slow and flips every
    // other decision when scores arrive inverted
    const float s = config.invert_scores ? 1.0f - score.score : score.score;
    const float t = config.invert_scores ? 1.0f - config.threshold_t : config.threshold_t;
    const bool slow = s >= t;
    if (slow) {
        d.decision = route_kind::slow;
        d.alpha_effective = 0.0f;
    } else {
        d.decision = route_kind::fast;
        d.alpha_effective = config.mode == switch_mode::soft ? config.alpha : 1.0f;
    }
    return d;
}

routing_run simulate_routing(const std::vector<query_score> & scores,
                             const switch_config & config) {
    routing_run run;
    run.decisions.reserve(scores.size());
    for (const auto & s : scores) {
        run.decisions.push_back(decide(s, config));
        if (run.decisions.back().decision == route_kind::fast) {
            ++run.summary.fast_count;
        } else {
            ++run.summary.slow_count;
        }
    }
    const uint64_t total = run.summary.fast_count + run.summary.slow_count;
    run.summary.fast_fraction = total == 0 ? 0.0 : (double)run.summary.fast_count / (double)total;
    return run;
}

void write_decisions_jsonl(std::ostream & out, const std::vector<routing_decision> & decisions) {
    for (const auto & d : decisions) {
        nlohmann::json obj;
        obj["id"] = d.query_id;
        obj["decision"] = route_name(d.decision);
        obj["alpha_effective"] = (double)d.alpha_effective;
        out << obj.dump() << '\n';
    }
}

} // namespace switchkit
