// Copyright (c) 2026 switchkit contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "switchkit/errors.hpp"
#include "switchkit/rng.hpp"
#include "switchkit/switch_runtime.hpp"
#include "test_support.hpp"

#include <httplib.h>
#include <json.hpp>

#include <fstream>
#include <sstream>
#include <thread>

using namespace switchkit;
using testsup::temp_dir;

namespace {

void write_text(const std::filesystem::path & path, const std::string & text) {
    std::ofstream out(path, std::ios::trunc);
    out << text;
}

// Local scorer stub; one instance per test that needs HTTP.
class scorer_stub {
public:
    explicit scorer_stub(std::function<void(const httplib::Request &, httplib::Response &)> handler) {
        server_.Post("/score", std::move(handler));
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~scorer_stub() {
        server_.stop();
        thread_.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

} // namespace

TEST_CASE("load_scores parses and validates JSONL") {
    temp_dir dir;

    SUBCASE("two valid lines") {
        write_text(dir.file("ok.jsonl"),
                   "{\"id\":\"q1\",\"score\":0.25}\n{\"id\":\"q2\",\"score\":1.0}\n");
        const auto scores = load_scores(dir.file("ok.jsonl"));
        REQUIRE(scores.size() == 2);
        CHECK(scores[0].query_id == "q1");
        CHECK(scores[0].score == 0.25f);
        CHECK(scores[1].score == 1.0f);
    }
    SUBCASE("out-of-range score names the line") {
        write_text(dir.file("bad.jsonl"), "{\"id\":\"a\",\"score\":0.5}\n{\"id\":\"b\",\"score\":1.3}\n");
        CHECK_THROWS_WITH_AS(load_scores(dir.file("bad.jsonl")), doctest::Contains("line 2"),
                             data_error);
    }
    SUBCASE("malformed JSON names the line") {
        write_text(dir.file("mal.jsonl"), "{\"id\":\"a\",\"score\":0.5}\nnot json\n");
        CHECK_THROWS_WITH_AS(load_scores(dir.file("mal.jsonl")), doctest::Contains("line 2"),
                             data_error);
    }
    SUBCASE("duplicate ids are rejected") {
        write_text(dir.file("dup.jsonl"), "{\"id\":\"a\",\"score\":0.5}\n{\"id\":\"a\",\"score\":0.6}\n");
        CHECK_THROWS_WITH_AS(load_scores(dir.file("dup.jsonl")),
                             doctest::Contains("duplicate id 'a'"), data_error);
    }
    SUBCASE("missing fields are rejected") {
        write_text(dir.file("mf.jsonl"), "{\"id\":\"a\"}\n");
        CHECK_THROWS_AS(load_scores(dir.file("mf.jsonl")), data_error);
        write_text(dir.file("mt.jsonl"), "{\"id\":7,\"score\":0.5}\n");
        CHECK_THROWS_AS(load_scores(dir.file("mt.jsonl")), data_error);
    }
    SUBCASE("empty file warns and returns nothing") {
        write_text(dir.file("empty.jsonl"), "");
        std::vector<std::string> warnings;
        const auto scores = load_scores(dir.file("empty.jsonl"), &warnings);
        CHECK(scores.empty());
        REQUIRE(warnings.size() == 1);
        CHECK(warnings[0].find("no scores") != std::string::npos);
    }
    SUBCASE("blank lines are skipped") {
        write_text(dir.file("blank.jsonl"), "\n{\"id\":\"a\",\"score\":0.5}\n\n");
        CHECK(load_scores(dir.file("blank.jsonl")).size() == 1);
    }
}

TEST_CASE("fetch_score talks to a conforming endpoint") {
    scorer_stub stub([](const httplib::Request & req, httplib::Response & res) {
        const auto body = nlohmann::json::parse(req.body);
        REQUIRE(body.contains("text"));
        nlohmann::json reply;
        reply["score"] = body["text"].get<std::string>().size() > 5 ? 0.9 : 0.4;
        res.set_content(reply.dump(), "application/json");
    });

    const query_score qs = fetch_score(stub.url(), "q1", "hi", {});
    CHECK(qs.query_id == "q1");
    CHECK(qs.score == doctest::Approx(0.4));
    const query_score hard = fetch_score(stub.url() + "/score", "q2", "long question", {});
    CHECK(hard.score == doctest::Approx(0.9));
}

TEST_CASE("fetch_score rejects protocol violations") {
    SUBCASE("non-numeric score") {
        scorer_stub stub([](const httplib::Request &, httplib::Response & res) {
            res.set_content("{\"score\":\"high\"}", "application/json");
        });
        CHECK_THROWS_WITH_AS(fetch_score(stub.url(), "q", "text", {}),
                             doctest::Contains("no numeric"), data_error);
    }
    SUBCASE("score outside [0,1]") {
        scorer_stub stub([](const httplib::Request &, httplib::Response & res) {
            res.set_content("{\"score\":1.5}", "application/json");
        });
        CHECK_THROWS_WITH_AS(fetch_score(stub.url(), "q", "text", {}),
                             doctest::Contains("outside [0,1]"), data_error);
    }
    SUBCASE("non-200 status retries then fails with attempt count") {
        std::atomic<int> hits{0};
        scorer_stub stub([&](const httplib::Request &, httplib::Response & res) {
            ++hits;
            res.status = 500;
        });
        fetch_options opts;
        opts.retries = 2;
        CHECK_THROWS_WITH_AS(fetch_score(stub.url(), "q", "text", opts),
                             doctest::Contains("after 3 attempts"), data_error);
        CHECK(hits.load() == 3);
    }
    SUBCASE("unreachable endpoints report elapsed time") {
        fetch_options opts;
        opts.retries = 0;
        opts.timeout_seconds = 1;
        try {
            fetch_score("http://127.0.0.1:9", "q", "text", opts); // port 9: discard, closed
            FAIL("expected a data_error");
        } catch (const data_error & e) {
            CHECK(std::string(e.what()).find("elapsed") != std::string::npos);
        }
    }
    SUBCASE("https and non-http urls are rejected") {
        CHECK_THROWS_AS(fetch_score("https://example.com", "q", "t", {}), data_error);
        CHECK_THROWS_AS(fetch_score("ftp://example.com", "q", "t", {}), data_error);
    }
}

TEST_CASE("decide: hard and soft thresholding with inclusive slow boundary") {
    switch_config hard;
    hard.threshold_t = 0.78f;
    hard.mode = switch_mode::hard;

    const routing_decision high = decide({"q", 0.9f}, hard);
    CHECK(high.decision == route_kind::slow);
    CHECK(high.alpha_effective == 0.0f);

    const routing_decision boundary = decide({"q", 0.78f}, hard);
    CHECK(boundary.decision == route_kind::slow);

    const routing_decision low = decide({"q", 0.2f}, hard);
    CHECK(low.decision == route_kind::fast);
    CHECK(low.alpha_effective == 1.0f);

    switch_config soft = hard;
    soft.mode = switch_mode::soft;
    soft.alpha = 0.5f;
    const routing_decision soft_fast = decide({"q", 0.2f}, soft);
    CHECK(soft_fast.decision == route_kind::fast);
    CHECK(soft_fast.alpha_effective == 0.5f);
    CHECK(decide({"q", 0.9f}, soft).alpha_effective == 0.0f);

    switch_config on = hard;
    on.mode = switch_mode::always_on;
    CHECK(decide({"q", 0.99f}, on).decision == route_kind::fast);
    CHECK(decide({"q", 0.99f}, on).alpha_effective == 1.0f);

    switch_config off = hard;
    off.mode = switch_mode::always_off;
    CHECK(decide({"q", 0.01f}, off).decision == route_kind::slow);

    SUBCASE("invalid configs are rejected") {
        switch_config bad;
        bad.threshold_t = 1.5f;
        CHECK_THROWS_AS(decide({"q", 0.5f}, bad), data_error);
        switch_config bad_alpha;
        bad_alpha.alpha = 2.0f;
        CHECK_THROWS_AS(decide({"q", 0.5f}, bad_alpha), data_error);
    }
}

TEST_CASE("invert_scores flips every non-boundary decision and keeps the boundary slow") {
    switch_config config;
    config.threshold_t = 0.78f;
    switch_config inverted = config;
    inverted.invert_scores = true;

    seeded_rng rng(404);
    for (int i = 0; i < 500; ++i) {
        const float score = (float)rng.uniform();
        if (score == config.threshold_t) {
            continue;
        }
        const auto normal = decide({"q", score}, config);
        const auto flipped = decide({"q", score}, inverted);
        CHECK(normal.decision != flipped.decision);
    }
    CHECK(decide({"q", 0.78f}, config).decision == route_kind::slow);
    CHECK(decide({"q", 0.78f}, inverted).decision == route_kind::slow);
}

TEST_CASE("decisions are invariant under monotone rescaling of scores and threshold") {
    // grid scores k/512 survive g(x) = (x+1)/4 exactly in fp32
    const auto g = [](float x) { return (x + 1.0f) / 4.0f; };
    switch_config config;
    config.threshold_t = 0.78f;
    switch_config rescaled = config;
    rescaled.threshold_t = g(config.threshold_t);

    for (int k = 0; k <= 512; ++k) {
        const float score = (float)k / 512.0f;
        const auto a = decide({"q", score}, config);
        const auto b = decide({"q", g(score)}, rescaled);
        CHECK(a.decision == b.decision);
    }
}

TEST_CASE("simulate_routing aggregates and matches a per-query recount") {
    SUBCASE("frozen two-query example") {
        switch_config config;
        config.threshold_t = 0.78f;
        const routing_run run = simulate_routing({{"a", 0.1f}, {"b", 0.9f}}, config);
        REQUIRE(run.decisions.size() == 2);
        CHECK(run.decisions[0].decision == route_kind::fast);
        CHECK(run.decisions[1].decision == route_kind::slow);
        CHECK(run.summary.fast_fraction == doctest::Approx(0.5));
    }
    SUBCASE("always_on routes everything fast") {
        switch_config config;
        config.mode = switch_mode::always_on;
        const routing_run run =
            simulate_routing({{"a", 0.1f}, {"b", 0.9f}, {"c", 0.5f}}, config);
        CHECK(run.summary.fast_fraction == 1.0);
    }
    SUBCASE("1000 seeded scores match an independent recount") {
        seeded_rng rng(1000);
        std::vector<query_score> scores;
        for (int i = 0; i < 1000; ++i) {
            scores.push_back({"q" + std::to_string(i), (float)rng.uniform()});
        }
        switch_config config;
        config.threshold_t = 0.78f;
        const routing_run run = simulate_routing(scores, config);

        uint64_t fast = 0;
        for (const auto & s : scores) {
            if (s.score < 0.78f) {
                ++fast;
            }
        }
        CHECK(run.summary.fast_count == fast);
        CHECK(run.summary.slow_count == 1000 - fast);
        CHECK(run.summary.fast_fraction == doctest::Approx((double)fast / 1000.0));

        // no hidden state: the run equals mapping decide over the list
        for (std::size_t i = 0; i < scores.size(); ++i) {
            const auto d = decide(scores[i], config);
            CHECK(d.decision == run.decisions[i].decision);
            CHECK(d.alpha_effective == run.decisions[i].alpha_effective);
            CHECK(run.decisions[i].query_id == scores[i].query_id);
        }
    }
}

TEST_CASE("decisions JSONL carries id, decision and alpha_effective") {
    switch_config config;
    config.threshold_t = 0.78f;
    config.mode = switch_mode::soft;
    config.alpha = 0.25f;
    const routing_run run = simulate_routing({{"a", 0.9f}, {"b", 0.1f}}, config);

    std::ostringstream out;
    write_decisions_jsonl(out, run.decisions);
    std::istringstream lines(out.str());
    std::string line;

    std::getline(lines, line);
    auto first = nlohmann::json::parse(line);
    CHECK(first["id"] == "a");
    CHECK(first["decision"] == "slow");
    CHECK(first["alpha_effective"].get<double>() == 0.0);

    std::getline(lines, line);
    auto second = nlohmann::json::parse(line);
    CHECK(second["id"] == "b");
    CHECK(second["decision"] == "fast");
    CHECK(second["alpha_effective"].get<double>() == doctest::Approx(0.25));
}
