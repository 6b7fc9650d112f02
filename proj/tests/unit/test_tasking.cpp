#include <doctest.h>

#include "latticework/error.hpp"
#include "latticework/mock_backend.hpp"
#include "latticework/tasking.hpp"

#include "../support/scripted_backend.hpp"

#include <random>

using namespace lw;

namespace {

Task scored(const std::string& title, double v) {
    Task t;
    t.id = "task-" + title;
    t.title = title;
    t.supporting_actions = {"did " + title};
    t.source_session = "day-2025-03-05";
    t.utility = UtilityScore{v, "r"};
    return t;
}

Insight insight_with(const std::string& text) {
    return make_insight(2, text, text, {"x"}, {"ctx"}, {"s"});
}

std::vector<Window> windows_of(const std::vector<std::string>& texts, std::size_t size = 10) {
    std::vector<TranscriptRecord> rs;
    auto t0 = parse_rfc3339("2025-03-05T09:00:00Z");
    for (std::size_t i = 0; i < texts.size(); ++i) {
        TranscriptRecord r;
        r.timestamp = t0 + std::chrono::minutes(i);
        r.text = texts[i];
        rs.push_back(r);
    }
    auto sessions = segment_sessions(rs, SessionPolicy::CalendarDay);
    return rolling_windows(sessions.at(0), size, size);
}

} // namespace

TEST_CASE("utility gate is strict at the threshold") {
    auto g = partition_by_utility({scored("at", 0.75), scored("above", 0.8), scored("low", 0.1)}, 0.75);
    REQUIRE(g.retained.size() == 1);
    CHECK(g.retained[0].title == "above");
    CHECK(g.rejected.size() == 2);
}

TEST_CASE("gate partitions and is monotone in the threshold") {
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int round = 0; round < 50; ++round) {
        std::vector<Task> tasks;
        for (int i = 0; i < 12; ++i) tasks.push_back(scored("t" + std::to_string(i), std::round(u(rng) * 20) / 20));
        std::size_t prev = tasks.size() + 1;
        for (double t = 0.0; t <= 1.0; t += 0.05) {
            auto g = partition_by_utility(tasks, t);
            CHECK(g.retained.size() + g.rejected.size() == tasks.size());
            for (const auto& r : g.retained) CHECK(r.utility->value > t);
            for (const auto& r : g.rejected) CHECK_FALSE(r.utility->value > t);
            CHECK(g.retained.size() <= prev);
            prev = g.retained.size();
        }
    }
}

TEST_CASE("thresholds outside [0, 1] are rejected") {
    CHECK_THROWS_AS(partition_by_utility({}, 1.5), Error);
    CHECK_THROWS_AS(partition_by_utility({}, -0.1), Error);
}

TEST_CASE("mock utility retains tasks that share a tag with an insight") {
    MockBackend backend;
    Task a = scored("Writing a paper", 0), b = scored("Lunch", 0);
    a.utility.reset();
    b.utility.reset();
    a.supporting_actions = {"edited intro #paper-writing"};
    b.supporting_actions = {"ordered food #lunch"};
    auto g = gate_tasks({a, b}, 0.75, {insight_with("procrastinates on #paper-writing")}, backend, 2);
    REQUIRE(g.retained.size() == 1);
    CHECK(g.retained[0].title == "Writing a paper");
    CHECK(g.retained[0].utility->value == doctest::Approx(0.9));
    REQUIRE(g.rejected.size() == 1);
    CHECK(g.rejected[0].utility->value == doctest::Approx(0.1));
    CHECK(g.rejected[0].utility->rationale.find("Generic AI assistance is sufficient") != std::string::npos);
}

TEST_CASE("out-of-range utility scores are clamped") {
    lwtest::ScriptedBackend backend;
    backend.queue("utility", {R"({"score": 1.7, "rationale": "very"})"});
    Task t = scored("x", 0);
    t.utility.reset();
    auto g = gate_tasks({t}, 0.75, {}, backend, 1);
    REQUIRE(g.retained.size() == 1);
    CHECK(g.retained[0].utility->value == 1.0);

    backend.queue("utility", {R"({"score": -2, "rationale": "no"})"});
    g = gate_tasks({t}, 0.75, {}, backend, 1);
    REQUIRE(g.rejected.size() == 1);
    CHECK(g.rejected[0].utility->value == 0.0);
}

TEST_CASE("gating sees every insight it is given") {
    lwtest::ScriptedBackend backend;
    Task t = scored("x", 0);
    t.utility.reset();
    gate_tasks({t}, 0.75, {insight_with("alpha #a"), insight_with("beta #b"), insight_with("gamma #c")}, backend, 1);
    auto reqs = backend.requests("utility");
    REQUIRE(reqs.size() == 1);
    CHECK(reqs[0].context.at("insights").size() == 3);
}

TEST_CASE("mock window actions echo the records, in order") {
    MockBackend backend;
    auto ws = windows_of({"opened Overleaf", "searched Google Scholar", "edited section 2"});
    auto acts = infer_window_actions(ws, backend);
    REQUIRE(acts.size() == 3);
    CHECK(acts[0].text == "opened Overleaf");
    CHECK(acts[2].text == "edited section 2");
    CHECK(acts[1].window_id == ws[0].id);
    CHECK(infer_window_actions({}, backend).empty());
}

TEST_CASE("mock task synthesis gives one task per shared tag") {
    MockBackend backend;
    std::vector<WindowAction> acts = {{"w0", "edited intro #paper"}, {"w0", "fixed figure #paper"},
                                      {"w1", "made slides #talk"},   {"w1", "rehearsed #talk"},
                                      {"w1", "closed a tab #misc"}};
    auto tasks = synthesize_tasks(acts, "day-2025-03-05", backend);
    REQUIRE(tasks.size() == 2);
    std::set<std::string> titles;
    for (const auto& t : tasks) {
        titles.insert(t.title);
        CHECK(t.supporting_actions.size() == 2);
        CHECK(t.source_session == "day-2025-03-05");
        CHECK_FALSE(t.source_windows.empty());
        CHECK_FALSE(t.utility.has_value());
    }
    CHECK(titles == std::set<std::string>{"Paper", "Talk"});
}

TEST_CASE("a single trivial action yields no tasks") {
    MockBackend backend;
    CHECK(synthesize_tasks({{"w0", "closed a tab"}}, "day-2025-03-05", backend).empty());
}

TEST_CASE("hallucinated supporting actions are dropped") {
    lwtest::ScriptedBackend backend;
    backend.queue("tasks", {R"({"tasks": [
        {"title": "Real", "supporting_actions": ["a", "made up"]},
        {"title": "Ghost", "supporting_actions": ["never happened"]}]})"});
    auto tasks = synthesize_tasks({{"w0", "a"}, {"w1", "b"}}, "s", backend);
    REQUIRE(tasks.size() == 1);
    CHECK(tasks[0].supporting_actions == std::vector<std::string>{"a"});
    CHECK(tasks[0].source_windows == std::vector<std::string>{"w0"});
}

TEST_CASE("task JSON round-trips") {
    auto t = scored("x", 0.5);
    t.source_windows = {"w0"};
    CHECK(task_from_json(to_json(t)) == t);
}
