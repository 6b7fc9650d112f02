#include <doctest.h>

#include "latticework/engine.hpp"
#include "latticework/error.hpp"

#include "../support/pipeline.hpp"

using namespace lw;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::IoError;
}

} // namespace

TEST_CASE("stages refuse to run out of order") {
    lwtest::TempDir dir;
    Engine engine(lwtest::config_for(dir / "store"));
    CHECK(code_of([&] { engine.build(); }) == ErrorCode::MissingPredecessor);
    CHECK(code_of([&] { engine.merge(); }) == ErrorCode::MissingPredecessor);
    CHECK(code_of([&] { engine.tasks(); }) == ErrorCode::MissingPredecessor);
    CHECK(code_of([&] { engine.propose(); }) == ErrorCode::MissingPredecessor);
    CHECK(code_of([&] { engine.final_lattice(); }) == ErrorCode::MissingPredecessor);
    engine.ingest(lwtest::fixture("amy_records.jsonl"), lwtest::fixture("denylist.txt"));
    CHECK(code_of([&] { engine.merge(); }) == ErrorCode::MissingPredecessor);
}

TEST_CASE("ingest without a denylist while filtering is a configuration error") {
    lwtest::TempDir dir;
    Engine engine(lwtest::config_for(dir / "store"));
    CHECK(code_of([&] { engine.ingest(lwtest::fixture("amy_records.jsonl")); }) == ErrorCode::ConfigError);
}

TEST_CASE("full pipeline over the three-day fixture") {
    lwtest::TempDir dir;
    Engine engine(lwtest::config_for(dir / "store"));
    auto ing = engine.ingest(lwtest::fixture("amy_records.jsonl"), lwtest::fixture("denylist.txt"));
    CHECK(ing.sessions.size() == 3);
    CHECK(ing.kept + ing.dropped == 30);

    auto scopes = engine.build();
    CHECK(scopes.size() == 3);
    for (const auto& s : scopes) {
        auto l = engine.store().load_lattice(s);
        REQUIRE(l);
        CHECK(validate(*l).empty());
        CHECK(l->layer_count() == 2);
    }

    engine.merge();
    auto final = engine.final_lattice();
    CHECK(final.layer_count() == 3);
    CHECK(validate(final).empty());
    CHECK(final.session_scope().size() == 3);

    auto tasks = engine.tasks();
    CHECK(tasks.task_day == "day-2025-03-05");
    CHECK_FALSE(tasks.retained.empty());
    for (const auto& t : tasks.retained) CHECK(t.utility->value > 0.75);

    auto actions = engine.propose();
    CHECK(actions.size() == 2 * tasks.retained.size());
    for (const auto& a : actions) {
        CHECK(a.steering_insight_ids.size() == 2);
        CHECK(a.status == ActionStatus::Proposed);
    }

    // export: one entry per final insight, leaves identical to descendants()
    auto exported = engine.export_insights();
    CHECK(exported.at("insights").size() == final.top_insights().size());
    for (const auto& in : exported.at("insights")) {
        auto trail = descendants(final, in.at("id").get<std::string>());
        CHECK(in.at("provenance").at("leaf_observations").size() == trail.leaf_observations.size());
    }
}

TEST_CASE("proposing again keeps action state") {
    lwtest::TempDir dir;
    Engine engine(lwtest::config_for(dir / "store"));
    lwtest::run_pipeline(engine);
    auto id = engine.actions().at(0).id;
    engine.approve(id);
    engine.propose();
    CHECK(engine.action(id).status == ActionStatus::Approved);
}

TEST_CASE("steer, approve and run through the engine") {
    lwtest::TempDir dir;
    Engine engine(lwtest::config_for(dir / "store"));
    lwtest::run_pipeline(engine);
    auto id = engine.actions().at(0).id;
    CHECK(engine.steer(id, "keep it to one page").status == ActionStatus::InfoRequested);
    CHECK(code_of([&] { engine.run_action(id); }) == ErrorCode::InvalidStatus);
    engine.approve(id);
    auto run = engine.run_action(id);
    CHECK(run.outcome == RunOutcome::Completed);
    CHECK(engine.action(id).status == ActionStatus::Done);
    auto summary = engine.run_summary(run.run_id);
    REQUIRE(summary);
    CHECK(summary->at("outcome") == "completed");
    CHECK(engine.run_trace(run.run_id).size() == run.steps.size());
    CHECK(code_of([&] { engine.run_action(id); }) == ErrorCode::InvalidStatus);
    CHECK(code_of([&] { engine.action("act-doesnotexist"); }) == ErrorCode::NotFound);
}

TEST_CASE("ratings are bounded per dimension") {
    lwtest::TempDir dir;
    Engine engine(lwtest::config_for(dir / "store"));
    lwtest::run_pipeline(engine);
    auto insight = engine.final_insights().at(0).id;
    CHECK(engine.add_rating(insight, "depth", 3, std::nullopt).value == 3);
    CHECK(engine.add_rating(insight, "depth", -3, std::nullopt).value == -3);
    CHECK(code_of([&] { engine.add_rating(insight, "depth", 4, std::nullopt); }) == ErrorCode::RatingOutOfRange);
    CHECK(code_of([&] { engine.add_rating(insight, "novelty", 0, std::nullopt); }) == ErrorCode::RatingOutOfRange);
    CHECK(engine.add_rating(insight, "novelty", 7, "sharp").value == 7);
    CHECK(code_of([&] { engine.add_rating(insight, "vibes", 1, std::nullopt); }) == ErrorCode::InvalidInput);
    CHECK(code_of([&] { engine.add_rating("ins-nope", "depth", 1, std::nullopt); }) == ErrorCode::NotFound);
    CHECK(engine.ratings().size() == 3);
}

TEST_CASE("chat-thread sessions from the chat fixture") {
    lwtest::TempDir dir;
    auto cfg = lwtest::config_for(dir / "store");
    cfg.ingest.session_policy = SessionPolicy::ChatThread;
    Engine engine(cfg);
    auto ing = engine.ingest(lwtest::fixture("amy_chat.jsonl"), lwtest::fixture("denylist.txt"));
    CHECK(ing.sessions == std::vector<std::string>{"thread-amy-cscw"});
    engine.build();
    engine.merge();
    CHECK(validate(engine.final_lattice()).empty());
}
