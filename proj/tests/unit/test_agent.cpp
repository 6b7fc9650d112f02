#include <doctest.h>

#include "latticework/agent.hpp"
#include "latticework/error.hpp"
#include "latticework/mock_backend.hpp"

#include "../support/scripted_backend.hpp"
#include "../support/temp_dir.hpp"

namespace fs = std::filesystem;
using namespace lw;
using nlohmann::json;

namespace {

ProposedAction approved_action() {
    ProposedAction a;
    a.id = "act-00000000000000aa";
    a.task_id = "task-1";
    a.title = "Draft a working plan";
    a.description = "Query an LLM to draft a plan and save it as a document.";
    a = steer(a, "use the v2 draft");
    return approve(a);
}

RunOptions options_in(const lwtest::TempDir& dir, std::size_t budget = 20) {
    RunOptions o;
    o.sandbox_root = dir / "sandbox";
    o.budget = budget;
    return o;
}

// Replies for agent_step keyed on phase and steps taken so far in it.
using StepScript = std::function<json(const std::string& phase, std::size_t step)>;

void script_agent(lwtest::ScriptedBackend& b, StepScript fn) {
    b.on("agent_step", [fn](const Request& r, const std::string&) {
        return fn(r.context.at("phase").get<std::string>(), r.context.at("steps").size()).dump();
    });
}

std::size_t count_files(const fs::path& root) {
    if (!fs::exists(root)) return 0;
    std::size_t n = 0;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) ++n;
    return n;
}

} // namespace

TEST_CASE("registering a tool twice fails") {
    ToolRegistry reg;
    reg.register_tool({"t", "d"}, [](const json&, const ToolContext&) { return std::string(); });
    try {
        register_tool(reg, {"t", "again"}, [](const json&, const ToolContext&) { return std::string(); });
        FAIL("expected DuplicateTool");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DuplicateTool);
    }
}

TEST_CASE("phase permission matrix") {
    CHECK(permitted(Phase::Research, SideEffect::Read));
    CHECK(permitted(Phase::Research, SideEffect::Network));
    CHECK_FALSE(permitted(Phase::Research, SideEffect::Write));
    CHECK(permitted(Phase::Execution, SideEffect::Read));
    CHECK(permitted(Phase::Execution, SideEffect::Network));
    CHECK(permitted(Phase::Execution, SideEffect::Write));
}

TEST_CASE("mock run completes with one artifact inside the sandbox") {
    lwtest::TempDir dir;
    MockBackend backend;
    auto action = approved_action();
    std::vector<StepTrace> streamed;
    auto opts = options_in(dir);
    opts.on_step = [&](const StepTrace& s) { streamed.push_back(s); };
    auto r = run(action, builtin_tools(&backend), backend, opts);
    CHECK(r.outcome == RunOutcome::Completed);
    CHECK(r.abort_reason.empty());
    REQUIRE(r.artifacts.size() == 1);
    CHECK(r.artifacts[0].rfind(r.run_id + "/", 0) == 0);
    const auto body = lwtest::slurp(dir / "sandbox" / r.artifacts[0]);
    CHECK(body.find("use the v2 draft") != std::string::npos);
    CHECK(count_files(dir / "sandbox") == 1);
    CHECK(streamed == r.steps);
    for (std::size_t i = 0; i < r.steps.size(); ++i) CHECK(r.steps[i].seq == i + 1);
    CHECK(r.run_id == run_id_for(action));
}

TEST_CASE("the user note reaches the research phase context") {
    lwtest::TempDir dir;
    lwtest::ScriptedBackend backend;
    run(approved_action(), builtin_tools(&backend), backend, options_in(dir));
    auto reqs = backend.requests("agent_step");
    REQUIRE_FALSE(reqs.empty());
    CHECK(reqs[0].context.at("phase") == "research");
    CHECK(reqs[0].context.at("notes") == json{"use the v2 draft"});
    CHECK(backend.prompts("agent_step")[0].find("use the v2 draft") != std::string::npos);
}

TEST_CASE("a write attempted during research is rejected") {
    lwtest::TempDir dir;
    lwtest::ScriptedBackend backend;
    script_agent(backend, [](const std::string& phase, std::size_t n) -> json {
        if (phase == "research" && n == 0)
            return {{"thought", "save early"}, {"tool", "fs_write"}, {"input", {{"path", "early.md"}, {"content", "x"}}}};
        if (phase == "research") return {{"thought", "done"}, {"finish", true}, {"summary", "s"}};
        if (n == 0) return {{"thought", "w"}, {"tool", "fs_write"}, {"input", {{"path", "plan.md"}, {"content", "p"}}}};
        return {{"thought", "done"}, {"finish", true}};
    });
    auto r = run(approved_action(), builtin_tools(&backend), backend, options_in(dir));
    REQUIRE(r.steps.size() >= 1);
    CHECK(r.steps[0].status == "rejected");
    CHECK_FALSE(r.steps[0].side_effect.has_value());
    CHECK_FALSE(fs::exists(dir / "sandbox" / r.run_id / "early.md"));
    CHECK(r.outcome == RunOutcome::Completed);
    CHECK(r.artifacts == std::vector<std::string>{r.run_id + "/plan.md"});
}

TEST_CASE("a budget of one step leaves the run incomplete") {
    lwtest::TempDir dir;
    MockBackend backend;
    auto r = run(approved_action(), builtin_tools(&backend), backend, options_in(dir, 1));
    CHECK(r.outcome == RunOutcome::Incomplete);
    CHECK(r.abort_reason == "BudgetExhausted");
    CHECK(r.steps.size() == 1);
    CHECK(r.artifacts.empty());
}

TEST_CASE("writes escaping the sandbox abort the run without touching disk") {
    lwtest::TempDir dir;
    lwtest::ScriptedBackend backend;
    script_agent(backend, [](const std::string& phase, std::size_t) -> json {
        if (phase == "research") return {{"thought", "ok"}, {"finish", true}, {"summary", "s"}};
        return {{"thought", "escape"}, {"tool", "fs_write"}, {"input", {{"path", "../../outside.md"}, {"content", "x"}}}};
    });
    auto r = run(approved_action(), builtin_tools(&backend), backend, options_in(dir));
    CHECK(r.outcome == RunOutcome::Incomplete);
    CHECK(r.abort_reason == "SandboxViolation");
    CHECK(r.steps.back().status == "aborted");
    CHECK_FALSE(fs::exists(dir / "outside.md"));
    CHECK(count_files(dir.path()) == 0);
}

TEST_CASE("rerunning from the same snapshot gives an identical trace") {
    lwtest::TempDir a, b;
    MockBackend backend;
    auto action = approved_action();
    auto r1 = run(action, builtin_tools(&backend), backend, options_in(a));
    auto r2 = run(action, builtin_tools(&backend), backend, options_in(b));
    CHECK(r1.steps == r2.steps);
    CHECK(r1.artifacts == r2.artifacts);
    CHECK(lwtest::slurp(a / "sandbox" / r1.artifacts[0]) == lwtest::slurp(b / "sandbox" / r2.artifacts[0]));
}

TEST_CASE("only approved actions run") {
    lwtest::TempDir dir;
    MockBackend backend;
    auto a = approved_action();
    a.status = ActionStatus::Proposed;
    CHECK_THROWS_AS(run(a, builtin_tools(&backend), backend, options_in(dir)), Error);
    CHECK_THROWS_AS(run(approved_action(), builtin_tools(&backend), backend, options_in(dir, 0)), Error);
}

TEST_CASE("finishing execution without writing anything is incomplete") {
    lwtest::TempDir dir;
    lwtest::ScriptedBackend backend;
    script_agent(backend, [](const std::string&, std::size_t) -> json {
        return {{"thought", "nothing to do"}, {"finish", true}, {"summary", "s"}};
    });
    auto r = run(approved_action(), builtin_tools(&backend), backend, options_in(dir));
    CHECK(r.outcome == RunOutcome::Incomplete);
    CHECK(r.abort_reason == "NoArtifact");
}

TEST_CASE("tool errors are recorded and the run continues") {
    lwtest::TempDir dir;
    lwtest::ScriptedBackend backend;
    script_agent(backend, [](const std::string& phase, std::size_t n) -> json {
        if (phase == "research" && n == 0) return {{"thought", "t"}, {"tool", "fs_read"}, {"input", {{"path", "missing.txt"}}}};
        if (phase == "research" && n == 1) return {{"thought", "t"}, {"tool", "teleport"}, {"input", json::object()}};
        if (phase == "research") return {{"thought", "t"}, {"finish", true}, {"summary", "s"}};
        if (n == 0) return {{"thought", "w"}, {"tool", "fs_write"}, {"input", {{"path", "a.md"}, {"content", "a"}}}};
        return {{"thought", "t"}, {"finish", true}};
    });
    auto r = run(approved_action(), builtin_tools(&backend), backend, options_in(dir));
    CHECK(r.steps[0].status == "tool_error");
    CHECK(r.steps[1].status == "tool_error");
    CHECK(r.outcome == RunOutcome::Completed);
}

TEST_CASE("long tool results are truncated") {
    lwtest::TempDir dir;
    lwtest::spit(dir / "sandbox" / "big.txt", std::string(10000, 'x'));
    lwtest::ScriptedBackend backend;
    script_agent(backend, [](const std::string& phase, std::size_t n) -> json {
        if (phase == "research" && n == 0) return {{"thought", "t"}, {"tool", "fs_read"}, {"input", {{"path", "big.txt"}}}};
        if (phase == "research") return {{"thought", "t"}, {"finish", true}, {"summary", "s"}};
        if (n == 0) return {{"thought", "w"}, {"tool", "fs_write"}, {"input", {{"path", "a.md"}, {"content", "a"}}}};
        return {{"thought", "t"}, {"finish", true}};
    });
    auto opts = options_in(dir);
    opts.result_byte_cap = 100;
    auto r = run(approved_action(), builtin_tools(&backend), backend, opts);
    CHECK(r.steps[0].status == "ok");
    CHECK(r.steps[0].result.size() <= 200);
    CHECK(r.steps[0].result.size() < 10000);
}

TEST_CASE("calendar tools write and read an ICS file in the sandbox") {
    lwtest::TempDir dir;
    auto tools = builtin_tools();
    ToolContext ctx;
    ctx.sandbox_root = dir / "sandbox";
    ctx.run_id = "run-1";
    ctx.calendar_path = "calendar.ics";
    std::vector<std::string> written;
    ctx.written = &written;
    fs::create_directories(ctx.sandbox_root);
    CHECK(tools.invoke("calendar_read", json::object(), ctx) == "(no events)");
    tools.invoke("calendar_write", {{"summary", "Focus block"}, {"start", "2025-03-06T09:00:00Z"}, {"end", "2025-03-06T10:30:00Z"}},
                 ctx);
    auto listing = tools.invoke("calendar_read", json::object(), ctx);
    CHECK(listing.find("20250306T090000Z - 20250306T103000Z: Focus block") != std::string::npos);
    CHECK(written == std::vector<std::string>{"calendar.ics"});
    CHECK(lwtest::slurp(ctx.sandbox_root / "calendar.ics").rfind("BEGIN:VCALENDAR", 0) == 0);

    ctx.calendar_path = dir / "elsewhere.ics";
    try {
        tools.invoke("calendar_write", {{"summary", "x"}, {"start", "2025-03-06T09:00:00Z"}, {"end", "2025-03-06T10:00:00Z"}},
                     ctx);
        FAIL("expected SandboxViolation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SandboxViolation);
    }
    CHECK_FALSE(fs::exists(dir / "elsewhere.ics"));
}

TEST_CASE("web search serves canned fixtures") {
    lwtest::TempDir dir;
    auto tools = builtin_tools();
    ToolContext ctx;
    ctx.sandbox_root = dir.path();
    ctx.web_fixtures = json::parse(lwtest::slurp(lwtest::fixture("web_fixtures.json")));
    auto hit = tools.invoke("web_search", {{"query", "Academic Writing Plan"}}, ctx);
    CHECK(hit.find("<http") != std::string::npos);
    CHECK_FALSE(tools.invoke("web_search", {{"query", "anything else"}}, ctx).empty());
    ctx.web_fixtures = json::object();
    CHECK(tools.invoke("web_search", {{"query", "q"}}, ctx) == "No results for \"q\".");
}

TEST_CASE("reads outside the read roots are tool errors") {
    lwtest::TempDir dir;
    auto tools = builtin_tools();
    ToolContext ctx;
    ctx.sandbox_root = dir / "sandbox";
    fs::create_directories(ctx.sandbox_root);
    lwtest::spit(dir / "secret.txt", "s");
    try {
        tools.invoke("fs_read", {{"path", "../secret.txt"}}, ctx);
        FAIL("expected ToolError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ToolError);
    }
}
