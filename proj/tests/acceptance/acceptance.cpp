// Acceptance runner: one PASS/FAIL/SKIP line per criterion, exit status 1 if
// anything failed.

#include "latticework/agent.hpp"
#include "latticework/engine.hpp"
#include "latticework/error.hpp"
#include "latticework/mock_backend.hpp"

#include "../support/pipeline.hpp"
#include "../support/random_lattice.hpp"
#include "../support/scripted_backend.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace lw;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    enum { Pass, Fail, Skip } state = Pass;
    std::string detail;
};

// Collects failed expectations for one criterion.
struct Checker {
    std::vector<std::string> failures;
    void expect(bool ok, const std::string& what) {
        if (!ok && failures.size() < 5) failures.push_back(what);
        else if (!ok) failures.push_back("...");
    }
    Outcome result(const std::string& pass_detail) const {
        if (failures.empty()) return {Outcome::Pass, pass_detail};
        std::string d;
        for (const auto& f : failures) d += (d.empty() ? "" : "; ") + f;
        return {Outcome::Fail, d};
    }
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt_secs(double s) {
    std::ostringstream o;
    o.precision(2);
    o << std::fixed << s << "s";
    return o.str();
}

std::set<ViolationKind> kinds(const std::vector<Violation>& vs) {
    std::set<ViolationKind> out;
    for (const auto& v : vs) out.insert(v.rule);
    return out;
}

Outcome structural_suite() {
    Checker c;
    std::mt19937 rng(20250303);
    const auto t0 = Clock::now();
    int valid = 0;
    for (int i = 0; i < 1000; ++i) {
        auto l = lwtest::random_lattice(rng);
        auto vs = validate(l);
        c.expect(vs.empty(), "generated lattice " + std::to_string(i) + " has " + std::to_string(vs.size()) + " violations");
        valid += vs.empty();
    }
    const lwtest::Mutation kinds_cycle[] = {lwtest::Mutation::Relayer, lwtest::Mutation::EmptyEvidence,
                                            lwtest::Mutation::Dangling};
    int mutated = 0, exact = 0;
    while (mutated < 1000) {
        auto m = kinds_cycle[mutated % 3];
        auto l = lwtest::random_lattice(rng);
        if (!lwtest::mutate(l, m, rng)) continue;
        ++mutated;
        bool ok = kinds(validate(l)) == std::set{lwtest::expected_violation(m)};
        exact += ok;
        c.expect(ok, "mutation " + std::to_string(mutated) + " did not yield exactly " + to_string(lwtest::expected_violation(m)));
    }
    const double secs = seconds_since(t0);
    c.expect(secs < 10.0, "took " + fmt_secs(secs) + " (limit 10s)");
    return c.result(std::to_string(valid) + "/1000 valid clean, " + std::to_string(exact) + "/1000 mutations exact, " +
                    fmt_secs(secs));
}

Outcome provenance_oracle() {
    Checker c;
    std::mt19937 rng(7071);
    std::size_t checked = 0;
    for (int i = 0; i < 200; ++i) {
        auto l = lwtest::random_lattice(rng, {.max_nodes = 20, .max_layers = 4});
        std::size_t nodes = 0;
        for (const auto& layer : l.layers()) nodes += layer.size();
        c.expect(nodes <= 20, "lattice " + std::to_string(i) + " has " + std::to_string(nodes) + " nodes");
        for (const auto& layer : l.layers())
            for (const auto& id : layer) {
                auto trail = descendants(l, id);
                std::set<std::string> got;
                for (const auto& [_, ids] : trail.descendants_by_layer) got.insert(ids.begin(), ids.end());
                c.expect(got == lwtest::brute_force_closure(l, id), "closure mismatch at " + id);
                ++checked;
            }
    }
    return c.result("200 lattices, " + std::to_string(checked) + " nodes matched the brute-force closure");
}

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = lwtest::slurp(e.path());
    return out;
}

Outcome determinism() {
    Checker c;
    lwtest::TempDir dir;
    const auto t0 = Clock::now();
    for (const char* name : {"a", "b"}) {
        Engine engine(lwtest::config_for(dir / name));
        lwtest::run_pipeline(engine);
    }
    const double secs = seconds_since(t0);
    auto a = tree_bytes(dir / "a"), b = tree_bytes(dir / "b");
    c.expect(!a.empty(), "store is empty");
    c.expect(a.size() == b.size(), "file counts differ");
    for (const auto& [path, bytes] : a) {
        auto it = b.find(path);
        c.expect(it != b.end(), path + " missing from the second store");
        if (it != b.end()) c.expect(it->second == bytes, path + " differs");
    }
    c.expect(secs < 30.0, "took " + fmt_secs(secs) + " (limit 30s)");
    return c.result(std::to_string(a.size()) + " files byte-identical across two runs, " + fmt_secs(secs));
}

Outcome default_parameters() {
    Checker c;
    lwtest::TempDir dir;
    Config cfg;
    cfg.store_root = (dir / "store").string();
    Engine engine(cfg);
    lwtest::run_pipeline(engine);

    auto final = engine.final_lattice();
    c.expect(final.layer_count() == 3, "final lattice has " + std::to_string(final.layer_count()) + " layers");
    c.expect(validate(final).empty(), "final lattice does not validate");

    std::vector<TranscriptRecord> rs;
    for (int i = 0; i < 25; ++i) {
        TranscriptRecord r;
        r.timestamp = parse_rfc3339("2025-03-03T09:00:00Z") + std::chrono::minutes(i);
        r.text = "r" + std::to_string(i);
        rs.push_back(r);
    }
    auto ws = session_windows(segment_sessions(rs, cfg.ingest.session_policy).at(0), cfg.ingest.window_size);
    c.expect(ws.size() == 3 && ws[0].records.size() == 10 && ws[1].records.size() == 10 && ws[2].records.size() == 5,
             "25 records did not window as 10/10/5");

    for (auto [minutes, chunks] : {std::pair{179, 1}, {180, 2}, {181, 2}}) {
        auto a = rs[0], b = rs[0];
        b.timestamp += std::chrono::minutes(minutes);
        auto got = segment_sessions({a, b}, cfg.ingest.session_policy).at(0).chunks.size();
        c.expect(static_cast<int>(got) == chunks,
                 "gap of " + std::to_string(minutes) + "m gave " + std::to_string(got) + " chunks");
    }

    c.expect(cfg.tasking.utility_threshold == 0.75, "default threshold is not 0.75");
    Task at, above;
    at.title = "at";
    at.utility = UtilityScore{0.75, ""};
    above.title = "above";
    above.utility = UtilityScore{0.7500001, ""};
    auto g = partition_by_utility({at, above}, cfg.tasking.utility_threshold);
    c.expect(g.retained.size() == 1 && g.retained[0].title == "above", "gate is not strict at 0.75");

    c.expect(cfg.actions.top_k == 2, "default top-k is not 2");
    auto tasks = engine.stored_tasks(true);
    c.expect(!tasks.empty(), "no retained tasks");
    std::map<std::string, int> per_task;
    for (const auto& a : engine.actions()) {
        ++per_task[a.task_id];
        c.expect(a.steering_insight_ids.size() == std::min<std::size_t>(2, final.top_insights().size()),
                 "action " + a.id + " cites " + std::to_string(a.steering_insight_ids.size()) + " insights");
    }
    for (const auto& t : tasks) c.expect(per_task[t.id] == 2, "task " + t.id + " has " + std::to_string(per_task[t.id]) + " actions");
    return c.result("3 layers, 10/10/5 windows, 3h chunk boundary, strict 0.75 gate, top-2, " +
                    std::to_string(tasks.size()) + " tasks x 2 actions");
}

Outcome lossless_merge() {
    Checker c;
    lwtest::TempDir dir;
    Engine engine(lwtest::config_for(dir / "store"));
    engine.ingest(lwtest::fixture("planted_recurrence.jsonl"), lwtest::fixture("denylist.txt"));
    auto scopes = engine.build();
    engine.merge();
    auto final = engine.final_lattice();
    c.expect(validate(final).empty(), "merged lattice does not validate");

    std::set<std::string> inputs;
    std::map<std::string, std::string> session_of_top;
    for (const auto& s : scopes) {
        auto l = engine.store().load_lattice(s);
        for (const auto* in : l->top_insights()) {
            inputs.insert(in->id);
            session_of_top[in->id] = l->session_scope().at(0);
        }
    }
    std::set<std::string> merged_evidence, carried_evidence;
    bool spans_three = false, singleton_carried = false;
    for (const auto* in : final.top_insights()) {
        auto& bucket = in->carried_forward ? carried_evidence : merged_evidence;
        bucket.insert(in->evidence.begin(), in->evidence.end());
        if (!in->carried_forward && final.sessions_under(in->id).size() == 3) spans_three = true;
        if (in->carried_forward && in->description.find("#solo-detour") != std::string::npos) singleton_carried = true;
    }
    std::set<std::string> covered = merged_evidence;
    covered.insert(carried_evidence.begin(), carried_evidence.end());
    c.expect(spans_three, "no merged insight spans all 3 sessions");
    c.expect(singleton_carried, "the session-2 singleton was not carried forward");
    c.expect(covered == inputs, "coverage: " + std::to_string(covered.size()) + " covered vs " +
                                    std::to_string(inputs.size()) + " session insights");
    return c.result(std::to_string(inputs.size()) + " session insights = " + std::to_string(merged_evidence.size()) +
                    " merged evidence + " + std::to_string(carried_evidence.size()) + " carried forward");
}

Outcome privacy() {
    Checker c;
    lwtest::TempDir dir;
    Engine engine(lwtest::config_for(dir / "store"));
    auto ing = engine.ingest(lwtest::fixture("privacy_records.jsonl"), lwtest::fixture("denylist.txt"));
    engine.build();
    engine.merge();
    engine.tasks();
    engine.propose();
    for (const auto& a : engine.actions()) {
        engine.approve(a.id);
        engine.run_action(a.id);
    }
    c.expect(ing.dropped == 5, "drop count " + std::to_string(ing.dropped));
    std::size_t files = 0, hits = 0;
    for (const auto& [path, bytes] : tree_bytes(dir / "store")) {
        ++files;
        if (bytes.find("PLANTED-SECRET") != std::string::npos) {
            ++hits;
            c.expect(false, "planted text found in " + path);
        }
        c.expect(path.find("PLANTED-SECRET") == std::string::npos, "planted text in file name " + path);
    }
    return c.result("drop count 5, 0 planted strings in " + std::to_string(files) + " stored files");
}

ProposedAction approved_fixture_action() {
    ProposedAction a;
    a.id = "act-acceptance000001";
    a.task_id = "task-acceptance";
    a.title = "Draft a working plan for Writing an academic research paper";
    a.description = "Query an LLM to draft a step-by-step working plan and save it as a document on the local file system.";
    return approve(a);
}

Outcome agent_runtime() {
    Checker c;
    lwtest::TempDir dir;
    const auto action = approved_fixture_action();
    auto opts_in = [&](const std::string& name, std::size_t budget) {
        RunOptions o;
        o.sandbox_root = dir / name;
        o.budget = budget;
        o.web_fixtures = json::parse(lwtest::slurp(lwtest::fixture("web_fixtures.json")));
        return o;
    };

    MockBackend mock;
    auto done = run(action, builtin_tools(&mock), mock, opts_in("complete", 20));
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir / "complete")) files += e.is_regular_file();
    c.expect(done.outcome == RunOutcome::Completed, "scripted run did not complete (" + done.abort_reason + ")");
    c.expect(done.artifacts.size() == 1 && files == 1, "expected exactly 1 artifact in the sandbox");

    lwtest::ScriptedBackend scripted;
    scripted.on("agent_step", [](const Request& r, const std::string&) {
        const bool research = r.context.at("phase") == "research";
        const auto n = r.context.at("steps").size();
        json reply;
        if (research && n == 0)
            reply = {{"thought", "save notes now"}, {"tool", "fs_write"}, {"input", {{"path", "notes.md"}, {"content", "x"}}}};
        else if (research)
            reply = {{"thought", "done"}, {"finish", true}, {"summary", "nothing"}};
        else if (n == 0)
            reply = {{"thought", "write"}, {"tool", "fs_write"}, {"input", {{"path", "plan.md"}, {"content", "plan"}}}};
        else
            reply = {{"thought", "done"}, {"finish", true}};
        return reply.dump();
    });
    auto guarded = run(action, builtin_tools(&scripted), scripted, opts_in("guarded", 20));
    c.expect(!guarded.steps.empty() && guarded.steps[0].status == "rejected", "research-phase write was not rejected");
    c.expect(!fs::exists(dir / "guarded" / guarded.run_id / "notes.md"), "research-phase write reached disk");

    auto short_run = run(action, builtin_tools(&mock), mock, opts_in("budget", 1));
    c.expect(short_run.outcome == RunOutcome::Incomplete, "budget-1 run reported complete");

    auto again = run(action, builtin_tools(&mock), mock, opts_in("rerun", 20));
    c.expect(again.steps == done.steps, "rerun trace differs");
    c.expect(again.artifacts == done.artifacts, "rerun artifacts differ");
    return c.result("1 artifact, research write rejected, budget-1 incomplete, rerun trace identical (" +
                    std::to_string(done.steps.size()) + " steps)");
}

Outcome live_endpoint() {
    const char* url = std::getenv("LW_LIVE_ENDPOINT");
    if (!url || !*url) return {Outcome::Skip, "set LW_LIVE_ENDPOINT (and LW_API_TOKEN) to run against a real backend"};
    Checker c;
    lwtest::TempDir dir;
    Config cfg;
    cfg.store_root = (dir / "store").string();
    cfg.backend.endpoint_url = url;
    cfg.ingest.session_policy = SessionPolicy::ChatThread;
    cfg.synthesis.user_name = "Amy";
    Engine engine(cfg);
    engine.ingest(lwtest::fixture("amy_chat.jsonl"), lwtest::fixture("denylist.txt"));
    auto scopes = engine.build();
    engine.merge();
    auto final = engine.final_lattice();
    c.expect(final.layer_count() == 3, "final lattice has " + std::to_string(final.layer_count()) + " layers");
    c.expect(validate(final).empty(), "final lattice does not validate");
    std::size_t session_insights = 0;
    for (const auto& s : scopes) session_insights += engine.store().load_lattice(s)->top_insights().size();
    c.expect(session_insights >= 3, "only " + std::to_string(session_insights) + " session insights");
    return c.result("3-layer lattice, " + std::to_string(session_insights) + " session insights");
}

} // namespace

int main() {
    spdlog::set_level(spdlog::level::off);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"lattice structural suite", structural_suite},
        {"provenance oracle", provenance_oracle},
        {"pipeline determinism", determinism},
        {"default-parameter conformance", default_parameters},
        {"lossless cross-session merge", lossless_merge},
        {"privacy filtering", privacy},
        {"agent runtime", agent_runtime},
        {"live endpoint smoke", live_endpoint},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {Outcome::Fail, std::string("exception: ") + e.what()};
        }
        const char* tag = o.state == Outcome::Pass ? "PASS" : o.state == Outcome::Skip ? "SKIP" : "FAIL";
        failed += o.state == Outcome::Fail;
        std::cout << tag << "  " << name << "  (" << o.detail << ")" << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
