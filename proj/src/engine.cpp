#include "latticework/engine.hpp"

#include "latticework/error.hpp"
#include "latticework/prompts.hpp"
#include "latticework/synthesis.hpp"
#include "parallel.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

namespace lw {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(RatingDimension d) {
    switch (d) {
        case RatingDimension::Accuracy:         return "accuracy";
        case RatingDimension::Depth:            return "depth";
        case RatingDimension::ImmediateUtility: return "immediate_utility";
        case RatingDimension::UnderlyingNeeds:  return "underlying_needs";
        case RatingDimension::Novelty:          return "novelty";
        case RatingDimension::ExecutionQuality: return "execution_quality";
    }
    return "accuracy";
}

RatingDimension rating_dimension_from_string(const std::string& s) {
    for (auto d : {RatingDimension::Accuracy, RatingDimension::Depth, RatingDimension::ImmediateUtility,
                   RatingDimension::UnderlyingNeeds, RatingDimension::Novelty, RatingDimension::ExecutionQuality})
        if (to_string(d) == s) return d;
    throw Error(ErrorCode::InvalidInput, "unknown rating dimension " + s);
}

std::pair<int, int> rating_bounds(RatingDimension d) {
    switch (d) {
        case RatingDimension::Accuracy:
        case RatingDimension::Depth:
        case RatingDimension::ExecutionQuality: return {-3, 3};
        default:                                return {1, 7};
    }
}

json to_json(const Rating& r) {
    return {{"subject", r.subject},
            {"dimension", to_string(r.dimension)},
            {"value", r.value},
            {"rater_note", r.rater_note ? json(*r.rater_note) : json(nullptr)},
            {"created_at", r.created_at}};
}

namespace {

const char* kSessionsDoc = "ingest/sessions.json";
const char* kBuildDoc = "build/sessions.json";
const char* kMergeDoc = "merge/final.json";
const char* kTasksDoc = "tasks/tasks.json";
const char* kRatingsLog = "ratings/ratings.jsonl";

[[noreturn]] void missing(const std::string& stage, const std::string& needs) {
    throw Error(ErrorCode::MissingPredecessor, stage + " needs the output of `" + needs + "` first");
}

std::string run_dir(const std::string& run_id) { return "runs/" + run_id; }

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

Engine::Engine(Config config, std::shared_ptr<ModelBackend> backend)
    : config_(std::move(config)), store_(config_.store_root), backend_(std::move(backend)) {
    config_.check();
    if (config_.synthesis.max_layers < 3)
        throw Error(ErrorCode::ConfigError, "the pipeline needs synthesis.max_layers >= 3 (session layers plus a merged layer)");
    if (!backend_) backend_ = make_backend(config_.backend);
}

IngestSummary Engine::ingest(const fs::path& records_path, const std::optional<fs::path>& denylist_path) {
    DenylistConfig denylist;
    if (denylist_path) {
        denylist = read_denylist(*denylist_path);
    } else if (!config_.ingest.denylist_path.empty()) {
        denylist = read_denylist(config_.ingest.denylist_path);
    }
    denylist.enabled = config_.ingest.filter_enabled;
    if (denylist.enabled && denylist.keywords.empty() && denylist.url_patterns.empty())
        throw Error(ErrorCode::ConfigError,
                    "privacy filtering is enabled but no denylist was given (use --denylist or ingest.filter_enabled = false)");
    return ingest_records(read_records_jsonl(records_path), denylist);
}

IngestSummary Engine::ingest_records(std::vector<TranscriptRecord> records, const DenylistConfig& denylist) {
    auto filtered = filter_sensitive(std::move(records), denylist);
    const auto tz = TimeZone::parse(config_.ingest.timezone);
    auto bundles = segment_sessions(std::move(filtered.kept), config_.ingest.session_policy, tz);

    IngestSummary summary;
    summary.dropped = filtered.dropped;
    json sessions = json::array();
    for (const auto& b : bundles) {
        summary.kept += b.records.size();
        summary.sessions.push_back(b.session_id);
        sessions.push_back(to_json(b));
    }
    store_.write_json(kSessionsDoc, {{"timezone", tz.name()},
                                     {"policy", to_string(config_.ingest.session_policy)},
                                     {"dropped", filtered.dropped},
                                     {"sessions", sessions}});
    spdlog::info("ingest: kept {} records in {} sessions, dropped {}", summary.kept, bundles.size(), summary.dropped);
    return summary;
}

std::vector<SessionBundle> Engine::sessions() const {
    auto doc = store_.read_json(kSessionsDoc);
    if (!doc) missing("this stage", "ingest");
    std::vector<SessionBundle> out;
    for (const auto& s : doc->at("sessions")) out.push_back(bundle_from_json(s));
    return out;
}

std::vector<std::string> Engine::build() {
    if (!store_.exists(kSessionsDoc)) missing("build", "ingest");
    const auto bundles = sessions();

    SynthesisConfig session_cfg = config_.synthesis;
    session_cfg.max_layers = config_.synthesis.max_layers - 1;

    std::vector<std::string> previous;
    if (auto doc = store_.read_json(kBuildDoc))
        for (const auto& s : doc->at("sessions")) previous.push_back(s.at("scope").get<std::string>());

    std::vector<std::string> scopes;
    json listing = json::array();
    for (const auto& bundle : bundles) {
        const auto windows = session_windows(bundle, config_.ingest.window_size);
        auto per_window = detail::parallel_map<std::vector<Observation>>(
            windows.size(), config_.synthesis.workers,
            [&](std::size_t i) { return extract_observations(windows[i], *backend_, config_.synthesis.user_name); });
        std::vector<Observation> observations;
        std::vector<std::string> window_ids;
        for (std::size_t i = 0; i < windows.size(); ++i) {
            window_ids.push_back(windows[i].id);
            for (auto& o : per_window[i]) observations.push_back(std::move(o));
        }
        const std::size_t n_obs = observations.size();
        Lattice lattice = build_session_lattice(bundle.session_id, std::move(observations), std::move(window_ids),
                                                session_cfg, *backend_);
        const std::string scope = store_.save_lattice(lattice);
        spdlog::info("build: session {} -> {} observations, {} layers", bundle.session_id, n_obs, lattice.layer_count());
        scopes.push_back(scope);
        listing.push_back({{"session_id", bundle.session_id}, {"scope", scope}});
    }
    for (const auto& old : previous)
        if (std::find(scopes.begin(), scopes.end(), old) == scopes.end()) store_.remove("lattices/" + old);
    store_.write_json(kBuildDoc, {{"sessions", listing}});
    return scopes;
}

std::string Engine::merge() {
    auto doc = store_.read_json(kBuildDoc);
    if (!doc) missing("merge", "build");
    std::vector<Lattice> lattices;
    std::vector<std::string> session_ids;
    for (const auto& s : doc->at("sessions")) {
        auto l = store_.load_lattice(s.at("scope").get<std::string>());
        if (!l) missing("merge", "build");
        lattices.push_back(std::move(*l));
        session_ids.push_back(s.at("session_id").get<std::string>());
    }
    if (lattices.empty()) throw Error(ErrorCode::InvalidInput, "no sessions to merge");
    Lattice merged = merge_cross_session(lattices, config_.synthesis, *backend_);
    const std::string scope = store_.save_lattice(merged);
    store_.write_json(kMergeDoc, {{"scope", scope}, {"sessions", session_ids}});
    spdlog::info("merge: {} sessions -> {} final insights", lattices.size(), merged.layers().back().size());
    return scope;
}

Lattice Engine::final_lattice() const {
    auto doc = store_.read_json(kMergeDoc);
    if (!doc) missing("this stage", "merge");
    auto l = store_.load_lattice(doc->at("scope").get<std::string>());
    if (!l) missing("this stage", "merge");
    return std::move(*l);
}

std::vector<Insight> Engine::final_insights() const {
    const Lattice lattice = final_lattice();
    std::vector<Insight> out;
    for (const auto* in : lattice.top_insights()) out.push_back(*in);
    return out;
}

TasksSummary Engine::tasks() {
    if (!store_.exists(kMergeDoc)) missing("tasks", "merge");
    const auto insights = final_insights();
    const auto bundles = sessions();
    if (bundles.empty()) throw Error(ErrorCode::InvalidInput, "no sessions were ingested");

    const SessionBundle* day = nullptr;
    if (!config_.tasking.task_day.empty()) {
        for (const auto& b : bundles)
            if (b.session_id == config_.tasking.task_day) day = &b;
        if (!day) throw Error(ErrorCode::NotFound, "no session " + config_.tasking.task_day);
    } else {
        for (const auto& b : bundles)
            if (!day || b.records.back().timestamp >= day->records.back().timestamp) day = &b;
    }

    const auto windows = rolling_windows(*day, config_.tasking.window_size, config_.tasking.window_stride);
    const auto actions = infer_window_actions(windows, *backend_, config_.synthesis.user_name);
    auto candidates = synthesize_tasks(actions, day->session_id, *backend_, config_.synthesis.user_name);
    auto gated = gate_tasks(std::move(candidates), config_.tasking.utility_threshold, insights, *backend_,
                            config_.synthesis.workers);

    json retained = json::array(), rejected = json::array();
    for (const auto& t : gated.retained) retained.push_back(to_json(t));
    for (const auto& t : gated.rejected) rejected.push_back(to_json(t));
    store_.write_json(kTasksDoc, {{"task_day", day->session_id},
                                  {"threshold", config_.tasking.utility_threshold},
                                  {"retained", retained},
                                  {"rejected", rejected}});
    spdlog::info("tasks: day {} -> {} retained, {} rejected", day->session_id, gated.retained.size(), gated.rejected.size());
    return {day->session_id, std::move(gated.retained), std::move(gated.rejected)};
}

std::vector<Task> Engine::stored_tasks(bool retained_only) const {
    auto doc = store_.read_json(kTasksDoc);
    if (!doc) missing("this stage", "tasks");
    std::vector<Task> out;
    for (const auto& t : doc->at("retained")) out.push_back(task_from_json(t));
    if (!retained_only)
        for (const auto& t : doc->at("rejected")) out.push_back(task_from_json(t));
    return out;
}

std::vector<ProposedAction> Engine::propose() {
    if (!store_.exists(kTasksDoc)) missing("propose", "tasks");
    const auto tasks = stored_tasks(true);
    const auto insights = final_insights();
    const auto cons = constraints();

    std::vector<ProposedAction> out;
    for (const auto& task : tasks) {
        for (const auto& cname : config_.actions.conditions) {
            ProposalInput input;
            input.task = task;
            input.condition = condition_from_string(cname);
            input.user_name = config_.synthesis.user_name;
            if (input.condition == Condition::InsightSteered) {
                input.insights = retrieve_insights(task, insights, config_.actions.top_k, *backend_);
                if (input.insights.empty()) {
                    spdlog::warn("propose: no insights to steer task {}; skipped", task.id);
                    continue;
                }
            } else {
                input.task_context = summarize_task_context(task, *backend_);
            }
            for (auto& a : propose_actions(input, cons, *backend_)) {
                if (auto existing = store_.load_action(a.id)) {
                    out.push_back(std::move(*existing));
                    continue;
                }
                store_.save_action(a);
                out.push_back(std::move(a));
            }
        }
    }
    spdlog::info("propose: {} actions for {} tasks", out.size(), tasks.size());
    return out;
}

std::vector<ProposedAction> Engine::actions() const { return store_.load_actions(); }

ProposedAction Engine::action(const std::string& id) const {
    auto a = store_.load_action(id);
    if (!a) throw Error(ErrorCode::NotFound, "no action " + id);
    return std::move(*a);
}

ProposedAction Engine::steer(const std::string& id, const std::string& note) {
    return store_.update_action(id, [&](ProposedAction a) { return lw::steer(std::move(a), note); });
}

ProposedAction Engine::approve(const std::string& id) {
    return store_.update_action(id, [](ProposedAction a) { return lw::approve(std::move(a)); });
}

std::string Engine::start_run(const std::string& id) {
    auto updated = store_.update_action(id, [](ProposedAction a) {
        const std::string rid = run_id_for(a);
        return mark_running(std::move(a), rid);
    });
    store_.remove(run_dir(updated.run_id));
    return updated.run_id;
}

AgentRun Engine::execute_run(const std::string& id) {
    ProposedAction current = action(id);
    if (current.status != ActionStatus::Running)
        throw Error(ErrorCode::InvalidStatus, "action " + id + " has not been started");
    const std::string rid = current.run_id;
    const std::string trace_rel = run_dir(rid) + "/trace.jsonl";

    ProposedAction approved = current;
    approved.status = ActionStatus::Approved;
    RunOptions options = run_options(rid);
    options.on_step = [&](const StepTrace& s) { store_.append_line(trace_rel, to_json(s).dump()); };

    AgentRun result;
    try {
        ToolRegistry tools = builtin_tools(backend_.get());
        result = run(approved, tools, *backend_, options);
    } catch (const Error& e) {
        result.run_id = rid;
        result.action_id = id;
        result.outcome = RunOutcome::Incomplete;
        result.abort_reason = std::string(to_string(e.code()));
        store_.write_json(run_dir(rid) + "/run.json", to_json(result));
        store_.update_action(id, [](ProposedAction a) { return mark_finished(std::move(a), false); });
        throw;
    }
    store_.write_json(run_dir(rid) + "/run.json", to_json(result));
    store_.update_action(id, [&](ProposedAction a) {
        return mark_finished(std::move(a), result.outcome == RunOutcome::Completed);
    });
    return result;
}

std::optional<json> Engine::run_summary(const std::string& run_id) const {
    if (run_id.find('/') != std::string::npos || run_id.find("..") != std::string::npos) return std::nullopt;
    return store_.read_json(run_dir(run_id) + "/run.json");
}

std::vector<json> Engine::run_trace(const std::string& run_id) const {
    std::vector<json> out;
    if (run_id.find('/') != std::string::npos || run_id.find("..") != std::string::npos) return out;
    auto text = store_.read_text(run_dir(run_id) + "/trace.jsonl");
    if (!text) return out;
    std::stringstream ss(*text);
    std::string line;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::exception&) {
            break;  // a partially written last line
        }
    }
    return out;
}

json Engine::export_insights() const {
    const Lattice lattice = final_lattice();
    json insights = json::array();
    for (const auto* in : lattice.top_insights()) {
        const auto trail = descendants(lattice, in->id);
        json leaves = json::array();
        for (const auto& oid : trail.leaf_observations) {
            const auto* o = lattice.find_observation(oid);
            leaves.push_back({{"id", o->id}, {"session_id", o->session_id}, {"source_window", o->source_window}, {"text", o->text}});
        }
        json by_layer = json::object();
        for (const auto& [layer, ids] : trail.descendants_by_layer) by_layer[std::to_string(layer)] = ids;
        insights.push_back({{"id", in->id},
                            {"title", in->title},
                            {"description", in->description},
                            {"contexts", in->contexts},
                            {"carried_forward", in->carried_forward},
                            {"evidence", in->evidence},
                            {"sessions", lattice.sessions_under(in->id)},
                            {"provenance", {{"nodes_by_layer", by_layer}, {"leaf_observations", leaves}}}});
    }
    return {{"scope", scope_hash(lattice.session_scope())},
            {"session_scope", lattice.session_scope()},
            {"layer_count", lattice.layer_count()},
            {"prompt_templates", prompt_templates_version()},
            {"insights", insights}};
}

json Engine::provenance(const std::string& node_id) const {
    const Lattice lattice = final_lattice();
    const auto trail = descendants(lattice, node_id);
    json nodes = json::object();
    json edges = json::array();
    for (const auto& [layer, ids] : trail.descendants_by_layer) {
        nodes[std::to_string(layer)] = ids;
        for (const auto& id : ids)
            if (const auto* in = lattice.find_insight(id))
                for (const auto& ev : in->evidence) edges.push_back({{"from", id}, {"to", ev}});
    }
    return {{"root", trail.root}, {"nodes", nodes}, {"edges", edges}, {"leaf_observations", trail.leaf_observations}};
}

Rating Engine::add_rating(const std::string& subject, const std::string& dimension, int value,
                          const std::optional<std::string>& note) {
    Rating r;
    r.subject = subject;
    r.dimension = rating_dimension_from_string(dimension);
    r.value = value;
    r.rater_note = note;
    const auto [lo, hi] = rating_bounds(r.dimension);
    if (value < lo || value > hi)
        throw Error(ErrorCode::RatingOutOfRange, dimension + " ratings lie in [" + std::to_string(lo) + ", " +
                                                     std::to_string(hi) + "], got " + std::to_string(value));

    auto act = store_.load_action(subject);
    bool known = act.has_value();
    if (!known && store_.exists(kMergeDoc)) known = final_lattice().contains(subject);
    if (!known) throw Error(ErrorCode::NotFound, "no insight or action " + subject);

    const auto now = std::chrono::floor<std::chrono::milliseconds>(std::chrono::system_clock::now());
    r.created_at = format_rfc3339(now);
    store_.append_line(kRatingsLog, to_json(r).dump());

    if (act && r.dimension == RatingDimension::ExecutionQuality && !act->run_id.empty()) {
        const std::string rel = run_dir(act->run_id) + "/run.json";
        if (auto doc = store_.read_json(rel)) {
            (*doc)["quality_rating"] = value;
            store_.write_json(rel, *doc);
        }
    }
    return r;
}

std::vector<json> Engine::ratings() const {
    std::vector<json> out;
    auto text = store_.read_text(kRatingsLog);
    if (!text) return out;
    std::stringstream ss(*text);
    std::string line;
    while (std::getline(ss, line))
        if (!line.empty()) out.push_back(json::parse(line));
    return out;
}

RunOptions Engine::run_options(const std::string& run_id) const {
    (void)run_id;
    RunOptions o;
    o.budget = config_.agent.budget;
    o.result_byte_cap = config_.agent.result_byte_cap;
    o.sandbox_root = config_.agent.sandbox_root.empty() ? fs::path(config_.store_root) / "sandbox"
                                                        : fs::path(config_.agent.sandbox_root);
    for (const auto& r : config_.agent.read_roots) o.read_roots.emplace_back(r);
    o.calendar_path = config_.agent.calendar_path;
    if (!config_.agent.web_fixtures_path.empty()) {
        try {
            o.web_fixtures = json::parse(read_file(config_.agent.web_fixtures_path));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::ConfigError, "web fixtures file is not JSON: " + std::string(e.what()));
        }
    }
    return o;
}

ImplementationConstraints Engine::constraints() const {
    if (config_.actions.constraints_path.empty()) return default_constraints();
    return parse_constraints(read_file(config_.actions.constraints_path));
}

} // namespace lw
