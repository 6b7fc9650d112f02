#include "latticework/mock_backend.hpp"

#include "latticework/error.hpp"
#include "latticework/text_util.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

namespace lw {

using nlohmann::json;

namespace {

std::string short_id(const std::string& id) {
    auto dash = id.find('-');
    std::string head = dash == std::string::npos ? id : id.substr(0, dash);
    std::string tail = dash == std::string::npos ? id : id.substr(dash + 1);
    return head + "-" + tail.substr(0, 6);
}

std::string hashtag_list(const std::set<std::string>& tags) {
    std::vector<std::string> parts;
    for (const auto& t : tags) parts.push_back("#" + t);
    return join(parts, " ");
}

std::vector<std::string> phrases(const std::set<std::string>& tags) {
    std::vector<std::string> out;
    for (const auto& t : tags) out.push_back(tag_phrase(t));
    if (out.empty()) out.push_back("General");
    return out;
}

struct TagGroup {
    std::vector<std::string> members;  // element order
    std::set<std::string> tags;        // tags that produced this member set
};

// Per-tag member sets of size >= 2, identical sets folded together, and sets
// strictly contained in another set dropped.
std::vector<TagGroup> maximal_tag_groups(const json& elements,
                                         const std::function<bool(const std::vector<std::string>&)>& accept) {
    std::map<std::string, std::vector<std::string>> by_tag;
    for (const auto& el : elements) {
        for (const auto& tag : hashtags(el.at("text").get<std::string>()))
            by_tag[tag].push_back(el.at("id").get<std::string>());
    }
    std::vector<TagGroup> groups;
    for (auto& [tag, members] : by_tag) {
        if (members.size() < 2 || !accept(members)) continue;
        auto same = std::find_if(groups.begin(), groups.end(), [&](const TagGroup& g) { return g.members == members; });
        if (same != groups.end()) {
            same->tags.insert(tag);
        } else {
            groups.push_back({members, {tag}});
        }
    }
    auto subset_of = [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
        std::set<std::string> sb(b.begin(), b.end());
        return a.size() < b.size() && std::all_of(a.begin(), a.end(), [&](const auto& x) { return sb.count(x) > 0; });
    };
    std::vector<TagGroup> maximal;
    for (const auto& g : groups) {
        bool dominated = std::any_of(groups.begin(), groups.end(), [&](const TagGroup& o) { return subset_of(g.members, o.members); });
        if (!dominated) maximal.push_back(g);
    }
    return maximal;
}

json mock_observe(const json& ctx) {
    json obs = json::array();
    for (const auto& r : ctx.at("records")) obs.push_back({{"text", r.at("text")}});
    return {{"observations", obs}};
}

json mock_group(const json& ctx) {
    json groups = json::array();
    for (const auto& g : maximal_tag_groups(ctx.at("elements"), [](const auto&) { return true; })) {
        groups.push_back({{"evidence", g.members}, {"rationale", "Recurring " + hashtag_list(g.tags)}});
    }
    return {{"groups", groups}};
}

json mock_synthesize(const json& ctx) {
    std::vector<std::string> ids;
    std::set<std::string> tags;
    for (const auto& el : ctx.at("evidence")) {
        ids.push_back(el.at("id").get<std::string>());
        auto t = hashtags(el.at("text").get<std::string>());
        tags.insert(t.begin(), t.end());
    }
    std::sort(ids.begin(), ids.end());
    std::vector<std::string> shorts;
    for (const auto& id : ids) shorts.push_back(short_id(id));
    std::string description = "Links " + std::to_string(ids.size()) + " elements";
    if (!tags.empty()) description += " sharing " + hashtag_list(tags);
    description += ".";
    json contexts = json::array();
    if (ctx.value("final_layer", false)) contexts = phrases(tags);
    return {{"title", "Pattern across " + join(shorts, ", ")}, {"description", description}, {"contexts", contexts}};
}

json mock_merge(const json& ctx) {
    const json& insights = ctx.at("insights");
    std::map<std::string, std::set<std::string>> sessions_of;
    for (const auto& in : insights)
        sessions_of[in.at("id").get<std::string>()] = in.at("sessions").get<std::set<std::string>>();
    auto spans_two = [&](const std::vector<std::string>& members) {
        std::set<std::string> s;
        for (const auto& m : members) s.insert(sessions_of[m].begin(), sessions_of[m].end());
        return s.size() >= 2;
    };
    json merged = json::array();
    std::set<std::string> used;
    for (const auto& g : maximal_tag_groups(insights, spans_two)) {
        std::set<std::string> sessions;
        for (const auto& m : g.members) {
            sessions.insert(sessions_of[m].begin(), sessions_of[m].end());
            used.insert(m);
        }
        std::vector<std::string> phrase_list = phrases(g.tags);
        merged.push_back({{"title", "Recurring pattern: " + join(phrase_list, "; ")},
                          {"description", "Appears in " + std::to_string(sessions.size()) + " sessions (" +
                                              join(std::vector<std::string>(sessions.begin(), sessions.end()), ", ") +
                                              ") around " + hashtag_list(g.tags) + "."},
                          {"evidence", g.members},
                          {"contexts", phrase_list}});
    }
    json unmerged = json::array();
    for (const auto& in : insights)
        if (!used.count(in.at("id").get<std::string>())) unmerged.push_back(in.at("id"));
    return {{"merged", merged}, {"unmerged", unmerged}};
}

json mock_window_actions(const json& ctx) {
    json actions = json::array();
    for (const auto& r : ctx.at("records")) actions.push_back(r.at("text"));
    return {{"actions", actions}};
}

json mock_tasks(const json& ctx) {
    std::map<std::string, std::vector<std::string>> by_tag;
    for (const auto& a : ctx.at("actions")) {
        const auto text = a.get<std::string>();
        for (const auto& tag : hashtags(text)) {
            auto& v = by_tag[tag];
            if (std::find(v.begin(), v.end(), text) == v.end()) v.push_back(text);
        }
    }
    json tasks = json::array();
    for (const auto& [tag, support] : by_tag) {
        if (support.size() < 2) continue;  // single-step goals fail the rubric
        tasks.push_back({{"title", tag_phrase(tag)}, {"supporting_actions", support}});
    }
    return {{"tasks", tasks}};
}

json mock_utility(const json& ctx) {
    const json& task = ctx.at("task");
    std::set<std::string> task_tags = hashtags(task.at("title").get<std::string>());
    for (const auto& a : task.at("supporting_actions")) {
        auto t = hashtags(a.get<std::string>());
        task_tags.insert(t.begin(), t.end());
    }
    for (const auto& in : ctx.at("insights")) {
        for (const auto& t : hashtags(in.at("text").get<std::string>())) {
            if (task_tags.count(t))
                return {{"score", 0.9}, {"rationale", "Deep understanding of the user would change the response (#" + t + ")."}};
        }
    }
    return {{"score", 0.1}, {"rationale", "Generic AI assistance is sufficient."}};
}

json mock_summarize_context(const json& ctx) {
    std::vector<std::string> actions = ctx.at("actions").get<std::vector<std::string>>();
    return {{"summary", "Recent activity: " + join(actions, "; ")}};
}

json mock_propose(const json& ctx) {
    const std::string task = ctx.at("task").get<std::string>();
    std::string steering;
    if (ctx.at("condition").get<std::string>() == "insight_steered") {
        steering = "shaped by the user insights \"" +
                   join(ctx.at("steering_titles").get<std::vector<std::string>>(), "\" and \"") + "\"";
    } else {
        steering = "grounded in the task context";
    }
    return {{"actions",
             json::array({{{"title", "Draft a working plan for " + task},
                           {"description", "Query an LLM to draft a step-by-step working plan for \"" + task + "\", " +
                                               steering + ", and save it as a document on the local file system."}},
                          {{"title", "Collect background sources for " + task},
                           {"description", "Conduct a web search for background material on \"" + task + "\", " +
                                               steering + ", and write a short annotated reading list to a file."}}})}};
}

json mock_agent_step(const json& ctx) {
    const std::string phase = ctx.at("phase").get<std::string>();
    const json& steps = ctx.at("steps");
    if (phase == "research") {
        if (steps.empty())
            return {{"thought", "Survey the files available in the sandbox."}, {"tool", "fs_list"}, {"input", {{"path", "."}}}};
        std::string last = steps.back().value("result", "");
        return {{"thought", "Enough context gathered."}, {"finish", true}, {"summary", "Sandbox listing: " + last}};
    }
    if (steps.empty()) {
        const json& action = ctx.at("action");
        std::string content = "# " + action.at("title").get<std::string>() + "\n\n" +
                              action.at("description").get<std::string>() + "\n";
        const auto notes = ctx.at("notes").get<std::vector<std::string>>();
        if (!notes.empty()) content += "\n## Notes from the user\n\n- " + join(notes, "\n- ") + "\n";
        content += "\n## Research\n\n" + ctx.value("research_summary", std::string()) + "\n";
        return {{"thought", "Write the deliverable."},
                {"tool", "fs_write"},
                {"input", {{"path", slugify(action.at("title").get<std::string>()) + ".md"}, {"content", content}}}};
    }
    return {{"thought", "Deliverable written."}, {"finish", true}, {"summary", "Wrote the deliverable."}};
}

json mock_transcribe(const json& ctx) {
    std::size_t n = ctx.contains("image_data_urls") ? ctx.at("image_data_urls").size() : 0;
    return {{"transcription", "[mock transcription of " + std::to_string(n) + " captures]"}};
}

json mock_llm_query(const json& ctx) {
    return {{"answer", "[mock answer] " + ctx.value("query", std::string())}};
}

} // namespace

MockBackend::MockBackend(BackendConfig config) : ModelBackend(std::move(config)) {}

double MockBackend::overlap_score(const std::string& query, const std::string& document) {
    auto q = word_tokens(query);
    auto d = word_tokens(document);
    std::set<std::string> qs(q.begin(), q.end());
    std::set<std::string> ds(d.begin(), d.end());
    if (qs.empty() && ds.empty()) return 0.0;
    std::size_t inter = 0;
    for (const auto& t : qs) inter += ds.count(t);
    std::size_t uni = qs.size() + ds.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

std::string MockBackend::complete(const Request& request, const std::string& /*prompt*/) {
    const json& ctx = request.context;
    json payload;
    try {
        if (request.task == "observe") payload = mock_observe(ctx);
        else if (request.task == "group") payload = mock_group(ctx);
        else if (request.task == "synthesize") payload = mock_synthesize(ctx);
        else if (request.task == "merge") payload = mock_merge(ctx);
        else if (request.task == "window_actions") payload = mock_window_actions(ctx);
        else if (request.task == "tasks") payload = mock_tasks(ctx);
        else if (request.task == "utility") payload = mock_utility(ctx);
        else if (request.task == "summarize_context") payload = mock_summarize_context(ctx);
        else if (request.task == "propose") payload = mock_propose(ctx);
        else if (request.task == "agent_step") payload = mock_agent_step(ctx);
        else if (request.task == "transcribe") payload = mock_transcribe(ctx);
        else if (request.task == "llm_query") payload = mock_llm_query(ctx);
        else throw Error(ErrorCode::BackendError, "mock backend has no rule for task " + request.task);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::BackendError, "mock backend: malformed context for " + request.task + ": " + e.what());
    }
    return payload.dump();
}

std::vector<double> MockBackend::score(const std::string& query, const std::vector<std::string>& documents) {
    std::vector<double> out;
    out.reserve(documents.size());
    for (const auto& d : documents) out.push_back(overlap_score(query, d));
    return out;
}

} // namespace lw
