#include "latticework/actions.hpp"

#include "latticework/backend.hpp"
#include "latticework/error.hpp"
#include "latticework/hashing.hpp"
#include "latticework/prompts.hpp"
#include "latticework/text_util.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <sstream>

namespace lw {

using nlohmann::json;

namespace {

std::vector<std::string> split_keywords(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = to_lower(trim(item));
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Case-insensitive phrase match that respects word boundaries.
bool mentions(const std::string& lowered_text, const std::string& keyword) {
    for (std::size_t pos = lowered_text.find(keyword); pos != std::string::npos;
         pos = lowered_text.find(keyword, pos + 1)) {
        const bool left = pos == 0 || !is_word_char(lowered_text[pos - 1]);
        const std::size_t end = pos + keyword.size();
        const bool right = end >= lowered_text.size() || !is_word_char(lowered_text[end]);
        if (left && right) return true;
    }
    return false;
}

} // namespace

bool ImplementationConstraints::grants(const std::string& capability) const {
    return std::any_of(capabilities.begin(), capabilities.end(), [&](const Capability& c) { return c.name == capability; });
}

std::string ImplementationConstraints::describe() const {
    std::string out = "The agent can:\n";
    for (const auto& c : capabilities) out += "- " + c.description + "\n";
    out += "The agent cannot:\n";
    for (const auto& p : prohibitions) out += "- " + p.description + "\n";
    return out;
}

ImplementationConstraints parse_constraints(const std::string& text) {
    ImplementationConstraints out;
    std::string section;
    std::stringstream ss(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            auto body = trim(t.substr(1));
            if (body.rfind("version:", 0) == 0) out.version = trim(body.substr(8));
            continue;
        }
        if (t.front() == '[' && t.back() == ']') {
            section = trim(t.substr(1, t.size() - 2));
            if (section != "capabilities" && section != "prohibitions")
                throw Error(ErrorCode::ConfigError, "constraints line " + std::to_string(line_no) +
                                                        ": unknown section [" + section + "]");
            continue;
        }
        auto colon = t.find(':');
        if (colon == std::string::npos || section.empty())
            throw Error(ErrorCode::ConfigError, "constraints line " + std::to_string(line_no) + ": expected 'name: description'");
        std::string name = trim(t.substr(0, colon));
        std::string rest = t.substr(colon + 1);
        auto bar = rest.find('|');
        std::string description = trim(rest.substr(0, bar));
        auto keywords = bar == std::string::npos ? std::vector<std::string>{} : split_keywords(rest.substr(bar + 1));
        if (name.empty() || description.empty())
            throw Error(ErrorCode::ConfigError, "constraints line " + std::to_string(line_no) + ": empty name or description");
        if (section == "capabilities")
            out.capabilities.push_back({name, description, keywords});
        else
            out.prohibitions.push_back({name, description, keywords});
    }
    if (out.capabilities.empty()) throw Error(ErrorCode::ConfigError, "constraints grant no capabilities");
    if (out.version.empty()) out.version = "unversioned";
    return out;
}

ImplementationConstraints default_constraints() {
    return parse_constraints(default_constraints_text());
}

const std::vector<Capability>& capability_catalog() {
    static const std::vector<Capability> catalog = [] {
        auto caps = default_constraints().capabilities;
        caps.push_back({"slides", "Create or edit slide decks", {"slides", "slide deck", "powerpoint", "keynote deck"}});
        caps.push_back({"cloud_drive", "Access cloud storage", {"google drive", "cloud drive", "dropbox", "onedrive"}});
        caps.push_back({"send_message",
                        "Send messages on the user's behalf",
                        {"send an email", "send the email", "send a message", "send messages", "post on behalf"}});
        caps.push_back({"browser_automation", "Operate a web browser", {"click through", "fill out the form", "log in to"}});
        return caps;
    }();
    return catalog;
}

std::vector<std::string> screen_feasibility(const std::string& text, const ImplementationConstraints& constraints) {
    std::vector<std::string> reasons;
    const std::string lowered = to_lower(text);
    for (const auto& cap : capability_catalog()) {
        if (constraints.grants(cap.name)) continue;
        for (const auto& kw : cap.keywords) {
            if (mentions(lowered, kw)) {
                reasons.push_back("needs capability '" + cap.name + "' (\"" + kw + "\")");
                break;
            }
        }
    }
    for (const auto& p : constraints.prohibitions) {
        for (const auto& kw : p.keywords) {
            if (mentions(lowered, kw)) {
                reasons.push_back("violates prohibition '" + p.name + "' (\"" + kw + "\")");
                break;
            }
        }
    }
    return reasons;
}

std::string to_string(Condition c) {
    return c == Condition::InsightSteered ? "insight_steered" : "context_steered";
}

Condition condition_from_string(const std::string& s) {
    if (s == "insight_steered") return Condition::InsightSteered;
    if (s == "context_steered") return Condition::ContextSteered;
    throw Error(ErrorCode::InvalidInput, "unknown condition " + s);
}

std::string to_string(ActionStatus s) {
    switch (s) {
        case ActionStatus::Proposed:      return "proposed";
        case ActionStatus::InfoRequested: return "info_requested";
        case ActionStatus::Approved:      return "approved";
        case ActionStatus::Running:       return "running";
        case ActionStatus::Done:          return "done";
        case ActionStatus::Failed:        return "failed";
    }
    return "proposed";
}

ActionStatus action_status_from_string(const std::string& s) {
    for (auto st : {ActionStatus::Proposed, ActionStatus::InfoRequested, ActionStatus::Approved, ActionStatus::Running,
                    ActionStatus::Done, ActionStatus::Failed})
        if (to_string(st) == s) return st;
    throw Error(ErrorCode::InvalidInput, "unknown action status " + s);
}

json to_json(const ProposedAction& a) {
    return {{"id", a.id},
            {"task_id", a.task_id},
            {"title", a.title},
            {"description", a.description},
            {"steering_insight_ids", a.steering_insight_ids},
            {"steering_context", a.steering_context},
            {"notes", a.notes},
            {"condition", to_string(a.condition_tag)},
            {"status", to_string(a.status)},
            {"run_id", a.run_id}};
}

ProposedAction action_from_json(const json& j) {
    try {
        ProposedAction a;
        a.id = j.at("id").get<std::string>();
        a.task_id = j.at("task_id").get<std::string>();
        a.title = j.at("title").get<std::string>();
        a.description = j.at("description").get<std::string>();
        a.steering_insight_ids = j.value("steering_insight_ids", std::vector<std::string>{});
        a.steering_context = j.value("steering_context", std::string());
        a.notes = j.value("notes", std::vector<std::string>{});
        a.condition_tag = condition_from_string(j.at("condition").get<std::string>());
        a.status = action_status_from_string(j.at("status").get<std::string>());
        a.run_id = j.value("run_id", std::string());
        return a;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidInput, std::string("malformed action: ") + e.what());
    }
}

std::vector<Insight> retrieve_insights(const Task& task, const std::vector<Insight>& final_insights, std::size_t k,
                                       ModelBackend& backend) {
    if (k == 0) throw Error(ErrorCode::InvalidInput, "top-k must be >= 1");
    if (final_insights.empty()) return {};
    std::vector<RerankCandidate> candidates;
    for (const auto& in : final_insights) candidates.push_back({in.id, in.title + ": " + in.description});
    const std::string query = task.title + "\n" + join(task.supporting_actions, "\n");
    auto ranked = backend.rerank(query, candidates);
    std::vector<Insight> out;
    for (std::size_t i = 0; i < ranked.size() && out.size() < k; ++i) {
        auto it = std::find_if(final_insights.begin(), final_insights.end(),
                               [&](const Insight& in) { return in.id == ranked[i].id; });
        out.push_back(*it);
    }
    return out;
}

std::string summarize_task_context(const Task& task, ModelBackend& backend) {
    Request req;
    req.role = ModelRole::Action;
    req.task = "summarize_context";
    req.prompt = render_prompt("summarize_context",
                               {{"TASK", task.title}, {"ACTIONS", "- " + join(task.supporting_actions, "\n- ")}});
    req.schema = {{"type", "object"},
                  {"required", {"summary"}},
                  {"properties", {{"summary", {{"type", "string"}, {"minLength", 1}}}}}};
    req.context = {{"task", task.title}, {"actions", task.supporting_actions}};
    return trim(backend.call(req).parsed.at("summary").get<std::string>());
}

std::vector<ProposedAction> propose_actions(const ProposalInput& input, const ImplementationConstraints& constraints,
                                            ModelBackend& backend) {
    const bool steered = input.condition == Condition::InsightSteered;
    if (steered && input.insights.empty())
        throw Error(ErrorCode::InvalidInput, "insight-steered proposal needs at least one insight");

    std::string label = steered ? "USER INSIGHTS" : "TASK CONTEXT";
    std::string steering;
    std::vector<std::string> ids, titles;
    if (steered) {
        for (const auto& in : input.insights) {
            steering += "- " + in.title + ": " + in.description + "\n";
            ids.push_back(in.id);
            titles.push_back(in.title);
        }
    } else {
        steering = input.task_context;
    }

    Request req;
    req.role = ModelRole::Action;
    req.task = "propose";
    req.prompt = render_prompt("propose", {{"USER", input.user_name},
                                           {"STEERING_LABEL", label},
                                           {"TASK", input.task.title},
                                           {"STEERING", steering},
                                           {"CONSTRAINTS", constraints.describe()}});
    req.schema = {{"type", "object"},
                  {"required", {"actions"}},
                  {"properties",
                   {{"actions",
                     {{"type", "array"},
                      {"minItems", kActionsPerTask},
                      {"maxItems", kActionsPerTask},
                      {"items",
                       {{"type", "object"},
                        {"required", {"title", "description"}},
                        {"properties",
                         {{"title", {{"type", "string"}, {"minLength", 1}}},
                          {"description", {{"type", "string"}, {"minLength", 1}}}}}}}}}}}};
    req.context = {{"task", input.task.title},
                   {"supporting_actions", input.task.supporting_actions},
                   {"condition", to_string(input.condition)},
                   {"steering_titles", titles},
                   {"steering", steering}};

    const std::string base_prompt = req.prompt;
    for (int attempt = 0; attempt < 2; ++attempt) {
        auto resp = backend.call(req);
        std::vector<std::string> problems;
        for (const auto& a : resp.parsed.at("actions")) {
            for (auto& r : screen_feasibility(a.at("title").get<std::string>() + "\n" +
                                                  a.at("description").get<std::string>(),
                                              constraints))
                problems.push_back(a.at("title").get<std::string>() + ": " + r);
        }
        if (problems.empty()) {
            std::vector<ProposedAction> out;
            std::size_t index = 0;
            for (const auto& a : resp.parsed.at("actions")) {
                ProposedAction pa;
                pa.task_id = input.task.id;
                pa.title = trim(a.at("title").get<std::string>());
                pa.description = trim(a.at("description").get<std::string>());
                pa.steering_insight_ids = ids;
                pa.steering_context = steering;
                pa.condition_tag = input.condition;
                pa.id = content_id("act", {{"task", input.task.id},
                                           {"condition", to_string(input.condition)},
                                           {"index", index++},
                                           {"title", pa.title}});
                out.push_back(std::move(pa));
            }
            return out;
        }
        if (attempt == 1)
            throw Error(ErrorCode::InfeasibleAfterRetry,
                        "task " + input.task.id + ": proposals remain outside the constraints: " + join(problems, "; "));
        spdlog::warn("proposal for task {} infeasible, re-asking: {}", input.task.id, join(problems, "; "));
        req.prompt = base_prompt + "\n\nThe previous proposal could not be implemented (" + join(problems, "; ") +
                     "). Propose 2 actions that stay within the IMPLEMENTATION CONSTRAINTS.";
        req.context["infeasible"] = problems;
    }
    return {};
}

namespace {

[[noreturn]] void bad_transition(const ProposedAction& a, const std::string& op) {
    throw Error(ErrorCode::InvalidStatus, "cannot " + op + " action " + a.id + " in status " + to_string(a.status));
}

} // namespace

ProposedAction steer(ProposedAction action, const std::string& user_note) {
    if (action.status != ActionStatus::Proposed && action.status != ActionStatus::InfoRequested)
        bad_transition(action, "steer");
    std::string note = trim(user_note);
    if (note.empty()) throw Error(ErrorCode::EmptyNote, "steering note is empty");
    action.notes.push_back(std::move(note));
    action.status = ActionStatus::InfoRequested;
    return action;
}

ProposedAction approve(ProposedAction action) {
    if (action.status != ActionStatus::Proposed && action.status != ActionStatus::InfoRequested)
        bad_transition(action, "approve");
    action.status = ActionStatus::Approved;
    return action;
}

ProposedAction mark_running(ProposedAction action, const std::string& run_id) {
    if (action.status != ActionStatus::Approved) bad_transition(action, "run");
    action.status = ActionStatus::Running;
    action.run_id = run_id;
    return action;
}

ProposedAction mark_finished(ProposedAction action, bool completed) {
    if (action.status != ActionStatus::Running) bad_transition(action, "finish");
    action.status = completed ? ActionStatus::Done : ActionStatus::Failed;
    return action;
}

} // namespace lw
