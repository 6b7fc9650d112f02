#include "latticework/tasking.hpp"

#include "latticework/backend.hpp"
#include "latticework/error.hpp"
#include "latticework/hashing.hpp"
#include "latticework/prompts.hpp"
#include "latticework/text_util.hpp"
#include "parallel.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <map>
#include <set>

namespace lw {

using nlohmann::json;

json to_json(const Task& t) {
    json j = {{"id", t.id},
              {"title", t.title},
              {"supporting_actions", t.supporting_actions},
              {"source_windows", t.source_windows},
              {"source_session", t.source_session}};
    j["utility"] = t.utility ? json{{"value", t.utility->value}, {"rationale", t.utility->rationale}} : json(nullptr);
    return j;
}

Task task_from_json(const json& j) {
    try {
        Task t;
        t.id = j.at("id").get<std::string>();
        t.title = j.at("title").get<std::string>();
        t.supporting_actions = j.at("supporting_actions").get<std::vector<std::string>>();
        t.source_windows = j.value("source_windows", std::vector<std::string>{});
        t.source_session = j.at("source_session").get<std::string>();
        if (j.contains("utility") && !j.at("utility").is_null())
            t.utility = UtilityScore{j.at("utility").at("value").get<double>(),
                                     j.at("utility").value("rationale", std::string())};
        if (t.title.empty() || t.supporting_actions.empty())
            throw Error(ErrorCode::InvalidInput, "task needs a title and supporting actions");
        return t;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidInput, std::string("malformed task: ") + e.what());
    }
}

std::vector<WindowAction> infer_window_actions(const std::vector<Window>& windows, ModelBackend& backend,
                                               const std::string& user_name) {
    std::vector<WindowAction> out;
    for (const auto& w : windows) {
        if (w.records.empty()) continue;
        std::string lines;
        json records = json::array();
        for (const auto& r : w.records) {
            lines += "[" + format_rfc3339(r.timestamp) + "] " + r.text + "\n";
            records.push_back(to_json(r));
        }
        Request req;
        req.role = ModelRole::Insight;
        req.task = "window_actions";
        req.prompt = render_prompt("window_actions", {{"USER", user_name}, {"RECORDS", lines}});
        req.schema = {{"type", "object"},
                      {"required", {"actions"}},
                      {"properties",
                       {{"actions", {{"type", "array"}, {"minItems", 1}, {"items", {{"type", "string"}}}}}}}};
        req.context = {{"window_id", w.id}, {"records", records}};
        auto resp = backend.call(req);
        for (const auto& a : resp.parsed.at("actions")) {
            std::string text = trim(a.get<std::string>());
            if (!text.empty()) out.push_back({w.id, std::move(text)});
        }
    }
    return out;
}

std::vector<Task> synthesize_tasks(const std::vector<WindowAction>& actions, const std::string& session_id,
                                   ModelBackend& backend, const std::string& user_name) {
    if (actions.empty()) return {};

    std::vector<std::string> texts;
    std::map<std::string, std::vector<std::string>> windows_of;
    for (const auto& a : actions) {
        auto& ws = windows_of[a.text];
        if (ws.empty()) texts.push_back(a.text);
        if (std::find(ws.begin(), ws.end(), a.window_id) == ws.end()) ws.push_back(a.window_id);
    }
    std::string lines;
    for (std::size_t i = 0; i < texts.size(); ++i) lines += std::to_string(i + 1) + ". " + texts[i] + "\n";

    Request req;
    req.role = ModelRole::Insight;
    req.task = "tasks";
    req.prompt = render_prompt("tasks", {{"USER", user_name}, {"ACTIONS", lines}});
    req.schema = {{"type", "object"},
                  {"required", {"tasks"}},
                  {"properties",
                   {{"tasks",
                     {{"type", "array"},
                      {"items",
                       {{"type", "object"},
                        {"required", {"title", "supporting_actions"}},
                        {"properties",
                         {{"title", {{"type", "string"}, {"minLength", 1}}},
                          {"supporting_actions", {{"type", "array"}, {"items", {{"type", "string"}}}}}}}}}}}}}};
    req.context = {{"actions", texts}};
    auto resp = backend.call(req);

    std::vector<Task> out;
    std::set<std::string> seen;
    for (const auto& t : resp.parsed.at("tasks")) {
        Task task;
        task.title = trim(t.at("title").get<std::string>());
        task.source_session = session_id;
        for (const auto& s : t.at("supporting_actions")) {
            std::string text = trim(s.get<std::string>());
            auto it = windows_of.find(text);
            if (it == windows_of.end()) {
                spdlog::info("synthesize_tasks repair: dropped unsupported action \"{}\"", text);
                continue;
            }
            if (std::find(task.supporting_actions.begin(), task.supporting_actions.end(), text) !=
                task.supporting_actions.end())
                continue;
            task.supporting_actions.push_back(text);
            for (const auto& w : it->second)
                if (std::find(task.source_windows.begin(), task.source_windows.end(), w) == task.source_windows.end())
                    task.source_windows.push_back(w);
        }
        if (task.title.empty() || task.supporting_actions.empty()) {
            spdlog::info("synthesize_tasks repair: dropped task without title or support");
            continue;
        }
        task.id = content_id("task", {{"session", session_id},
                                      {"title", task.title},
                                      {"supporting_actions", task.supporting_actions}});
        if (seen.insert(task.id).second) out.push_back(std::move(task));
    }
    return out;
}

GateResult partition_by_utility(std::vector<Task> scored, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw Error(ErrorCode::InvalidInput, "utility threshold must lie in [0, 1]");
    GateResult result;
    for (auto& t : scored) {
        if (!t.utility) throw Error(ErrorCode::InvalidInput, "task " + t.id + " has no utility score");
        (t.utility->value > threshold ? result.retained : result.rejected).push_back(std::move(t));
    }
    return result;
}

GateResult gate_tasks(std::vector<Task> tasks, double threshold, const std::vector<Insight>& insights,
                      ModelBackend& backend, std::size_t workers) {
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw Error(ErrorCode::InvalidInput, "utility threshold must lie in [0, 1]");

    std::string insight_lines;
    json insight_ctx = json::array();
    for (const auto& in : insights) {
        std::string text = in.title + ": " + in.description;
        insight_lines += "- " + text + "\n";
        insight_ctx.push_back({{"id", in.id}, {"text", text}});
    }

    auto scores = detail::parallel_map<UtilityScore>(tasks.size(), workers, [&](std::size_t i) {
        const Task& t = tasks[i];
        Request req;
        req.role = ModelRole::Insight;
        req.task = "utility";
        req.prompt = render_prompt("utility", {{"TASK", t.title + "\nSupporting actions:\n- " +
                                                            join(t.supporting_actions, "\n- ")},
                                               {"INSIGHTS", insight_lines}});
        req.schema = {{"type", "object"},
                      {"required", {"score", "rationale"}},
                      {"properties", {{"score", {{"type", "number"}}}, {"rationale", {{"type", "string"}}}}}};
        req.context = {{"task", {{"title", t.title}, {"supporting_actions", t.supporting_actions}}},
                       {"insights", insight_ctx}};
        auto resp = backend.call(req);
        double value = resp.parsed.at("score").get<double>();
        if (value < 0.0 || value > 1.0) {
            spdlog::warn("utility score {} for task {} out of range; clamped", value, t.id);
            value = std::clamp(value, 0.0, 1.0);
        }
        return UtilityScore{value, resp.parsed.at("rationale").get<std::string>()};
    });
    for (std::size_t i = 0; i < tasks.size(); ++i) tasks[i].utility = scores[i];
    return partition_by_utility(std::move(tasks), threshold);
}

} // namespace lw
