#include "latticework/agent.hpp"

#include "latticework/backend.hpp"
#include "latticework/error.hpp"
#include "latticework/hashing.hpp"
#include "latticework/prompts.hpp"
#include "latticework/text_util.hpp"
#include "latticework/timeutil.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace lw {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(SideEffect s) {
    switch (s) {
        case SideEffect::Read:    return "read";
        case SideEffect::Write:   return "write";
        case SideEffect::Network: return "network";
    }
    return "read";
}

std::string to_string(Phase p) { return p == Phase::Research ? "research" : "execution"; }

std::string to_string(RunOutcome o) { return o == RunOutcome::Completed ? "completed" : "incomplete"; }

namespace {

SideEffect side_effect_from_string(const std::string& s) {
    for (auto e : {SideEffect::Read, SideEffect::Write, SideEffect::Network})
        if (to_string(e) == s) return e;
    throw Error(ErrorCode::InvalidInput, "unknown side effect " + s);
}

bool within(const fs::path& p, const fs::path& root) {
    auto rel = p.lexically_relative(root);
    return !rel.empty() && *rel.begin() != "..";
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

fs::path ToolContext::resolve_write(const std::string& relative) const {
    const fs::path root = fs::weakly_canonical(sandbox_root);
    fs::path rel(relative);
    if (relative.empty() || rel.is_absolute())
        throw Error(ErrorCode::SandboxViolation, "write target must be a relative path: " + relative);
    fs::path target = fs::weakly_canonical(root / run_id / rel);
    if (!within(target, root)) throw Error(ErrorCode::SandboxViolation, "write escapes the sandbox: " + relative);
    return target;
}

fs::path ToolContext::resolve_read(const std::string& relative) const {
    const fs::path root = fs::weakly_canonical(sandbox_root);
    fs::path rel(relative.empty() ? "." : relative);
    fs::path target = fs::weakly_canonical(rel.is_absolute() ? rel : root / rel);
    std::vector<fs::path> roots = read_roots.empty() ? std::vector<fs::path>{root} : read_roots;
    for (const auto& r : roots) {
        fs::path cr = fs::weakly_canonical(r);
        if (target == cr || within(target, cr)) return target;
    }
    throw Error(ErrorCode::ToolError, "path outside readable roots: " + relative);
}

std::string ToolContext::relative_to_sandbox(const fs::path& p) const {
    auto rel = fs::weakly_canonical(p).lexically_relative(fs::weakly_canonical(sandbox_root));
    return rel.empty() ? "." : rel.generic_string();
}

ToolRegistry& ToolRegistry::register_tool(ToolSpec spec, ToolHandler handler) {
    if (spec.name.empty()) throw Error(ErrorCode::InvalidInput, "tool name is empty");
    if (tools_.count(spec.name)) throw Error(ErrorCode::DuplicateTool, "tool already registered: " + spec.name);
    std::string name = spec.name;
    tools_.emplace(std::move(name), Entry{std::move(spec), std::move(handler)});
    return *this;
}

const ToolSpec& ToolRegistry::spec(const std::string& name) const {
    auto it = tools_.find(name);
    if (it == tools_.end()) throw Error(ErrorCode::ToolError, "unknown tool " + name);
    return it->second.spec;
}

std::string ToolRegistry::invoke(const std::string& name, const json& input, const ToolContext& ctx) const {
    auto it = tools_.find(name);
    if (it == tools_.end()) throw Error(ErrorCode::ToolError, "unknown tool " + name);
    try {
        return it->second.handler(input, ctx);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ToolError, name + ": bad input: " + e.what());
    } catch (const fs::filesystem_error& e) {
        throw Error(ErrorCode::ToolError, name + ": " + e.code().message());
    }
}

std::vector<ToolSpec> ToolRegistry::specs() const {
    std::vector<ToolSpec> out;
    for (const auto& [_, e] : tools_) out.push_back(e.spec);
    return out;
}

ToolRegistry& register_tool(ToolRegistry& registry, ToolSpec spec, ToolHandler handler) {
    return registry.register_tool(std::move(spec), std::move(handler));
}

bool permitted(Phase phase, SideEffect effect) {
    return phase == Phase::Execution || effect != SideEffect::Write;
}

namespace {

json path_schema(bool with_content = false) {
    json props = {{"path", {{"type", "string"}}}};
    if (with_content) props["content"] = {{"type", "string"}};
    json required = with_content ? json{"path", "content"} : json{"path"};
    return {{"type", "object"}, {"required", required}, {"properties", props}};
}

// Timestamp in the compact UTC form used by ICS, e.g. 20240305T140000Z.
std::string ics_time(const std::string& rfc3339) {
    std::string s = format_rfc3339(parse_rfc3339(rfc3339));
    std::string out;
    for (char c : s.substr(0, 19))
        if (c != '-' && c != ':') out += c;
    return out + "Z";
}

std::string calendar_events(const std::string& ics) {
    std::string out, summary, start, end;
    bool in_event = false;
    std::stringstream ss(ics);
    std::string line;
    while (std::getline(ss, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line == "BEGIN:VEVENT") {
            in_event = true;
            summary = start = end = "";
        } else if (line == "END:VEVENT") {
            in_event = false;
            out += start + " - " + end + ": " + summary + "\n";
        } else if (in_event) {
            auto colon = line.find(':');
            if (colon == std::string::npos) continue;
            std::string key = line.substr(0, line.find_first_of(";:"));
            std::string value = line.substr(colon + 1);
            if (key == "SUMMARY") summary = value;
            else if (key == "DTSTART") start = value;
            else if (key == "DTEND") end = value;
        }
    }
    return out.empty() ? "(no events)" : out;
}

fs::path calendar_file(const ToolContext& ctx) {
    if (ctx.calendar_path.empty()) throw Error(ErrorCode::ToolError, "no calendar configured");
    return ctx.calendar_path.is_absolute() ? ctx.calendar_path : ctx.sandbox_root / ctx.calendar_path;
}

void record_written(const ToolContext& ctx, const fs::path& p) {
    if (!ctx.written) return;
    auto rel = ctx.relative_to_sandbox(p);
    if (std::find(ctx.written->begin(), ctx.written->end(), rel) == ctx.written->end()) ctx.written->push_back(rel);
}

} // namespace

ToolRegistry builtin_tools(ModelBackend* backend) {
    ToolRegistry reg;
    reg.register_tool({"fs_list", "List the entries of a directory", path_schema(), SideEffect::Read},
                      [](const json& in, const ToolContext& ctx) {
                          auto dir = ctx.resolve_read(in.value("path", std::string(".")));
                          if (!fs::is_directory(dir)) throw Error(ErrorCode::ToolError, "not a directory");
                          std::vector<std::string> names;
                          for (const auto& e : fs::directory_iterator(dir))
                              names.push_back(e.path().filename().string() + (e.is_directory() ? "/" : ""));
                          std::sort(names.begin(), names.end());
                          return names.empty() ? std::string("(empty)") : join(names, "\n");
                      });
    reg.register_tool({"fs_read", "Read a text file", path_schema(), SideEffect::Read},
                      [](const json& in, const ToolContext& ctx) {
                          auto p = ctx.resolve_read(in.at("path").get<std::string>());
                          if (!fs::is_regular_file(p)) throw Error(ErrorCode::ToolError, "no such file");
                          return read_file(p);
                      });
    reg.register_tool({"fs_write", "Write a text file under the run directory", path_schema(true), SideEffect::Write},
                      [](const json& in, const ToolContext& ctx) {
                          auto p = ctx.resolve_write(in.at("path").get<std::string>());
                          const auto content = in.at("content").get<std::string>();
                          fs::create_directories(p.parent_path());
                          std::ofstream(p, std::ios::binary) << content;
                          record_written(ctx, p);
                          return "wrote " + std::to_string(content.size()) + " bytes to " + ctx.relative_to_sandbox(p);
                      });
    reg.register_tool({"web_search",
                       "Search the web",
                       {{"type", "object"}, {"required", {"query"}}, {"properties", {{"query", {{"type", "string"}}}}}},
                       SideEffect::Network},
                      [](const json& in, const ToolContext& ctx) {
                          const auto query = in.at("query").get<std::string>();
                          const json* hits = nullptr;
                          for (auto it = ctx.web_fixtures.begin(); it != ctx.web_fixtures.end(); ++it)
                              if (to_lower(it.key()) == to_lower(query)) hits = &it.value();
                          if (!hits && ctx.web_fixtures.contains("*")) hits = &ctx.web_fixtures.at("*");
                          if (!hits || hits->empty()) return "No results for \"" + query + "\".";
                          std::string out;
                          for (const auto& h : *hits)
                              out += h.value("title", "") + " <" + h.value("url", "") + ">\n  " + h.value("snippet", "") + "\n";
                          return out;
                      });
    reg.register_tool({"calendar_read", "List calendar events", {{"type", "object"}}, SideEffect::Read},
                      [](const json&, const ToolContext& ctx) {
                          auto p = calendar_file(ctx);
                          return fs::exists(p) ? calendar_events(read_file(p)) : std::string("(no events)");
                      });
    reg.register_tool({"calendar_write",
                       "Add a calendar event",
                       {{"type", "object"},
                        {"required", {"summary", "start", "end"}},
                        {"properties",
                         {{"summary", {{"type", "string"}}}, {"start", {{"type", "string"}}}, {"end", {{"type", "string"}}}}}},
                       SideEffect::Write},
                      [](const json& in, const ToolContext& ctx) {
                          auto p = fs::weakly_canonical(calendar_file(ctx));
                          if (!within(p, fs::weakly_canonical(ctx.sandbox_root)))
                              throw Error(ErrorCode::SandboxViolation, "calendar file lies outside the sandbox");
                          std::string start, end;
                          try {
                              start = ics_time(in.at("start").get<std::string>());
                              end = ics_time(in.at("end").get<std::string>());
                          } catch (const Error& e) {
                              throw Error(ErrorCode::ToolError, e.what());
                          }
                          const auto summary = in.at("summary").get<std::string>();
                          std::string ics = fs::exists(p) ? read_file(p) : "BEGIN:VCALENDAR\r\nVERSION:2.0\r\nPRODID:-//latticework//agent//EN\r\nEND:VCALENDAR\r\n";
                          auto tail = ics.rfind("END:VCALENDAR");
                          if (tail == std::string::npos) throw Error(ErrorCode::ToolError, "calendar file is not an ICS calendar");
                          std::string event = "BEGIN:VEVENT\r\nUID:" + content_id("evt", {summary, start, end}) +
                                              "\r\nDTSTART:" + start + "\r\nDTEND:" + end + "\r\nSUMMARY:" + summary +
                                              "\r\nEND:VEVENT\r\n";
                          ics.insert(tail, event);
                          fs::create_directories(p.parent_path());
                          std::ofstream(p, std::ios::binary) << ics;
                          record_written(ctx, p);
                          return "added event \"" + summary + "\" " + start + " - " + end;
                      });
    reg.register_tool({"llm_query",
                       "Ask a language model",
                       {{"type", "object"}, {"required", {"query"}}, {"properties", {{"query", {{"type", "string"}}}}}},
                       SideEffect::Network},
                      [backend](const json& in, const ToolContext&) {
                          if (!backend) throw Error(ErrorCode::ToolError, "no model backend available");
                          Request req;
                          req.role = ModelRole::Agent;
                          req.task = "llm_query";
                          req.prompt = in.at("query").get<std::string>();
                          req.schema = {{"type", "object"},
                                        {"required", {"answer"}},
                                        {"properties", {{"answer", {{"type", "string"}}}}}};
                          req.context = {{"query", in.at("query")}};
                          try {
                              return backend->call(req).parsed.at("answer").get<std::string>();
                          } catch (const Error& e) {
                              throw Error(ErrorCode::ToolError, std::string("llm_query failed: ") + e.what());
                          }
                      });
    return reg;
}

json to_json(const StepTrace& s) {
    return {{"seq", s.seq},
            {"phase", to_string(s.phase)},
            {"thought", s.thought},
            {"tool", s.tool},
            {"input", s.input},
            {"result", s.result},
            {"status", s.status},
            {"side_effect", s.side_effect ? json(to_string(*s.side_effect)) : json(nullptr)}};
}

StepTrace step_from_json(const json& j) {
    try {
        StepTrace s;
        s.seq = j.at("seq").get<std::size_t>();
        s.phase = j.at("phase").get<std::string>() == "research" ? Phase::Research : Phase::Execution;
        s.thought = j.value("thought", "");
        s.tool = j.value("tool", "");
        s.input = j.value("input", json::object());
        s.result = j.value("result", "");
        s.status = j.at("status").get<std::string>();
        if (j.contains("side_effect") && !j.at("side_effect").is_null())
            s.side_effect = side_effect_from_string(j.at("side_effect").get<std::string>());
        return s;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptPayload, std::string("malformed trace step: ") + e.what());
    }
}

json to_json(const AgentRun& r) {
    return {{"run_id", r.run_id},
            {"action_id", r.action_id},
            {"outcome", to_string(r.outcome)},
            {"abort_reason", r.abort_reason},
            {"research_summary", r.research_summary},
            {"artifacts", r.artifacts},
            {"step_count", r.steps.size()},
            {"quality_rating", r.quality_rating ? json(*r.quality_rating) : json(nullptr)}};
}

std::string run_id_for(const ProposedAction& action) {
    return content_id("run", {{"action", action.id}});
}

namespace {

std::string truncate_result(std::string s, std::size_t cap) {
    if (s.size() <= cap) return s;
    std::size_t cut = cap;
    while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;  // keep UTF-8 whole
    std::size_t dropped = s.size() - cut;
    s.resize(cut);
    return s + "\n[truncated " + std::to_string(dropped) + " bytes]";
}

std::string phase_rules(Phase phase) {
    return phase == Phase::Research
               ? "Research phase: gather the context needed to carry out the action. Only tools that read or search are allowed; do not write anything."
               : "Execution phase: carry out the action using the research findings and produce the deliverable files.";
}

} // namespace

AgentRun run(const ProposedAction& action, const ToolRegistry& registry, ModelBackend& backend,
             const RunOptions& options) {
    if (action.status != ActionStatus::Approved)
        throw Error(ErrorCode::InvalidStatus, "action " + action.id + " is " + to_string(action.status) + ", not approved");
    if (options.budget < 1) throw Error(ErrorCode::InvalidInput, "step budget must be >= 1");
    if (options.sandbox_root.empty()) throw Error(ErrorCode::ConfigError, "agent sandbox root is not configured");
    fs::create_directories(options.sandbox_root);

    AgentRun result;
    result.run_id = run_id_for(action);
    result.action_id = action.id;

    std::vector<std::string> written;
    ToolContext ctx;
    ctx.sandbox_root = fs::weakly_canonical(options.sandbox_root);
    ctx.run_id = result.run_id;
    ctx.read_roots = options.read_roots;
    ctx.calendar_path = options.calendar_path;
    ctx.web_fixtures = options.web_fixtures;
    ctx.written = &written;

    std::string tool_lines;
    json tool_names = json::array();
    for (const auto& s : registry.specs()) {
        tool_lines += "- " + s.name + " (" + to_string(s.side_effect) + "): " + s.description + "; input " +
                      s.input_schema.dump() + "\n";
        tool_names.push_back(s.name);
    }
    const std::string notes = action.notes.empty() ? "(none)" : "- " + join(action.notes, "\n- ");

    std::size_t seq = 0;
    auto record = [&](StepTrace step) {
        step.seq = ++seq;
        if (options.on_step) options.on_step(step);
        result.steps.push_back(std::move(step));
    };
    auto finish_run = [&](RunOutcome outcome, std::string_view reason) {
        result.outcome = outcome;
        result.abort_reason = std::string(reason);
        for (const auto& w : written)
            if (fs::exists(ctx.sandbox_root / w)) result.artifacts.push_back(w);
        return result;
    };

    for (Phase phase : {Phase::Research, Phase::Execution}) {
        json phase_steps = json::array();
        std::string history;
        bool finished = false;
        bool no_artifact = false;
        for (std::size_t n = 0; n < options.budget && !finished; ++n) {
            Request req;
            req.role = ModelRole::Agent;
            req.task = "agent_step";
            req.prompt = render_prompt("agent_step",
                                       {{"PHASE", to_string(phase)},
                                        {"PHASE_RULES", phase_rules(phase)},
                                        {"ACTION", action.title + "\n" + action.description},
                                        {"NOTES", notes},
                                        {"RESEARCH", phase == Phase::Research ? "(research in progress)" : result.research_summary},
                                        {"TOOLS", tool_lines},
                                        {"HISTORY", history.empty() ? "(none)" : history}});
            req.schema = {{"type", "object"},
                          {"required", {"thought"}},
                          {"properties",
                           {{"thought", {{"type", "string"}}},
                            {"tool", {{"type", "string"}}},
                            {"input", {{"type", "object"}}},
                            {"finish", {{"type", "boolean"}}},
                            {"summary", {{"type", "string"}}},
                            {"no_artifact", {{"type", "boolean"}}}}}};
            req.context = {{"phase", to_string(phase)},
                           {"steps", phase_steps},
                           {"action", {{"id", action.id}, {"title", action.title}, {"description", action.description}}},
                           {"notes", action.notes},
                           {"research_summary", result.research_summary},
                           {"tools", tool_names}};

            json reply;
            try {
                reply = backend.call(req).parsed;
            } catch (const Error& e) {
                StepTrace step{0, phase, "", "", json::object(), e.what(), "aborted", std::nullopt};
                record(step);
                return finish_run(RunOutcome::Incomplete, to_string(e.code()));
            }

            StepTrace step;
            step.phase = phase;
            step.thought = reply.value("thought", "");
            if (reply.value("finish", false)) {
                step.status = "finish";
                step.result = reply.value("summary", "");
                no_artifact = reply.value("no_artifact", false);
                finished = true;
                if (phase == Phase::Research) result.research_summary = step.result;
            } else {
                step.tool = reply.value("tool", "");
                step.input = reply.value("input", json::object());
                if (!registry.has(step.tool)) {
                    step.status = "tool_error";
                    step.result = step.tool.empty() ? "no tool given" : "unknown tool " + step.tool;
                } else if (const auto effect = registry.spec(step.tool).side_effect; !permitted(phase, effect)) {
                    step.status = "rejected";
                    step.result = "tool " + step.tool + " has " + to_string(effect) + " side effects and is not allowed in the " +
                                  to_string(phase) + " phase";
                } else {
                    try {
                        step.result = truncate_result(registry.invoke(step.tool, step.input, ctx), options.result_byte_cap);
                        step.status = "ok";
                        step.side_effect = effect;
                    } catch (const Error& e) {
                        if (e.code() == ErrorCode::SandboxViolation) {
                            step.status = "aborted";
                            step.result = e.what();
                            record(step);
                            spdlog::warn("run {} aborted: {}", result.run_id, e.what());
                            return finish_run(RunOutcome::Incomplete, to_string(e.code()));
                        }
                        step.status = "tool_error";
                        step.result = e.what();
                    }
                }
            }
            json sj = to_json(step);
            sj["seq"] = seq + 1;
            phase_steps.push_back(sj);
            history += "- " + (step.status == "finish" ? std::string("finish") : step.tool + " " + step.input.dump()) +
                       " -> [" + step.status + "] " + step.result + "\n";
            record(std::move(step));
        }
        if (!finished) return finish_run(RunOutcome::Incomplete, to_string(ErrorCode::BudgetExhausted));
        if (phase == Phase::Execution) {
            if (written.empty() && !no_artifact) return finish_run(RunOutcome::Incomplete, "NoArtifact");
            return finish_run(RunOutcome::Completed, "");
        }
    }
    return finish_run(RunOutcome::Incomplete, "");
}

} // namespace lw
