#pragma once
// Two-phase ReAct runtime: a read-only research phase followed by an
// execution phase that may write artifacts, over a pluggable tool registry.

#include "latticework/actions.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lw {

class ModelBackend;

enum class SideEffect { Read, Write, Network };
enum class Phase { Research, Execution };

std::string to_string(SideEffect s);
std::string to_string(Phase p);

struct ToolSpec {
    std::string name;
    std::string description;
    nlohmann::json input_schema = nlohmann::json::object();
    SideEffect side_effect = SideEffect::Read;
};

// Everything a tool may touch. Paths are resolved by the helpers below so
// that traces only ever carry sandbox-relative paths.
struct ToolContext {
    std::filesystem::path sandbox_root;
    std::string run_id;
    std::vector<std::filesystem::path> read_roots;  // defaults to the sandbox
    std::filesystem::path calendar_path;            // ICS file inside the sandbox
    nlohmann::json web_fixtures = nlohmann::json::object();
    std::vector<std::string>* written = nullptr;    // artifact paths written this run

    std::filesystem::path run_dir() const { return sandbox_root / run_id; }
    // Resolves a write target relative to run_dir(); throws SandboxViolation
    // if it escapes the sandbox root.
    std::filesystem::path resolve_write(const std::string& relative) const;
    // Resolves a read target relative to the sandbox root; ToolError if it
    // falls outside every read root.
    std::filesystem::path resolve_read(const std::string& relative) const;
    std::string relative_to_sandbox(const std::filesystem::path& p) const;
};

// Returns the tool result text. Throw lw::Error(ToolError) for recoverable
// failures; SandboxViolation aborts the run.
using ToolHandler = std::function<std::string(const nlohmann::json& input, const ToolContext& ctx)>;

class ToolRegistry {
public:
    ToolRegistry& register_tool(ToolSpec spec, ToolHandler handler);  // DuplicateTool
    bool has(const std::string& name) const { return tools_.count(name) > 0; }
    const ToolSpec& spec(const std::string& name) const;
    std::string invoke(const std::string& name, const nlohmann::json& input, const ToolContext& ctx) const;
    std::vector<ToolSpec> specs() const;

private:
    struct Entry {
        ToolSpec spec;
        ToolHandler handler;
    };
    std::map<std::string, Entry> tools_;
};

ToolRegistry& register_tool(ToolRegistry& registry, ToolSpec spec, ToolHandler handler);

bool permitted(Phase phase, SideEffect effect);

// fs_list, fs_read, fs_write, web_search (canned fixtures), calendar_read,
// calendar_write (ICS file), llm_query (backend "agent" role).
ToolRegistry builtin_tools(ModelBackend* backend = nullptr);

struct StepTrace {
    std::size_t seq = 0;
    Phase phase = Phase::Research;
    std::string thought;
    std::string tool;                        // empty for finish steps
    nlohmann::json input = nlohmann::json::object();
    std::string result;
    std::string status;                      // ok | tool_error | rejected | finish | aborted
    std::optional<SideEffect> side_effect;   // set only for executed tool calls

    bool operator==(const StepTrace&) const = default;
};

nlohmann::json to_json(const StepTrace& s);
StepTrace step_from_json(const nlohmann::json& j);

enum class RunOutcome { Completed, Incomplete };
std::string to_string(RunOutcome o);

struct AgentRun {
    std::string run_id;
    std::string action_id;
    std::vector<StepTrace> steps;
    std::vector<std::string> artifacts;  // sandbox-relative
    RunOutcome outcome = RunOutcome::Incomplete;
    std::string abort_reason;            // error code name when not completed
    std::string research_summary;
    std::optional<int> quality_rating;
};

nlohmann::json to_json(const AgentRun& r);

struct RunOptions {
    std::size_t budget = 20;             // max steps per phase
    std::size_t result_byte_cap = 4096;
    std::filesystem::path sandbox_root;
    std::vector<std::filesystem::path> read_roots;
    std::filesystem::path calendar_path;
    nlohmann::json web_fixtures = nlohmann::json::object();
    std::function<void(const StepTrace&)> on_step;  // called as each step is recorded
};

std::string run_id_for(const ProposedAction& action);

// Requires action.status == Approved (InvalidStatus otherwise) and budget >= 1.
AgentRun run(const ProposedAction& action, const ToolRegistry& registry, ModelBackend& backend,
             const RunOptions& options);

} // namespace lw
