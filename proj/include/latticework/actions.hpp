#pragma once
// Insight retrieval, action proposal and the proposed-action state machine.

#include "latticework/lattice.hpp"
#include "latticework/tasking.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace lw {

class ModelBackend;

inline constexpr std::size_t kDefaultTopK = 2;
inline constexpr std::size_t kActionsPerTask = 2;

struct Capability {
    std::string name;
    std::string description;
    std::vector<std::string> keywords;
};

struct Prohibition {
    std::string name;
    std::string description;
    std::vector<std::string> keywords;
};

struct ImplementationConstraints {
    std::string version;
    std::vector<Capability> capabilities;
    std::vector<Prohibition> prohibitions;

    bool grants(const std::string& capability) const;
    // Text block handed to the proposal prompt.
    std::string describe() const;
};

// Sectioned text asset:
//   # version: 1
//   [capabilities]
//   name: description | keyword, keyword
//   [prohibitions]
//   name: description | keyword, keyword
ImplementationConstraints parse_constraints(const std::string& text);
ImplementationConstraints default_constraints();

// Capabilities the engine knows how to recognise in free text, granted or not.
const std::vector<Capability>& capability_catalog();

// Reasons `text` is not implementable under `constraints`; empty if feasible.
std::vector<std::string> screen_feasibility(const std::string& text, const ImplementationConstraints& constraints);

enum class Condition { InsightSteered, ContextSteered };
enum class ActionStatus { Proposed, InfoRequested, Approved, Running, Done, Failed };

std::string to_string(Condition c);
Condition condition_from_string(const std::string& s);
std::string to_string(ActionStatus s);
ActionStatus action_status_from_string(const std::string& s);

struct ProposedAction {
    std::string id;
    std::string task_id;
    std::string title;
    std::string description;
    std::vector<std::string> steering_insight_ids;
    std::string steering_context;     // rendered steering block (insights or task context)
    std::vector<std::string> notes;   // user-provided steering notes, in order
    Condition condition_tag = Condition::InsightSteered;
    ActionStatus status = ActionStatus::Proposed;
    std::string run_id;

    bool operator==(const ProposedAction&) const = default;
};

nlohmann::json to_json(const ProposedAction& a);
ProposedAction action_from_json(const nlohmann::json& j);

// Top min(k, |insights|) insights by rerank score, ties by id.
std::vector<Insight> retrieve_insights(const Task& task, const std::vector<Insight>& final_insights,
                                       std::size_t k, ModelBackend& backend);

// Context block for the context-steered baseline, summarised from the
// task's supporting actions.
std::string summarize_task_context(const Task& task, ModelBackend& backend);

struct ProposalInput {
    Task task;
    Condition condition = Condition::InsightSteered;
    std::vector<Insight> insights;    // used when insight-steered
    std::string task_context;         // used when context-steered
    std::string user_name = "USER";
};

// Exactly two actions. Throws InfeasibleAfterRetry when the backend twice
// proposes actions outside the constraints.
std::vector<ProposedAction> propose_actions(const ProposalInput& input, const ImplementationConstraints& constraints,
                                            ModelBackend& backend);

// State machine. Each throws InvalidStatus on an illegal transition.
ProposedAction steer(ProposedAction action, const std::string& user_note);  // EmptyNote on blank note
ProposedAction approve(ProposedAction action);
ProposedAction mark_running(ProposedAction action, const std::string& run_id);
ProposedAction mark_finished(ProposedAction action, bool completed);

} // namespace lw
