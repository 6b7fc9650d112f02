#pragma once

#include "latticework/ingestion.hpp"
#include "latticework/lattice.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace lw {

class ModelBackend;

inline constexpr double kDefaultUtilityThreshold = 0.75;

struct UtilityScore {
    double value = 0.0;  // in [0, 1]
    std::string rationale;

    bool operator==(const UtilityScore&) const = default;
};

struct WindowAction {
    std::string window_id;
    std::string text;

    bool operator==(const WindowAction&) const = default;
};

struct Task {
    std::string id;
    std::string title;
    std::vector<std::string> supporting_actions;
    std::vector<std::string> source_windows;  // windows the supporting actions came from
    std::string source_session;
    std::optional<UtilityScore> utility;

    bool operator==(const Task&) const = default;
};

nlohmann::json to_json(const Task& t);
Task task_from_json(const nlohmann::json& j);

// Low-level actions per window, in temporal order.
std::vector<WindowAction> infer_window_actions(const std::vector<Window>& windows, ModelBackend& backend,
                                               const std::string& user_name = "USER");

// Supporting actions that do not appear in `actions` are dropped, as are
// tasks left without support.
std::vector<Task> synthesize_tasks(const std::vector<WindowAction>& actions, const std::string& session_id,
                                   ModelBackend& backend, const std::string& user_name = "USER");

struct GateResult {
    std::vector<Task> retained;
    std::vector<Task> rejected;
};

// Scores every task against the given insights and keeps those whose
// utility strictly exceeds `threshold`. Out-of-range scores are clamped.
GateResult gate_tasks(std::vector<Task> tasks, double threshold, const std::vector<Insight>& insights,
                      ModelBackend& backend, std::size_t workers = 4);

// Pure partition of already-scored tasks.
GateResult partition_by_utility(std::vector<Task> scored, double threshold);

} // namespace lw
