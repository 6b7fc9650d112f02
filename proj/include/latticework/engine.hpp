#pragma once
// End-to-end pipeline over a Store. The CLI, the HTTP service and the Python
// module all drive the store through this one class.

#include "latticework/actions.hpp"
#include "latticework/agent.hpp"
#include "latticework/backend.hpp"
#include "latticework/config.hpp"
#include "latticework/ingestion.hpp"
#include "latticework/lattice.hpp"
#include "latticework/store.hpp"
#include "latticework/tasking.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace lw {

enum class RatingDimension { Accuracy, Depth, ImmediateUtility, UnderlyingNeeds, Novelty, ExecutionQuality };

std::string to_string(RatingDimension d);
RatingDimension rating_dimension_from_string(const std::string& s);  // InvalidInput
// Inclusive bounds: [-3, 3] for accuracy/depth/execution_quality, [1, 7] otherwise.
std::pair<int, int> rating_bounds(RatingDimension d);

struct Rating {
    std::string subject;
    RatingDimension dimension = RatingDimension::Accuracy;
    int value = 0;
    std::optional<std::string> rater_note;
    std::string created_at;
};

nlohmann::json to_json(const Rating& r);

struct IngestSummary {
    std::size_t kept = 0;
    std::size_t dropped = 0;
    std::vector<std::string> sessions;
};

struct TasksSummary {
    std::string task_day;
    std::vector<Task> retained;
    std::vector<Task> rejected;
};

class Engine {
public:
    explicit Engine(Config config, std::shared_ptr<ModelBackend> backend = nullptr);

    const Config& config() const { return config_; }
    const Store& store() const { return store_; }
    ModelBackend& backend() { return *backend_; }

    IngestSummary ingest(const std::filesystem::path& records_path,
                         const std::optional<std::filesystem::path>& denylist_path = std::nullopt);
    IngestSummary ingest_records(std::vector<TranscriptRecord> records, const DenylistConfig& denylist);
    std::vector<SessionBundle> sessions() const;  // MissingPredecessor before ingest

    std::vector<std::string> build();   // session lattice scopes
    std::string merge();                // cross-session scope
    Lattice final_lattice() const;      // MissingPredecessor before merge
    std::vector<Insight> final_insights() const;

    TasksSummary tasks();
    std::vector<Task> stored_tasks(bool retained_only) const;

    std::vector<ProposedAction> propose();
    std::vector<ProposedAction> actions() const;
    ProposedAction action(const std::string& id) const;  // NotFound
    ProposedAction steer(const std::string& id, const std::string& note);
    ProposedAction approve(const std::string& id);

    // Marks the action running and returns its run id; execute_run finishes it.
    std::string start_run(const std::string& id);
    AgentRun execute_run(const std::string& id);
    AgentRun run_action(const std::string& id) { start_run(id); return execute_run(id); }
    std::optional<nlohmann::json> run_summary(const std::string& run_id) const;
    std::vector<nlohmann::json> run_trace(const std::string& run_id) const;

    nlohmann::json export_insights() const;
    nlohmann::json provenance(const std::string& node_id) const;

    Rating add_rating(const std::string& subject, const std::string& dimension, int value,
                      const std::optional<std::string>& note);
    std::vector<nlohmann::json> ratings() const;

    RunOptions run_options(const std::string& run_id) const;
    ImplementationConstraints constraints() const;

private:
    Config config_;
    Store store_;
    std::shared_ptr<ModelBackend> backend_;
};

} // namespace lw
