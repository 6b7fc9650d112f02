#pragma once
// Behavior lattice: a layered DAG whose layer 0 holds observations and whose
// higher layers hold insights. Evidence edges only ever point one layer down.

#include "latticework/timeutil.hpp"

#include <json.hpp>

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace lw {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::size_t kDefaultMaxLayers = 3;

using SessionScope = std::vector<std::string>;

struct Observation {
    std::string id;
    std::string session_id;
    std::string text;
    std::string source_window;
    Timestamp created_at{};

    bool operator==(const Observation&) const = default;
};

struct Insight {
    std::string id;
    int layer_index = 1;
    std::string title;
    std::string description;
    std::vector<std::string> evidence;  // kept sorted
    std::vector<std::string> contexts;
    bool carried_forward = false;

    bool operator==(const Insight&) const = default;
};

std::string observation_id(const std::string& session_id, const std::string& window_id,
                           std::size_t ordinal, const std::string& text);
std::string insight_id(int layer_index, const std::string& title,
                       std::vector<std::string> evidence, const SessionScope& scope);
std::string scope_hash(const SessionScope& scope);

// Builds an insight with sorted evidence and its content id filled in.
Insight make_insight(int layer_index, std::string title, std::string description,
                     std::vector<std::string> evidence, std::vector<std::string> contexts,
                     const SessionScope& scope, bool carried_forward = false);

enum class ViolationKind {
    Adjacency,          // evidence resolves, but not to the layer directly below
    EmptyEvidence,
    DanglingEvidence,   // evidence id not present anywhere in the lattice
    CarryForward,
    MissingContexts,    // top-layer insight without contexts
    EmptyText,
    UnknownWindow,
    LayerIndex,         // insight.layer_index disagrees with the layer listing it
    MaxLayers,
    UnknownNode,        // layer lists an id with no node record
    DuplicateNode,
    MisplacedNode,      // observation above layer 0 or insight in layer 0
    ScopeMismatch,
};

std::string to_string(ViolationKind kind);

struct Violation {
    std::string node;
    ViolationKind rule;
    int layer = 0;
    std::string detail;
};

struct ProvenanceTrail {
    std::string root;
    std::map<int, std::set<std::string>> descendants_by_layer;
    std::set<std::string> leaf_observations;
};

class Lattice {
public:
    // Raw aggregate. Lattice::from_parts performs no checks so that invalid
    // lattices can be represented (and reported by validate()).
    struct Parts {
        SessionScope session_scope;
        std::vector<std::vector<std::string>> layers;
        std::map<std::string, Observation> observations;
        std::map<std::string, Insight> insights;
        // Ingested window ids per session; observations must cite one of these.
        std::map<std::string, std::vector<std::string>> windows;
        std::size_t max_layers = kDefaultMaxLayers;
        int schema_version = kSchemaVersion;
        std::map<std::string, std::string> metadata;

        bool operator==(const Parts&) const = default;
    };

    Lattice() = default;

    // Leaf-only lattice: observations become layer 0 in the given order.
    static Lattice with_observations(SessionScope scope, std::vector<Observation> observations,
                                     std::map<std::string, std::vector<std::string>> windows,
                                     std::size_t max_layers = kDefaultMaxLayers);
    static Lattice from_parts(Parts parts);

    const Parts& parts() const { return parts_; }
    const SessionScope& session_scope() const { return parts_.session_scope; }
    const std::vector<std::vector<std::string>>& layers() const { return parts_.layers; }
    std::size_t layer_count() const { return parts_.layers.size(); }
    std::size_t max_layers() const { return parts_.max_layers; }
    int schema_version() const { return parts_.schema_version; }
    const std::map<std::string, std::string>& metadata() const { return parts_.metadata; }

    const Observation* find_observation(const std::string& id) const;
    const Insight* find_insight(const std::string& id) const;
    bool contains(const std::string& id) const;
    std::optional<int> layer_of(const std::string& id) const;

    // Title/description pair used when an element is shown to a model.
    std::string element_text(const std::string& id) const;
    // Sessions whose observations sit beneath `id` (the node itself for L0).
    std::set<std::string> sessions_under(const std::string& id) const;
    std::vector<const Insight*> top_insights() const;

    Lattice with_metadata(const std::string& key, const std::string& value) const;

    bool operator==(const Lattice&) const = default;

private:
    explicit Lattice(Parts parts) : parts_(std::move(parts)) {}
    Parts parts_;
};

// Returns a copy of `lattice` with `insights` as a new top layer.
// Throws EvidenceUnresolved, LayerIndexMismatch or MaxLayersExceeded.
Lattice append_layer(const Lattice& lattice, std::vector<Insight> insights);

// Transitive closure over evidence edges, root included. Throws NodeNotFound.
ProvenanceTrail descendants(const Lattice& lattice, const std::string& node_id);

std::vector<Violation> validate(const Lattice& lattice);

// Canonical JSON document (sorted keys, UTF-8). save() requires a lattice
// that validates clean (InvalidLattice otherwise).
nlohmann::json to_json(const Lattice& lattice);
std::string save(const Lattice& lattice);
// Throws SchemaVersionUnsupported or CorruptPayload.
Lattice load(const std::string& bytes);
Lattice from_json(const nlohmann::json& doc);

} // namespace lw
