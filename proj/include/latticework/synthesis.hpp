#pragma once
// Upward construction of the lattice: group a layer, synthesize each group
// into an insight, repeat; then merge session lattices across sessions.

#include "latticework/lattice.hpp"

#include <set>
#include <string>
#include <vector>

namespace lw {

class ModelBackend;

struct SynthesisConfig {
    std::size_t max_layers = kDefaultMaxLayers;
    std::size_t min_insights_per_session = 3;  // soft target handed to the prompt
    bool carry_forward_unmerged = true;
    std::size_t workers = 4;
    std::string user_name = "USER";

    void check() const;  // max_layers >= 2
};

struct LayerElement {
    std::string id;
    std::string text;
};

struct GroupingProposal {
    std::vector<std::vector<std::string>> groups;  // each sorted, size >= 2
    std::vector<std::string> rationale_per_group;
    std::vector<std::string> repair_log;
};

// Elements of a lattice layer in layer order, as shown to the model.
std::vector<LayerElement> layer_elements(const Lattice& lattice, std::size_t layer);

GroupingProposal group_layer(const std::vector<LayerElement>& elements, ModelBackend& backend,
                             const SynthesisConfig& config = {});

struct SynthesisRequest {
    std::vector<LayerElement> evidence;
    int layer_index = 1;
    SessionScope scope;
    bool final_layer = false;  // contexts are required when true
};

Insight synthesize_group(const SynthesisRequest& request, ModelBackend& backend, const SynthesisConfig& config = {});

// Builds layers until config.max_layers is reached or a layer comes out empty.
Lattice build_session_lattice(const std::string& session_id, std::vector<Observation> observations,
                              std::vector<std::string> window_ids, const SynthesisConfig& config,
                              ModelBackend& backend);

// Stacks the session lattices layer by layer and appends one merged layer.
// Every input top-layer element is either evidence of a merged insight or
// re-emitted with carried_forward = true.
Lattice merge_cross_session(const std::vector<Lattice>& sessions, const SynthesisConfig& config,
                            ModelBackend& backend);

// Default context label for insights that emerged within `session_id`.
std::string session_context_label(const std::string& session_id);

} // namespace lw
