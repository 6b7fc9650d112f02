#include "latticework/lattice.hpp"

#include "latticework/error.hpp"
#include "latticework/hashing.hpp"

#include <algorithm>
#include <deque>
#include <unordered_map>

namespace lw {

using nlohmann::json;

std::string observation_id(const std::string& session_id, const std::string& window_id,
                           std::size_t ordinal, const std::string& text) {
    return content_id("obs", json::array({session_id, window_id, ordinal, text}));
}

std::string insight_id(int layer_index, const std::string& title, std::vector<std::string> evidence,
                       const SessionScope& scope) {
    std::sort(evidence.begin(), evidence.end());
    return content_id("ins", json::array({layer_index, title, evidence, scope}));
}

std::string scope_hash(const SessionScope& scope) {
    return content_id("scope", json(scope));
}

Insight make_insight(int layer_index, std::string title, std::string description,
                     std::vector<std::string> evidence, std::vector<std::string> contexts,
                     const SessionScope& scope, bool carried_forward) {
    std::sort(evidence.begin(), evidence.end());
    evidence.erase(std::unique(evidence.begin(), evidence.end()), evidence.end());
    Insight in;
    in.id = insight_id(layer_index, title, evidence, scope);
    in.layer_index = layer_index;
    in.title = std::move(title);
    in.description = std::move(description);
    in.evidence = std::move(evidence);
    in.contexts = std::move(contexts);
    in.carried_forward = carried_forward;
    return in;
}

std::string to_string(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::Adjacency:        return "AdjacencyViolation";
        case ViolationKind::EmptyEvidence:    return "EmptyEvidenceViolation";
        case ViolationKind::DanglingEvidence: return "DanglingEvidenceViolation";
        case ViolationKind::CarryForward:     return "CarryForwardViolation";
        case ViolationKind::MissingContexts:  return "MissingContextsViolation";
        case ViolationKind::EmptyText:        return "EmptyTextViolation";
        case ViolationKind::UnknownWindow:    return "UnknownWindowViolation";
        case ViolationKind::LayerIndex:       return "LayerIndexViolation";
        case ViolationKind::MaxLayers:        return "MaxLayersViolation";
        case ViolationKind::UnknownNode:      return "UnknownNodeViolation";
        case ViolationKind::DuplicateNode:    return "DuplicateNodeViolation";
        case ViolationKind::MisplacedNode:    return "MisplacedNodeViolation";
        case ViolationKind::ScopeMismatch:    return "ScopeMismatchViolation";
    }
    return "UnknownViolation";
}

namespace {

std::unordered_map<std::string, int> layer_index_map(const Lattice& lattice) {
    std::unordered_map<std::string, int> out;
    const auto& layers = lattice.layers();
    for (std::size_t j = 0; j < layers.size(); ++j)
        for (const auto& id : layers[j]) out.emplace(id, static_cast<int>(j));
    return out;
}

// Title/description an element would be re-emitted with when carried forward.
std::pair<std::string, std::string> element_title_description(const Lattice& lattice, const std::string& id) {
    if (const auto* o = lattice.find_observation(id)) return {o->text, o->text};
    if (const auto* i = lattice.find_insight(id)) return {i->title, i->description};
    return {};
}

} // namespace

Lattice Lattice::with_observations(SessionScope scope, std::vector<Observation> observations,
                                   std::map<std::string, std::vector<std::string>> windows,
                                   std::size_t max_layers) {
    Parts parts;
    parts.session_scope = std::move(scope);
    parts.max_layers = max_layers;
    parts.windows = std::move(windows);
    parts.layers.emplace_back();
    for (auto& o : observations) {
        parts.layers[0].push_back(o.id);
        parts.observations.emplace(o.id, std::move(o));
    }
    return Lattice(std::move(parts));
}

Lattice Lattice::from_parts(Parts parts) {
    return Lattice(std::move(parts));
}

const Observation* Lattice::find_observation(const std::string& id) const {
    auto it = parts_.observations.find(id);
    return it == parts_.observations.end() ? nullptr : &it->second;
}

const Insight* Lattice::find_insight(const std::string& id) const {
    auto it = parts_.insights.find(id);
    return it == parts_.insights.end() ? nullptr : &it->second;
}

std::optional<int> Lattice::layer_of(const std::string& id) const {
    for (std::size_t j = 0; j < parts_.layers.size(); ++j) {
        const auto& layer = parts_.layers[j];
        if (std::find(layer.begin(), layer.end(), id) != layer.end()) return static_cast<int>(j);
    }
    return std::nullopt;
}

bool Lattice::contains(const std::string& id) const {
    return layer_of(id).has_value();
}

std::string Lattice::element_text(const std::string& id) const {
    if (const auto* o = find_observation(id)) return o->text;
    if (const auto* i = find_insight(id)) return i->title + ": " + i->description;
    return {};
}

std::set<std::string> Lattice::sessions_under(const std::string& id) const {
    std::set<std::string> sessions;
    for (const auto& leaf : descendants(*this, id).leaf_observations)
        if (const auto* o = find_observation(leaf)) sessions.insert(o->session_id);
    return sessions;
}

std::vector<const Insight*> Lattice::top_insights() const {
    std::vector<const Insight*> out;
    if (parts_.layers.size() < 2) return out;
    for (const auto& id : parts_.layers.back())
        if (const auto* i = find_insight(id)) out.push_back(i);
    return out;
}

Lattice Lattice::with_metadata(const std::string& key, const std::string& value) const {
    Parts p = parts_;
    p.metadata[key] = value;
    return Lattice(std::move(p));
}

Lattice append_layer(const Lattice& lattice, std::vector<Insight> insights) {
    const std::size_t count = lattice.layer_count();
    if (count == 0) throw Error(ErrorCode::LayerIndexMismatch, "lattice has no observation layer");
    if (count >= lattice.max_layers())
        throw Error(ErrorCode::MaxLayersExceeded,
                    "lattice already has " + std::to_string(count) + " of " +
                        std::to_string(lattice.max_layers()) + " layers");

    const int expected = static_cast<int>(count);
    const auto& below = lattice.layers().back();
    std::set<std::string> below_ids(below.begin(), below.end());

    Lattice::Parts parts = lattice.parts();
    std::vector<std::string> layer;
    std::set<std::string> seen;
    for (auto& in : insights) {
        if (in.layer_index != expected)
            throw Error(ErrorCode::LayerIndexMismatch,
                        "insight \"" + in.title + "\" has layer_index " + std::to_string(in.layer_index) +
                            ", expected " + std::to_string(expected));
        if (in.evidence.empty())
            throw Error(ErrorCode::EvidenceUnresolved, "insight \"" + in.title + "\" has an empty evidence set");
        for (const auto& e : in.evidence) {
            if (!below_ids.count(e))
                throw Error(ErrorCode::EvidenceUnresolved,
                            "evidence id " + e + " is not in layer " + std::to_string(expected - 1));
        }
        std::sort(in.evidence.begin(), in.evidence.end());
        in.evidence.erase(std::unique(in.evidence.begin(), in.evidence.end()), in.evidence.end());
        if (in.carried_forward) {
            auto [title, description] = element_title_description(lattice, in.evidence.front());
            if (in.evidence.size() != 1 || in.title != title || in.description != description)
                throw Error(ErrorCode::InvalidLattice, "carried-forward insight must copy its single evidence element");
        }
        if (in.id.empty()) in.id = insight_id(in.layer_index, in.title, in.evidence, lattice.session_scope());
        if (!seen.insert(in.id).second || parts.insights.count(in.id))
            throw Error(ErrorCode::InvalidLattice, "duplicate insight id " + in.id);
        layer.push_back(in.id);
        parts.insights.emplace(in.id, std::move(in));
    }
    parts.layers.push_back(std::move(layer));
    return Lattice::from_parts(std::move(parts));
}

ProvenanceTrail descendants(const Lattice& lattice, const std::string& node_id) {
    const auto layer_of = layer_index_map(lattice);
    if (!layer_of.count(node_id)) throw Error(ErrorCode::NodeNotFound, "no node " + node_id);

    ProvenanceTrail trail;
    trail.root = node_id;
    std::set<std::string> visited{node_id};
    std::deque<std::string> queue{node_id};
    while (!queue.empty()) {
        std::string id = std::move(queue.front());
        queue.pop_front();
        trail.descendants_by_layer[layer_of.at(id)].insert(id);
        const Insight* in = lattice.find_insight(id);
        if (!in) continue;
        for (const auto& e : in->evidence) {
            if (layer_of.count(e) && visited.insert(e).second) queue.push_back(e);
        }
    }
    if (auto it = trail.descendants_by_layer.find(0); it != trail.descendants_by_layer.end())
        trail.leaf_observations = it->second;
    return trail;
}

std::vector<Violation> validate(const Lattice& lattice) {
    std::vector<Violation> out;
    const auto& parts = lattice.parts();
    const auto& layers = parts.layers;

    if (layers.empty()) {
        out.push_back({"", ViolationKind::LayerIndex, 0, "lattice has no observation layer"});
        return out;
    }
    if (layers.size() > parts.max_layers) {
        out.push_back({"", ViolationKind::MaxLayers, static_cast<int>(layers.size()) - 1,
                       std::to_string(layers.size()) + " layers exceed maximum " + std::to_string(parts.max_layers)});
    }

    std::unordered_map<std::string, int> layer_of;
    for (std::size_t j = 0; j < layers.size(); ++j) {
        const int lj = static_cast<int>(j);
        for (const auto& id : layers[j]) {
            if (!layer_of.emplace(id, lj).second) {
                out.push_back({id, ViolationKind::DuplicateNode, lj, "listed more than once"});
                continue;
            }
            const bool is_obs = parts.observations.count(id) > 0;
            const bool is_ins = parts.insights.count(id) > 0;
            if (!is_obs && !is_ins) {
                out.push_back({id, ViolationKind::UnknownNode, lj, "no node record"});
            } else if ((j == 0 && !is_obs) || (j > 0 && !is_ins)) {
                out.push_back({id, ViolationKind::MisplacedNode, lj,
                               j == 0 ? "insight listed in the observation layer" : "observation listed above layer 0"});
            }
        }
    }

    const std::set<std::string> scope(parts.session_scope.begin(), parts.session_scope.end());
    for (const auto& id : layers[0]) {
        const Observation* o = lattice.find_observation(id);
        if (!o) continue;
        if (o->text.empty()) out.push_back({id, ViolationKind::EmptyText, 0, "observation text is empty"});
        if (!scope.count(o->session_id))
            out.push_back({id, ViolationKind::ScopeMismatch, 0, "session " + o->session_id + " outside lattice scope"});
        auto w = parts.windows.find(o->session_id);
        if (w == parts.windows.end() ||
            std::find(w->second.begin(), w->second.end(), o->source_window) == w->second.end())
            out.push_back({id, ViolationKind::UnknownWindow, 0, "window " + o->source_window + " not ingested"});
    }

    for (std::size_t j = 1; j < layers.size(); ++j) {
        const int lj = static_cast<int>(j);
        const bool top = j + 1 == layers.size();
        for (const auto& id : layers[j]) {
            const Insight* in = lattice.find_insight(id);
            if (!in) continue;
            if (in->layer_index != lj)
                out.push_back({id, ViolationKind::LayerIndex, lj,
                               "layer_index " + std::to_string(in->layer_index) + " listed in layer " + std::to_string(lj)});
            if (in->title.empty()) out.push_back({id, ViolationKind::EmptyText, lj, "insight title is empty"});
            if (in->evidence.empty()) out.push_back({id, ViolationKind::EmptyEvidence, lj, "no evidence"});
            for (const auto& e : in->evidence) {
                auto it = layer_of.find(e);
                if (it == layer_of.end()) {
                    out.push_back({id, ViolationKind::DanglingEvidence, lj, "evidence " + e + " does not exist"});
                } else if (it->second != lj - 1) {
                    out.push_back({id, ViolationKind::Adjacency, lj,
                                   "evidence " + e + " sits in layer " + std::to_string(it->second)});
                }
            }
            if (in->carried_forward) {
                if (in->evidence.size() > 1) {
                    out.push_back({id, ViolationKind::CarryForward, lj, "carried-forward insight cites several elements"});
                } else if (in->evidence.size() == 1) {
                    auto it = layer_of.find(in->evidence.front());
                    if (it != layer_of.end() && it->second == lj - 1) {
                        auto [title, description] = element_title_description(lattice, in->evidence.front());
                        if (in->title != title || in->description != description)
                            out.push_back({id, ViolationKind::CarryForward, lj, "carried-forward text differs from source"});
                    }
                }
            }
            if (top && in->contexts.empty())
                out.push_back({id, ViolationKind::MissingContexts, lj, "final-layer insight lacks contexts"});
        }
    }
    return out;
}

json to_json(const Lattice& lattice) {
    const auto& p = lattice.parts();
    json doc;
    doc["schema_version"] = p.schema_version;
    doc["session_scope"] = p.session_scope;
    doc["max_layers"] = p.max_layers;
    doc["metadata"] = p.metadata;
    doc["windows"] = p.windows;
    doc["layers"] = p.layers;
    json obs = json::object();
    for (const auto& [id, o] : p.observations) {
        obs[id] = {{"session_id", o.session_id},
                   {"text", o.text},
                   {"source_window", o.source_window},
                   {"created_at", format_rfc3339(o.created_at)}};
    }
    doc["observations"] = std::move(obs);
    json ins = json::object();
    for (const auto& [id, i] : p.insights) {
        ins[id] = {{"layer_index", i.layer_index},
                   {"title", i.title},
                   {"description", i.description},
                   {"evidence", i.evidence},
                   {"contexts", i.contexts},
                   {"carried_forward", i.carried_forward}};
    }
    doc["insights"] = std::move(ins);
    return doc;
}

std::string save(const Lattice& lattice) {
    auto violations = validate(lattice);
    if (!violations.empty()) {
        const auto& v = violations.front();
        throw Error(ErrorCode::InvalidLattice, "refusing to save lattice: " + to_string(v.rule) + " at " + v.node +
                                                   " (" + v.detail + ")");
    }
    return to_json(lattice).dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

Lattice from_json(const json& doc) {
    if (!doc.is_object()) throw Error(ErrorCode::CorruptPayload, "lattice document is not an object");
    auto sv = doc.find("schema_version");
    if (sv == doc.end() || !sv->is_number_integer())
        throw Error(ErrorCode::CorruptPayload, "lattice document lacks schema_version");
    if (sv->get<int>() != kSchemaVersion)
        throw Error(ErrorCode::SchemaVersionUnsupported,
                    "schema_version " + std::to_string(sv->get<long long>()) + " is not supported");
    try {
        Lattice::Parts p;
        p.schema_version = kSchemaVersion;
        p.session_scope = doc.at("session_scope").get<SessionScope>();
        p.max_layers = doc.at("max_layers").get<std::size_t>();
        p.metadata = doc.at("metadata").get<std::map<std::string, std::string>>();
        p.windows = doc.at("windows").get<std::map<std::string, std::vector<std::string>>>();
        p.layers = doc.at("layers").get<std::vector<std::vector<std::string>>>();
        for (const auto& [id, o] : doc.at("observations").items()) {
            Observation ob;
            ob.id = id;
            ob.session_id = o.at("session_id").get<std::string>();
            ob.text = o.at("text").get<std::string>();
            ob.source_window = o.at("source_window").get<std::string>();
            ob.created_at = parse_rfc3339(o.at("created_at").get<std::string>());
            p.observations.emplace(id, std::move(ob));
        }
        for (const auto& [id, i] : doc.at("insights").items()) {
            Insight in;
            in.id = id;
            in.layer_index = i.at("layer_index").get<int>();
            in.title = i.at("title").get<std::string>();
            in.description = i.at("description").get<std::string>();
            in.evidence = i.at("evidence").get<std::vector<std::string>>();
            in.contexts = i.at("contexts").get<std::vector<std::string>>();
            in.carried_forward = i.at("carried_forward").get<bool>();
            p.insights.emplace(id, std::move(in));
        }
        return Lattice::from_parts(std::move(p));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptPayload, std::string("malformed lattice document: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidInput) throw Error(ErrorCode::CorruptPayload, e.what());
        throw;
    }
}

Lattice load(const std::string& bytes) {
    json doc;
    try {
        doc = json::parse(bytes);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptPayload, std::string("lattice payload does not parse: ") + e.what());
    }
    return from_json(doc);
}

} // namespace lw
