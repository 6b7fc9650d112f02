#include "latticework/synthesis.hpp"

#include "latticework/backend.hpp"
#include "latticework/error.hpp"
#include "latticework/prompts.hpp"
#include "latticework/text_util.hpp"
#include "parallel.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <set>

namespace lw {

using nlohmann::json;

void SynthesisConfig::check() const {
    if (max_layers < 2) throw Error(ErrorCode::ConfigError, "synthesis.max_layers must be >= 2");
}

std::string session_context_label(const std::string& session_id) {
    return "Session " + session_id;
}

std::vector<LayerElement> layer_elements(const Lattice& lattice, std::size_t layer) {
    std::vector<LayerElement> out;
    if (layer >= lattice.layer_count()) return out;
    for (const auto& id : lattice.layers()[layer]) out.push_back({id, lattice.element_text(id)});
    return out;
}

namespace {

std::string element_lines(const std::vector<LayerElement>& elements) {
    std::string out;
    for (const auto& e : elements) out += "[" + e.id + "] " + e.text + "\n";
    return out;
}

json elements_json(const std::vector<LayerElement>& elements) {
    json arr = json::array();
    for (const auto& e : elements) arr.push_back({{"id", e.id}, {"text", e.text}});
    return arr;
}

const json& string_array_schema() {
    static const json s = {{"type", "array"}, {"items", {{"type", "string"}}}};
    return s;
}

std::vector<std::string> clean_contexts(const json& raw) {
    std::vector<std::string> out;
    for (const auto& c : raw) {
        std::string t = trim(c.get<std::string>());
        if (!t.empty() && std::find(out.begin(), out.end(), t) == out.end()) out.push_back(std::move(t));
    }
    return out;
}

// Drops unknown and duplicate ids; returns the sorted survivors.
std::vector<std::string> repair_evidence(const json& cited, const std::set<std::string>& known,
                                         std::vector<std::string>& log) {
    std::set<std::string> kept;
    for (const auto& c : cited) {
        std::string id = c.get<std::string>();
        if (!known.count(id)) {
            log.push_back("dropped unknown evidence id " + id);
            continue;
        }
        kept.insert(id);
    }
    return {kept.begin(), kept.end()};
}

} // namespace

GroupingProposal group_layer(const std::vector<LayerElement>& elements, ModelBackend& backend,
                             const SynthesisConfig& config) {
    GroupingProposal proposal;
    if (elements.size() < 2) return proposal;

    Request req;
    req.role = ModelRole::Insight;
    req.task = "group";
    req.prompt = render_prompt("group", {{"USER", config.user_name},
                                         {"ELEMENTS", element_lines(elements)},
                                         {"MIN_INSIGHTS", std::to_string(config.min_insights_per_session)}});
    req.schema = {{"type", "object"},
                  {"required", {"groups"}},
                  {"properties",
                   {{"groups",
                     {{"type", "array"},
                      {"items",
                       {{"type", "object"},
                        {"required", {"evidence"}},
                        {"properties", {{"evidence", string_array_schema()}, {"rationale", {{"type", "string"}}}}}}}}}}}};
    req.context = {{"elements", elements_json(elements)}, {"min_groups", config.min_insights_per_session}};

    auto resp = backend.call(req);
    proposal.repair_log = resp.repair_log;

    std::set<std::string> known;
    for (const auto& e : elements) known.insert(e.id);
    const auto& groups = resp.parsed.at("groups");
    for (const auto& g : groups) {
        auto members = repair_evidence(g.at("evidence"), known, proposal.repair_log);
        if (members.size() < 2) {
            proposal.repair_log.push_back("dropped group with fewer than 2 valid members");
            continue;
        }
        if (std::find(proposal.groups.begin(), proposal.groups.end(), members) != proposal.groups.end()) {
            proposal.repair_log.push_back("dropped duplicate group");
            continue;
        }
        proposal.groups.push_back(std::move(members));
        proposal.rationale_per_group.push_back(g.value("rationale", std::string()));
    }
    if (!groups.empty() && proposal.groups.empty())
        spdlog::warn("grouping proposal cited nothing valid; continuing with an empty proposal");
    for (const auto& entry : proposal.repair_log) spdlog::info("group_layer repair: {}", entry);
    return proposal;
}

Insight synthesize_group(const SynthesisRequest& request, ModelBackend& backend, const SynthesisConfig& config) {
    if (request.evidence.empty()) throw Error(ErrorCode::InvalidInput, "cannot synthesize an empty evidence set");

    Request req;
    req.role = ModelRole::Insight;
    req.task = "synthesize";
    req.prompt = render_prompt(
        "synthesize",
        {{"USER", config.user_name},
         {"EVIDENCE", element_lines(request.evidence)},
         {"CONTEXT_RULE", request.final_layer
                              ? "Also list the contexts (settings, activities or relationships) this insight applies to."
                              : "Contexts are optional at this level and may be an empty list."}});
    req.schema = {{"type", "object"},
                  {"required", {"title", "description", "contexts"}},
                  {"properties",
                   {{"title", {{"type", "string"}, {"minLength", 1}}},
                    {"description", {{"type", "string"}, {"minLength", 1}}},
                    {"contexts", string_array_schema()}}}};
    req.context = {{"evidence", elements_json(request.evidence)},
                   {"layer_index", request.layer_index},
                   {"final_layer", request.final_layer}};

    auto resp = backend.call(req);
    std::string title = trim(resp.parsed.at("title").get<std::string>());
    std::string description = trim(resp.parsed.at("description").get<std::string>());
    if (title.empty() || description.empty())
        throw Error(ErrorCode::SchemaInvalidAfterRetries, "synthesized insight has a blank title or description");
    auto contexts = clean_contexts(resp.parsed.at("contexts"));
    if (request.final_layer && contexts.empty()) {
        for (const auto& sid : request.scope) contexts.push_back(session_context_label(sid));
        spdlog::info("synthesize_group repair: filled missing final-layer contexts from scope");
    }
    std::vector<std::string> ids;
    for (const auto& e : request.evidence) ids.push_back(e.id);
    return make_insight(request.layer_index, std::move(title), std::move(description), std::move(ids),
                        std::move(contexts), request.scope);
}

Lattice build_session_lattice(const std::string& session_id, std::vector<Observation> observations,
                              std::vector<std::string> window_ids, const SynthesisConfig& config,
                              ModelBackend& backend) {
    config.check();
    const SessionScope scope{session_id};
    Lattice lattice = Lattice::with_observations(scope, std::move(observations), {{session_id, std::move(window_ids)}},
                                                 config.max_layers)
                          .with_metadata("prompt_templates", prompt_templates_version());
    try {
        while (lattice.layer_count() < config.max_layers && !lattice.layers().back().empty()) {
            const std::size_t top = lattice.layer_count() - 1;
            const auto elements = layer_elements(lattice, top);
            const auto proposal = group_layer(elements, backend, config);

            std::map<std::string, LayerElement> by_id;
            for (const auto& e : elements) by_id.emplace(e.id, e);
            const bool final_layer = lattice.layer_count() + 1 == config.max_layers;
            auto insights = detail::parallel_map<Insight>(proposal.groups.size(), config.workers, [&](std::size_t g) {
                SynthesisRequest sr;
                for (const auto& id : proposal.groups[g]) sr.evidence.push_back(by_id.at(id));
                sr.layer_index = static_cast<int>(top) + 1;
                sr.scope = scope;
                sr.final_layer = final_layer;
                return synthesize_group(sr, backend, config);
            });
            std::set<std::string> seen;
            std::vector<Insight> unique;
            for (auto& in : insights)
                if (seen.insert(in.id).second) unique.push_back(std::move(in));
            lattice = append_layer(lattice, std::move(unique));
        }
    } catch (const Error& e) {
        throw Error(e.code(), "session " + session_id + ": " + e.what(), e.status());
    }
    return lattice;
}

Lattice merge_cross_session(const std::vector<Lattice>& sessions, const SynthesisConfig& config,
                            ModelBackend& backend) {
    config.check();
    if (sessions.empty()) throw Error(ErrorCode::InvalidInput, "merge needs at least one session lattice");

    std::size_t depth = 0;
    for (const auto& s : sessions) depth = std::max(depth, s.layer_count());
    if (depth == 0) throw Error(ErrorCode::InvalidInput, "session lattice without an observation layer");
    if (depth + 1 > config.max_layers)
        throw Error(ErrorCode::MaxLayersExceeded, "merging " + std::to_string(depth) + "-layer lattices would exceed " +
                                                      std::to_string(config.max_layers) + " layers");

    Lattice::Parts parts;
    parts.max_layers = config.max_layers;
    parts.layers.resize(depth);
    parts.metadata["prompt_templates"] = prompt_templates_version();
    for (const auto& s : sessions) {
        const auto& p = s.parts();
        for (const auto& sid : p.session_scope)
            if (std::find(parts.session_scope.begin(), parts.session_scope.end(), sid) == parts.session_scope.end())
                parts.session_scope.push_back(sid);
        for (std::size_t j = 0; j < p.layers.size(); ++j)
            parts.layers[j].insert(parts.layers[j].end(), p.layers[j].begin(), p.layers[j].end());
        parts.observations.insert(p.observations.begin(), p.observations.end());
        parts.insights.insert(p.insights.begin(), p.insights.end());
        for (const auto& [sid, ws] : p.windows) {
            auto& dst = parts.windows[sid];
            for (const auto& w : ws)
                if (std::find(dst.begin(), dst.end(), w) == dst.end()) dst.push_back(w);
        }
    }
    const SessionScope scope = parts.session_scope;
    const Lattice stacked = Lattice::from_parts(std::move(parts));
    const int merged_layer = static_cast<int>(depth);

    const auto top = layer_elements(stacked, depth - 1);
    std::map<std::string, std::set<std::string>> sessions_of;
    for (const auto& e : top) sessions_of[e.id] = stacked.sessions_under(e.id);

    std::vector<std::string> log;
    std::vector<Insight> merged;
    std::set<std::string> covered;

    if (scope.size() >= 2 && top.size() >= 2) {
        std::string lines;
        json ctx_insights = json::array();
        for (const auto& e : top) {
            const auto& ss = sessions_of[e.id];
            std::vector<std::string> sv(ss.begin(), ss.end());
            lines += "[" + e.id + "] (sessions: " + join(sv, ", ") + ") " + e.text + "\n";
            ctx_insights.push_back({{"id", e.id}, {"text", e.text}, {"sessions", sv}});
        }
        Request req;
        req.role = ModelRole::Insight;
        req.task = "merge";
        req.prompt = render_prompt("merge", {{"USER", config.user_name}, {"INSIGHTS", lines}});
        req.schema = {
            {"type", "object"},
            {"required", {"merged"}},
            {"properties",
             {{"merged",
               {{"type", "array"},
                {"items",
                 {{"type", "object"},
                  {"required", {"title", "description", "evidence", "contexts"}},
                  {"properties",
                   {{"title", {{"type", "string"}, {"minLength", 1}}},
                    {"description", {{"type", "string"}, {"minLength", 1}}},
                    {"evidence", string_array_schema()},
                    {"contexts", string_array_schema()}}}}}}},
              {"unmerged", string_array_schema()}}}};
        req.context = {{"insights", ctx_insights}};

        auto resp = backend.call(req);
        log = resp.repair_log;
        std::set<std::string> known;
        for (const auto& e : top) known.insert(e.id);
        std::set<std::string> seen_ids;
        for (const auto& m : resp.parsed.at("merged")) {
            auto evidence = repair_evidence(m.at("evidence"), known, log);
            if (evidence.size() < 2) {
                log.push_back("dropped merged insight with fewer than 2 valid members");
                continue;
            }
            std::set<std::string> spanned;
            for (const auto& id : evidence) spanned.insert(sessions_of[id].begin(), sessions_of[id].end());
            if (spanned.size() < 2) {
                log.push_back("dropped merged insight confined to one session");
                continue;
            }
            auto contexts = clean_contexts(m.at("contexts"));
            if (contexts.empty()) {
                for (const auto& sid : spanned) contexts.push_back(session_context_label(sid));
                log.push_back("filled missing contexts from spanned sessions");
            }
            std::string title = trim(m.at("title").get<std::string>());
            std::string description = trim(m.at("description").get<std::string>());
            if (title.empty() || description.empty()) {
                log.push_back("dropped merged insight with blank text");
                continue;
            }
            Insight in = make_insight(merged_layer, std::move(title), std::move(description), evidence,
                                      std::move(contexts), scope);
            if (!seen_ids.insert(in.id).second) continue;
            covered.insert(in.evidence.begin(), in.evidence.end());
            merged.push_back(std::move(in));
        }
    }

    if (config.carry_forward_unmerged) {
        for (const auto& e : top) {
            if (covered.count(e.id)) continue;
            std::string title, description;
            std::vector<std::string> contexts;
            if (const auto* o = stacked.find_observation(e.id)) {
                title = description = o->text;
            } else if (const auto* i = stacked.find_insight(e.id)) {
                title = i->title;
                description = i->description;
                contexts = i->contexts;
            }
            if (contexts.empty())
                for (const auto& sid : sessions_of[e.id]) contexts.push_back(session_context_label(sid));
            merged.push_back(make_insight(merged_layer, std::move(title), std::move(description), {e.id},
                                          std::move(contexts), scope, true));
        }
    }
    for (const auto& entry : log) spdlog::info("merge_cross_session repair: {}", entry);
    return append_layer(stacked, std::move(merged));
}

} // namespace lw
