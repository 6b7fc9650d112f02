#include "latticework/backend.hpp"

#include "latticework/error.hpp"
#include "latticework/http_backend.hpp"
#include "latticework/json_schema.hpp"
#include "latticework/mock_backend.hpp"
#include "latticework/text_util.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>

namespace lw {

using nlohmann::json;

std::string to_string(ModelRole role) {
    switch (role) {
        case ModelRole::Transcribe: return "transcribe";
        case ModelRole::Insight:    return "insight";
        case ModelRole::Action:     return "action";
        case ModelRole::Agent:      return "agent";
        case ModelRole::Rerank:     return "rerank";
    }
    return "insight";
}

ModelRole model_role_from_string(const std::string& s) {
    for (auto r : {ModelRole::Transcribe, ModelRole::Insight, ModelRole::Action, ModelRole::Agent, ModelRole::Rerank})
        if (to_string(r) == s) return r;
    throw Error(ErrorCode::ConfigError, "unknown model role " + s);
}

void BackendConfig::check() const {
    if (max_retries < 0) throw Error(ErrorCode::ConfigError, "backend.max_retries must be >= 0");
    if (max_in_flight == 0) throw Error(ErrorCode::ConfigError, "backend.max_in_flight must be >= 1");
    for (auto r : {ModelRole::Transcribe, ModelRole::Insight, ModelRole::Action, ModelRole::Agent, ModelRole::Rerank}) {
        auto it = model_role_map.find(to_string(r));
        if (it == model_role_map.end() || it->second.empty())
            throw Error(ErrorCode::ConfigError, "no model mapped for role " + to_string(r));
    }
}

const std::string& BackendConfig::model_for(ModelRole role) const {
    auto it = model_role_map.find(to_string(role));
    if (it == model_role_map.end()) throw Error(ErrorCode::ConfigError, "no model mapped for role " + to_string(role));
    return it->second;
}

std::optional<ExtractedPayload> extract_json_payload(const std::string& raw) {
    auto try_parse = [](const std::string& s) -> std::optional<json> {
        try {
            return json::parse(s);
        } catch (const json::exception&) {
            return std::nullopt;
        }
    };
    if (auto direct = try_parse(trim(raw))) return ExtractedPayload{std::move(*direct), false};

    // ```json ... ``` (or an unlabeled fence)
    for (std::size_t pos = raw.find("```"); pos != std::string::npos; pos = raw.find("```", pos + 3)) {
        std::size_t body = raw.find('\n', pos);
        if (body == std::string::npos) break;
        std::size_t end = raw.find("```", body);
        if (end == std::string::npos) break;
        if (auto fenced = try_parse(raw.substr(body + 1, end - body - 1))) return ExtractedPayload{std::move(*fenced), true};
        pos = end;
    }
    auto first = raw.find('{');
    auto last = raw.rfind('}');
    if (first != std::string::npos && last != std::string::npos && last > first) {
        if (auto span = try_parse(raw.substr(first, last - first + 1))) return ExtractedPayload{std::move(*span), true};
    }
    return std::nullopt;
}

ModelBackend::ModelBackend(BackendConfig config) : config_(std::move(config)) {
    config_.check();
}

void ModelBackend::acquire() {
    std::unique_lock lock(slots_mutex_);
    slots_cv_.wait(lock, [&] { return in_flight_ < config_.max_in_flight; });
    ++in_flight_;
}

void ModelBackend::release() {
    {
        std::lock_guard lock(slots_mutex_);
        --in_flight_;
    }
    slots_cv_.notify_one();
}

template <typename F>
auto ModelBackend::with_transport_retries(F&& fn, int& retries, std::vector<std::string>& log) {
    for (;;) {
        acquire();
        try {
            auto result = fn();
            release();
            return result;
        } catch (const Error& e) {
            release();
            const bool transient = e.code() == ErrorCode::TimeoutExceeded ||
                                   (e.code() == ErrorCode::EndpointError &&
                                    (e.status() == 0 || e.status() == 429 || e.status() >= 500));
            if (!transient || retries >= config_.max_retries) throw;
            ++retries;
            log.push_back("retry " + std::to_string(retries) + " after " + std::string(to_string(e.code())) + ": " +
                          e.what());
            spdlog::warn("backend retry {}/{}: {}", retries, config_.max_retries, e.what());
        } catch (...) {
            release();
            throw;
        }
    }
}

StructuredResponse ModelBackend::call(const Request& request) {
    StructuredResponse response;
    int retries = 0;
    bool reasked = false;
    const std::string schema_block =
        "\n\nReply with a single JSON object inside a ```json fenced block that conforms to this JSON Schema:\n" +
        request.schema.dump(2);
    std::string prompt = request.prompt + schema_block;

    for (;;) {
        response.raw = with_transport_retries([&] { return complete(request, prompt); }, retries, response.repair_log);

        std::string problem;
        auto payload = extract_json_payload(response.raw);
        if (!payload) {
            problem = "reply contains no parseable JSON payload";
        } else {
            auto errors = validate_schema(request.schema, payload->value);
            if (errors.empty()) {
                if (payload->stripped) response.repair_log.push_back("stripped prose around payload");
                response.parsed = std::move(payload->value);
                return response;
            }
            problem = join(errors, "; ");
        }

        if (reasked || retries >= config_.max_retries) {
            throw Error(ErrorCode::SchemaInvalidAfterRetries,
                        "task " + request.task + ": " + problem + " (after " + std::to_string(retries) + " retries)");
        }
        reasked = true;
        ++retries;
        response.repair_log.push_back("re-asked after validation error: " + problem);
        spdlog::warn("backend re-ask for task {}: {}", request.task, problem);
        prompt = request.prompt + schema_block + "\n\nYour previous reply could not be used (" + problem +
                 "). Reply again with only the JSON payload.";
    }
}

std::vector<ScoredCandidate> ModelBackend::rerank(const std::string& query,
                                                  const std::vector<RerankCandidate>& candidates) {
    std::vector<ScoredCandidate> out;
    if (candidates.empty()) return out;
    std::vector<std::string> documents;
    documents.reserve(candidates.size());
    for (const auto& c : candidates) documents.push_back(c.text);

    int retries = 0;
    std::vector<std::string> log;
    auto scores = with_transport_retries([&] { return score(query, documents); }, retries, log);
    if (scores.size() != candidates.size())
        throw Error(ErrorCode::EndpointError, "rerank returned " + std::to_string(scores.size()) + " scores for " +
                                                  std::to_string(candidates.size()) + " documents");
    for (std::size_t i = 0; i < candidates.size(); ++i) out.push_back({candidates[i].id, scores[i]});
    std::sort(out.begin(), out.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    return out;
}

std::unique_ptr<ModelBackend> make_backend(const BackendConfig& config) {
    if (config.endpoint_url.rfind("mock:", 0) == 0) return std::make_unique<MockBackend>(config);
    return std::make_unique<HttpBackend>(config);
}

} // namespace lw
