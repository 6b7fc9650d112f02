#pragma once
// Single seam to every model capability. Concrete backends only implement the
// transport (complete/score); the structured-output policy lives here.

#include <json.hpp>

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace lw {

enum class ModelRole { Transcribe, Insight, Action, Agent, Rerank };

std::string to_string(ModelRole role);
ModelRole model_role_from_string(const std::string& s);

struct BackendConfig {
    // "mock:" selects the deterministic in-process backend.
    std::string endpoint_url = "mock:";
    // Optional separate base URL for the rerank role; empty reuses endpoint_url.
    std::string rerank_url;
    std::map<std::string, std::string> model_role_map = {
        {"transcribe", "gemini-2.0-flash-lite"},
        {"insight", "claude-sonnet-4-6"},
        {"action", "claude-sonnet-4-5"},
        {"agent", "gemini-3-pro"},
        {"rerank", "rerank-2.5"},
    };
    double temperature = 0.0;
    int max_retries = 2;
    std::chrono::milliseconds timeout{120000};
    std::string token_env = "LW_API_TOKEN";
    std::size_t max_in_flight = 4;

    // Throws ConfigError when a role is unmapped or max_retries < 0.
    void check() const;
    const std::string& model_for(ModelRole role) const;
};

struct Request {
    ModelRole role = ModelRole::Insight;
    std::string task;              // prompt kind, e.g. "group", "utility"
    std::string prompt;            // fully rendered template
    nlohmann::json schema;         // payload schema (subset of JSON Schema)
    nlohmann::json context;        // structured inputs the prompt was rendered from
};

struct StructuredResponse {
    std::string raw;
    nlohmann::json parsed;
    std::vector<std::string> repair_log;
};

struct RerankCandidate {
    std::string id;
    std::string text;
};

struct ScoredCandidate {
    std::string id;
    double score = 0.0;
};

// Pulls a JSON value out of a model reply: the whole reply, a fenced block,
// or the outermost {...} span. `stripped` reports whether prose was removed.
struct ExtractedPayload {
    nlohmann::json value;
    bool stripped = false;
};
std::optional<ExtractedPayload> extract_json_payload(const std::string& raw);

class ModelBackend {
public:
    explicit ModelBackend(BackendConfig config);
    virtual ~ModelBackend() = default;

    ModelBackend(const ModelBackend&) = delete;
    ModelBackend& operator=(const ModelBackend&) = delete;

    // Sends the request and returns a schema-valid payload. Transport
    // failures are retried and malformed payloads are stripped or re-asked
    // once; the total number of retries never exceeds config().max_retries.
    // Throws TimeoutExceeded, EndpointError or SchemaInvalidAfterRetries.
    StructuredResponse call(const Request& request);

    // Scores sorted descending, ties broken by candidate id ascending.
    std::vector<ScoredCandidate> rerank(const std::string& query, const std::vector<RerankCandidate>& candidates);

    const BackendConfig& config() const { return config_; }
    virtual bool is_mock() const { return false; }

protected:
    virtual std::string complete(const Request& request, const std::string& prompt) = 0;
    virtual std::vector<double> score(const std::string& query, const std::vector<std::string>& documents) = 0;

private:
    template <typename F>
    auto with_transport_retries(F&& fn, int& retries, std::vector<std::string>& log);

    void acquire();
    void release();

    BackendConfig config_;
    std::mutex slots_mutex_;
    std::condition_variable slots_cv_;
    std::size_t in_flight_ = 0;
};

std::unique_ptr<ModelBackend> make_backend(const BackendConfig& config);

} // namespace lw
