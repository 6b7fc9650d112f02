#pragma once
// Engine configuration, loaded from a small TOML-style file:
//
//   [backend]
//   endpoint_url = "mock:"
//   max_retries = 2
//   [backend.models]
//   insight = "claude-sonnet-4-6"
//
// Every key is addressable as "section.key" so CLI overrides mirror the file.

#include "latticework/backend.hpp"
#include "latticework/ingestion.hpp"
#include "latticework/synthesis.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace lw {

struct IngestConfig {
    std::string timezone = "UTC";
    SessionPolicy session_policy = SessionPolicy::CalendarDay;
    std::size_t window_size = kDefaultWindowSize;
    bool filter_enabled = true;
    std::string denylist_path;
};

struct TaskingConfig {
    double utility_threshold = 0.75;
    std::size_t window_size = kDefaultWindowSize;
    std::size_t window_stride = kDefaultWindowSize;
    std::string task_day;  // session id; empty = most recent session
};

struct ActionConfig {
    std::size_t top_k = 2;
    std::string constraints_path;  // empty = bundled constraints asset
    std::vector<std::string> conditions = {"insight_steered"};
};

struct AgentConfig {
    std::size_t budget = 20;
    std::size_t result_byte_cap = 4096;
    std::string sandbox_root;  // empty = <store>/sandbox
    std::vector<std::string> read_roots;
    std::string calendar_path;  // relative to the sandbox root
    std::string web_fixtures_path;
};

struct ServerConfig {
    std::string host = "127.0.0.1";
    int port = 8787;
    std::string token_env = "LW_CONSOLE_TOKEN";
};

struct Config {
    std::string store_root = "lw-store";
    BackendConfig backend;
    IngestConfig ingest;
    SynthesisConfig synthesis;
    TaskingConfig tasking;
    ActionConfig actions;
    AgentConfig agent;
    ServerConfig server;

    // Sets one "section.key" value; `value` is parsed as a TOML scalar or
    // array, falling back to a bare string. Throws ConfigError on unknown keys.
    void set(const std::string& key, const nlohmann::json& value);
    void set_from_string(const std::string& key, const std::string& value);
    void check() const;
};

// Flattened "section.key" -> value map of a TOML-style document.
std::map<std::string, nlohmann::json> parse_toml(const std::string& text);

Config parse_config(const std::string& text);
Config load_config(const std::filesystem::path& path);

} // namespace lw
