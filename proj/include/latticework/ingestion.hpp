#pragma once

#include "latticework/lattice.hpp"
#include "latticework/timeutil.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace lw {

class ModelBackend;

enum class RecordKind { ScreenSummary, ScreenTranscription, ChatMessage };

std::string to_string(RecordKind kind);
RecordKind record_kind_from_string(const std::string& s);

struct TranscriptRecord {
    Timestamp timestamp{};
    RecordKind kind = RecordKind::ScreenSummary;
    std::string text;
    std::optional<std::string> app_hint;
    std::optional<std::string> thread_id;

    bool operator==(const TranscriptRecord&) const = default;
};

nlohmann::json to_json(const TranscriptRecord& r);
// Throws InvalidInput on missing/ill-typed fields or broken invariants.
TranscriptRecord record_from_json(const nlohmann::json& j);

// One record per non-blank line. Errors name the offending line.
std::vector<TranscriptRecord> parse_records_jsonl(const std::string& text);
std::vector<TranscriptRecord> read_records_jsonl(const std::filesystem::path& path);

struct DenylistConfig {
    std::set<std::string> keywords;      // case-insensitive substrings
    std::set<std::string> url_patterns;  // case-insensitive globs
    bool enabled = true;
};

// Plain text, one entry per line, '#' starts a comment. Entries containing
// glob metacharacters (* ? [) become url_patterns, the rest keywords.
DenylistConfig parse_denylist(const std::string& text);
DenylistConfig read_denylist(const std::filesystem::path& path);

bool matches_denylist(const TranscriptRecord& record, const DenylistConfig& denylist);

struct FilterResult {
    std::vector<TranscriptRecord> kept;
    std::size_t dropped = 0;
};

FilterResult filter_sensitive(std::vector<TranscriptRecord> records, const DenylistConfig& denylist);

enum class SessionPolicy { ChatThread, CalendarDay };

std::string to_string(SessionPolicy policy);
SessionPolicy session_policy_from_string(const std::string& s);

inline constexpr std::chrono::hours kChunkGap{3};
inline constexpr std::size_t kDefaultWindowSize = 10;

// Half-open [begin, end) record-index range.
using IndexRange = std::pair<std::size_t, std::size_t>;

struct SessionBundle {
    std::string session_id;
    SessionPolicy policy = SessionPolicy::CalendarDay;
    std::vector<TranscriptRecord> records;
    std::vector<IndexRange> chunks;

    bool operator==(const SessionBundle&) const = default;
};

nlohmann::json to_json(const SessionBundle& b);
SessionBundle bundle_from_json(const nlohmann::json& j);

// Sessions are returned ordered by session_id. Calendar-day sessions are
// "day-YYYY-MM-DD"; chat sessions are "thread-<thread_id>".
std::vector<SessionBundle> segment_sessions(std::vector<TranscriptRecord> records, SessionPolicy policy,
                                            const TimeZone& tz = TimeZone::utc(),
                                            std::chrono::milliseconds gap = kChunkGap);

struct Window {
    std::string id;
    std::string session_id;
    std::vector<TranscriptRecord> records;
};

// Consecutive windows of `size` records with the given stride (stride ==
// size gives a partition). Throws InvalidInput if size or stride is 0.
std::vector<IndexRange> window_ranges(std::size_t count, std::size_t size, std::size_t stride);

std::vector<Window> window(const SessionBundle& bundle, std::size_t chunk_index,
                           std::size_t size = kDefaultWindowSize);
// Every window of every chunk, in session order.
std::vector<Window> session_windows(const SessionBundle& bundle, std::size_t size = kDefaultWindowSize);
std::vector<Window> rolling_windows(const SessionBundle& bundle, std::size_t size, std::size_t stride);

std::vector<Observation> extract_observations(const Window& window, ModelBackend& backend,
                                              const std::string& user_name = "USER");

} // namespace lw
