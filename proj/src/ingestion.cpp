#include "latticework/ingestion.hpp"

#include "latticework/backend.hpp"
#include "latticework/error.hpp"
#include "latticework/prompts.hpp"
#include "latticework/text_util.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace lw {

using nlohmann::json;

std::string to_string(RecordKind kind) {
    switch (kind) {
        case RecordKind::ScreenSummary:       return "screen_summary";
        case RecordKind::ScreenTranscription: return "screen_transcription";
        case RecordKind::ChatMessage:         return "chat_message";
    }
    return "screen_summary";
}

RecordKind record_kind_from_string(const std::string& s) {
    if (s == "screen_summary") return RecordKind::ScreenSummary;
    if (s == "screen_transcription") return RecordKind::ScreenTranscription;
    if (s == "chat_message") return RecordKind::ChatMessage;
    throw Error(ErrorCode::InvalidInput, "unknown record kind \"" + s + "\"");
}

json to_json(const TranscriptRecord& r) {
    json j = {{"timestamp", format_rfc3339(r.timestamp)}, {"kind", to_string(r.kind)}, {"text", r.text}};
    if (r.app_hint) j["app_hint"] = *r.app_hint;
    if (r.thread_id) j["thread_id"] = *r.thread_id;
    return j;
}

TranscriptRecord record_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidInput, "record is not a JSON object");
    auto str = [&](const char* key) -> std::string {
        auto it = j.find(key);
        if (it == j.end() || !it->is_string()) throw Error(ErrorCode::InvalidInput, std::string("record field \"") + key + "\" missing or not a string");
        return it->get<std::string>();
    };
    auto opt = [&](const char* key) -> std::optional<std::string> {
        auto it = j.find(key);
        if (it == j.end() || it->is_null()) return std::nullopt;
        if (!it->is_string()) throw Error(ErrorCode::InvalidInput, std::string("record field \"") + key + "\" is not a string");
        return it->get<std::string>();
    };
    TranscriptRecord r;
    r.timestamp = parse_rfc3339(str("timestamp"));
    r.kind = record_kind_from_string(str("kind"));
    r.text = str("text");
    r.app_hint = opt("app_hint");
    r.thread_id = opt("thread_id");
    if (trim(r.text).empty()) throw Error(ErrorCode::InvalidInput, "record text is empty");
    if (r.kind == RecordKind::ChatMessage && !r.thread_id)
        throw Error(ErrorCode::InvalidInput, "chat_message record lacks thread_id");
    return r;
}

std::vector<TranscriptRecord> parse_records_jsonl(const std::string& text) {
    std::vector<TranscriptRecord> out;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            out.push_back(record_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::InvalidInput, "line " + std::to_string(lineno) + ": " + e.what());
        } catch (const Error& e) {
            throw Error(e.code(), "line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

namespace {
std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}
} // namespace

std::vector<TranscriptRecord> read_records_jsonl(const std::filesystem::path& path) {
    return parse_records_jsonl(slurp(path));
}

DenylistConfig parse_denylist(const std::string& text) {
    DenylistConfig cfg;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::string entry = trim(line);
        if (entry.empty()) continue;
        if (entry.find_first_of("*?[") != std::string::npos) {
            cfg.url_patterns.insert(entry);
        } else {
            cfg.keywords.insert(entry);
        }
    }
    return cfg;
}

DenylistConfig read_denylist(const std::filesystem::path& path) {
    return parse_denylist(slurp(path));
}

namespace {

bool glob_hits(const std::string& pattern, const std::string& text) {
    if (fnmatch(pattern.c_str(), text.c_str(), FNM_CASEFOLD) == 0) return true;
    std::istringstream words(text);
    std::string w;
    while (words >> w) {
        if (fnmatch(pattern.c_str(), w.c_str(), FNM_CASEFOLD) == 0) return true;
    }
    return false;
}

bool field_hits(const std::string& text, const DenylistConfig& d) {
    for (const auto& k : d.keywords)
        if (icontains(text, k)) return true;
    for (const auto& p : d.url_patterns)
        if (glob_hits(p, text)) return true;
    return false;
}

} // namespace

bool matches_denylist(const TranscriptRecord& record, const DenylistConfig& denylist) {
    if (field_hits(record.text, denylist)) return true;
    return record.app_hint && field_hits(*record.app_hint, denylist);
}

FilterResult filter_sensitive(std::vector<TranscriptRecord> records, const DenylistConfig& denylist) {
    FilterResult result;
    if (!denylist.enabled) {
        result.kept = std::move(records);
        return result;
    }
    if (denylist.keywords.empty() && denylist.url_patterns.empty())
        throw Error(ErrorCode::ConfigError, "privacy filtering is enabled but the denylist is empty");
    for (auto& r : records) {
        if (matches_denylist(r, denylist)) {
            ++result.dropped;
        } else {
            result.kept.push_back(std::move(r));
        }
    }
    return result;
}

std::string to_string(SessionPolicy policy) {
    return policy == SessionPolicy::ChatThread ? "chat_thread" : "calendar_day";
}

SessionPolicy session_policy_from_string(const std::string& s) {
    if (s == "chat_thread") return SessionPolicy::ChatThread;
    if (s == "calendar_day") return SessionPolicy::CalendarDay;
    throw Error(ErrorCode::ConfigError, "unknown session policy \"" + s + "\"");
}

json to_json(const SessionBundle& b) {
    json records = json::array();
    for (const auto& r : b.records) records.push_back(to_json(r));
    json chunks = json::array();
    for (const auto& [begin, end] : b.chunks) chunks.push_back({begin, end});
    return {{"session_id", b.session_id}, {"policy", to_string(b.policy)}, {"records", records}, {"chunks", chunks}};
}

SessionBundle bundle_from_json(const json& j) {
    try {
        SessionBundle b;
        b.session_id = j.at("session_id").get<std::string>();
        b.policy = session_policy_from_string(j.at("policy").get<std::string>());
        for (const auto& r : j.at("records")) b.records.push_back(record_from_json(r));
        for (const auto& c : j.at("chunks")) b.chunks.emplace_back(c.at(0).get<std::size_t>(), c.at(1).get<std::size_t>());
        return b;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptPayload, std::string("malformed session bundle: ") + e.what());
    }
}

namespace {

// Stable order: timestamp, then the remaining fields, so that any input
// permutation sorts identically.
bool record_less(const TranscriptRecord& a, const TranscriptRecord& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    auto key = [](const TranscriptRecord& r) {
        return std::tuple(static_cast<int>(r.kind), r.text, r.app_hint.value_or(""), r.thread_id.value_or(""));
    };
    return key(a) < key(b);
}

} // namespace

std::vector<SessionBundle> segment_sessions(std::vector<TranscriptRecord> records, SessionPolicy policy,
                                            const TimeZone& tz, std::chrono::milliseconds gap) {
    std::map<std::string, std::vector<TranscriptRecord>> grouped;
    for (auto& r : records) {
        std::string sid;
        if (policy == SessionPolicy::ChatThread) {
            if (!r.thread_id) throw Error(ErrorCode::MissingThreadId, "record at " + format_rfc3339(r.timestamp) + " has no thread_id");
            sid = "thread-" + *r.thread_id;
        } else {
            sid = "day-" + tz.local_date(r.timestamp);
        }
        grouped[sid].push_back(std::move(r));
    }

    std::vector<SessionBundle> out;
    for (auto& [sid, recs] : grouped) {
        std::sort(recs.begin(), recs.end(), record_less);
        SessionBundle b;
        b.session_id = sid;
        b.policy = policy;
        if (policy == SessionPolicy::ChatThread) {
            b.chunks.emplace_back(0, recs.size());
        } else {
            std::size_t begin = 0;
            for (std::size_t i = 1; i < recs.size(); ++i) {
                if (recs[i].timestamp - recs[i - 1].timestamp >= gap) {
                    b.chunks.emplace_back(begin, i);
                    begin = i;
                }
            }
            b.chunks.emplace_back(begin, recs.size());
        }
        b.records = std::move(recs);
        out.push_back(std::move(b));
    }
    return out;
}

std::vector<IndexRange> window_ranges(std::size_t count, std::size_t size, std::size_t stride) {
    if (size == 0) throw Error(ErrorCode::InvalidInput, "window size must be >= 1");
    if (stride == 0) throw Error(ErrorCode::InvalidInput, "window stride must be >= 1");
    std::vector<IndexRange> out;
    for (std::size_t begin = 0; begin < count; begin += stride) {
        std::size_t end = std::min(count, begin + size);
        out.emplace_back(begin, end);
        if (end == count) break;
    }
    return out;
}

namespace {

std::vector<Window> windows_for_chunk(const SessionBundle& bundle, std::size_t chunk_index, std::size_t size,
                                      std::size_t stride, const char* tag) {
    if (chunk_index >= bundle.chunks.size())
        throw Error(ErrorCode::InvalidInput, "chunk " + std::to_string(chunk_index) + " out of range");
    auto [cb, ce] = bundle.chunks[chunk_index];
    std::vector<Window> out;
    std::size_t n = 0;
    for (auto [b, e] : window_ranges(ce - cb, size, stride)) {
        Window w;
        w.session_id = bundle.session_id;
        w.id = bundle.session_id + "/c" + std::to_string(chunk_index) + "/" + tag + std::to_string(n++);
        w.records.assign(bundle.records.begin() + static_cast<std::ptrdiff_t>(cb + b),
                         bundle.records.begin() + static_cast<std::ptrdiff_t>(cb + e));
        out.push_back(std::move(w));
    }
    return out;
}

} // namespace

std::vector<Window> window(const SessionBundle& bundle, std::size_t chunk_index, std::size_t size) {
    return windows_for_chunk(bundle, chunk_index, size, size, "w");
}

std::vector<Window> session_windows(const SessionBundle& bundle, std::size_t size) {
    std::vector<Window> out;
    for (std::size_t c = 0; c < bundle.chunks.size(); ++c) {
        auto ws = window(bundle, c, size);
        std::move(ws.begin(), ws.end(), std::back_inserter(out));
    }
    return out;
}

std::vector<Window> rolling_windows(const SessionBundle& bundle, std::size_t size, std::size_t stride) {
    std::vector<Window> out;
    for (std::size_t c = 0; c < bundle.chunks.size(); ++c) {
        auto ws = windows_for_chunk(bundle, c, size, stride, "r");
        std::move(ws.begin(), ws.end(), std::back_inserter(out));
    }
    return out;
}

std::vector<Observation> extract_observations(const Window& window, ModelBackend& backend, const std::string& user_name) {
    if (window.records.empty()) throw Error(ErrorCode::EmptyWindow, "window " + window.id + " has no records");

    std::string transcript;
    json records = json::array();
    for (const auto& r : window.records) {
        transcript += "[" + format_rfc3339(r.timestamp) + "] (" + to_string(r.kind) +
                      (r.app_hint ? ", " + *r.app_hint : std::string()) + ") " + r.text + "\n";
        records.push_back(to_json(r));
    }
    Request req;
    req.role = ModelRole::Insight;
    req.task = "observe";
    req.prompt = render_prompt("observe", {{"USER", user_name}, {"TRANSCRIPT", transcript}});
    const json item = {{"type", "object"}, {"required", {"text"}}, {"properties", {{"text", {{"type", "string"}}}}}};
    req.schema = {{"type", "object"},
                  {"required", {"observations"}},
                  {"properties", {{"observations", {{"type", "array"}, {"items", item}}}}}};
    req.context = {{"window_id", window.id}, {"records", records}};

    auto resp = backend.call(req);
    std::vector<Observation> out;
    std::size_t ordinal = 0;
    for (const auto& o : resp.parsed.at("observations")) {
        std::string text = trim(o.at("text").get<std::string>());
        if (text.empty()) continue;
        Observation ob;
        ob.session_id = window.session_id;
        ob.source_window = window.id;
        ob.text = text;
        ob.created_at = window.records.back().timestamp;
        ob.id = observation_id(ob.session_id, ob.source_window, ordinal++, ob.text);
        out.push_back(std::move(ob));
    }
    return out;
}

} // namespace lw
