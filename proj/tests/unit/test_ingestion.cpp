#include <doctest.h>

#include "latticework/error.hpp"
#include "latticework/ingestion.hpp"
#include "latticework/mock_backend.hpp"

#include "../support/temp_dir.hpp"

#include <algorithm>
#include <random>

using namespace lw;

namespace {

TranscriptRecord rec(const std::string& ts, const std::string& text, std::optional<std::string> app = std::nullopt) {
    TranscriptRecord r;
    r.timestamp = parse_rfc3339(ts);
    r.text = text;
    r.app_hint = std::move(app);
    return r;
}

std::vector<TranscriptRecord> records_every(int n, std::chrono::minutes step) {
    std::vector<TranscriptRecord> out;
    auto t0 = parse_rfc3339("2025-03-03T00:10:00Z");
    for (int i = 0; i < n; ++i) {
        TranscriptRecord r;
        r.timestamp = t0 + step * i;
        r.text = "record " + std::to_string(i);
        out.push_back(r);
    }
    return out;
}

} // namespace

TEST_CASE("record parsing enforces invariants") {
    CHECK_THROWS_AS(record_from_json({{"timestamp", "2025-03-03T09:00:00Z"}, {"kind", "screen_summary"}, {"text", "  "}}),
                    Error);
    try {
        parse_records_jsonl(R"({"timestamp":"2025-03-03T09:00:00Z","kind":"chat_message","text":"hi"})");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidInput);
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
    auto r = record_from_json({{"timestamp", "2025-03-03T09:00:00+01:00"}, {"kind", "screen_transcription"}, {"text", "x"}});
    CHECK(format_rfc3339(r.timestamp) == "2025-03-03T08:00:00Z");
    CHECK(record_from_json(to_json(r)) == r);
}

TEST_CASE("denylist parsing splits keywords from globs") {
    auto d = parse_denylist("# finance\n*mybank*\ndiagnosis\n\n");
    CHECK(d.url_patterns == std::set<std::string>{"*mybank*"});
    CHECK(d.keywords == std::set<std::string>{"diagnosis"});
}

TEST_CASE("a record on a sensitive URL is dropped") {
    auto d = parse_denylist("*bank*\n");
    auto res = filter_sensitive({rec("2025-03-03T09:00:00Z", "visited mybank.example/login"),
                                 rec("2025-03-03T09:01:00Z", "read a paper")},
                                d);
    CHECK(res.dropped == 1);
    REQUIRE(res.kept.size() == 1);
    CHECK(res.kept[0].text == "read a paper");
}

TEST_CASE("app hints are screened too") {
    auto d = parse_denylist("Patient-Portal\n");
    CHECK(matches_denylist(rec("2025-03-03T09:00:00Z", "checked results", "patient-portal (Chrome)"), d));
    CHECK_FALSE(matches_denylist(rec("2025-03-03T09:00:00Z", "checked results", "Overleaf"), d));
}

TEST_CASE("empty denylist with filtering disabled keeps everything") {
    DenylistConfig d;
    d.enabled = false;
    auto res = filter_sensitive(records_every(4, std::chrono::minutes(1)), d);
    CHECK(res.kept.size() == 4);
    CHECK(res.dropped == 0);
}

TEST_CASE("empty denylist with filtering enabled is a configuration error") {
    DenylistConfig d;
    try {
        filter_sensitive(records_every(1, std::chrono::minutes(1)), d);
        FAIL("expected ConfigError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ConfigError);
    }
}

TEST_CASE("filter drop count matches a brute-force scan") {
    const std::vector<std::string> texts = {
        "opened MYBANK statement", "wrote intro",  "diagnosis letter", "searched scholar", "lunch",
        "patient-portal inbox",    "edited draft", "slack",            "email",            "notes"};
    std::vector<TranscriptRecord> rs;
    for (std::size_t i = 0; i < texts.size(); ++i)
        rs.push_back(rec("2025-03-03T09:0" + std::to_string(i) + ":00Z", texts[i]));
    auto d = parse_denylist("*mybank*\n*patient-portal*\ndiagnosis\n");

    std::size_t expect = 0;
    for (const auto& t : texts) {
        std::string lower = t;
        std::transform(lower.begin(), lower.end(), lower.begin(), ::tolower);
        if (lower.find("mybank") != std::string::npos || lower.find("patient-portal") != std::string::npos ||
            lower.find("diagnosis") != std::string::npos)
            ++expect;
    }
    auto res = filter_sensitive(rs, d);
    CHECK(expect == 3);
    CHECK(res.dropped == expect);
    CHECK(res.kept.size() == texts.size() - expect);
}

TEST_CASE("calendar-day chunking splits at gaps of three hours or more") {
    auto chunks_for = [](std::chrono::minutes gap) {
        std::vector<TranscriptRecord> rs = {rec("2025-03-03T08:00:00Z", "a")};
        TranscriptRecord b = rs[0];
        b.timestamp += gap;
        b.text = "b";
        rs.push_back(b);
        auto sessions = segment_sessions(rs, SessionPolicy::CalendarDay);
        REQUIRE(sessions.size() == 1);
        return sessions[0].chunks.size();
    };
    CHECK(chunks_for(std::chrono::minutes(179)) == 1);
    CHECK(chunks_for(std::chrono::minutes(180)) == 2);
    CHECK(chunks_for(std::chrono::minutes(181)) == 2);
}

TEST_CASE("captures at 09:00, 10:00 and 13:30 form one session with two chunks") {
    auto sessions = segment_sessions({rec("2025-03-03T13:30:00Z", "c"), rec("2025-03-03T09:00:00Z", "a"),
                                      rec("2025-03-03T10:00:00Z", "b")},
                                     SessionPolicy::CalendarDay);
    REQUIRE(sessions.size() == 1);
    CHECK(sessions[0].session_id == "day-2025-03-03");
    CHECK(sessions[0].chunks == std::vector<IndexRange>{{0, 2}, {2, 3}});
    CHECK(sessions[0].records[0].text == "a");
}

TEST_CASE("calendar days follow the configured timezone") {
    auto r = rec("2025-03-03T23:30:00Z", "late");
    CHECK(segment_sessions({r}, SessionPolicy::CalendarDay, TimeZone::utc())[0].session_id == "day-2025-03-03");
    CHECK(segment_sessions({r}, SessionPolicy::CalendarDay, TimeZone::parse("+05:30"))[0].session_id ==
          "day-2025-03-04");
}

TEST_CASE("chat-thread policy groups by thread and needs thread ids") {
    auto a = rec("2025-03-03T09:00:00Z", "a");
    a.kind = RecordKind::ChatMessage;
    a.thread_id = "t1";
    auto b = a;
    b.thread_id = "t2";
    b.timestamp += std::chrono::hours(5);
    auto c = a;
    c.timestamp += std::chrono::hours(6);
    auto sessions = segment_sessions({a, b, c}, SessionPolicy::ChatThread);
    REQUIRE(sessions.size() == 2);
    CHECK(sessions[0].session_id == "thread-t1");
    CHECK(sessions[0].records.size() == 2);
    CHECK(sessions[0].chunks.size() == 1);

    auto orphan = rec("2025-03-03T09:00:00Z", "no thread");
    try {
        segment_sessions({orphan}, SessionPolicy::ChatThread);
        FAIL("expected MissingThreadId");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingThreadId);
    }
}

TEST_CASE("segmentation is order-insensitive and windows partition the input") {
    auto rs = records_every(57, std::chrono::minutes(17));
    auto shuffled = rs;
    std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937(5));
    auto a = segment_sessions(rs, SessionPolicy::CalendarDay);
    auto b = segment_sessions(shuffled, SessionPolicy::CalendarDay);
    CHECK(a == b);
    CHECK(segment_sessions(rs, SessionPolicy::CalendarDay) == a);

    std::multiset<std::string> seen;
    for (const auto& s : a)
        for (const auto& w : session_windows(s, 10)) {
            CHECK(w.records.size() <= 10);
            for (const auto& r : w.records) seen.insert(r.text);
        }
    std::multiset<std::string> want;
    for (const auto& r : rs) want.insert(r.text);
    CHECK(seen == want);
}

TEST_CASE("window sizes") {
    CHECK(window_ranges(25, 10, 10) == std::vector<IndexRange>{{0, 10}, {10, 20}, {20, 25}});
    CHECK(window_ranges(1, 10, 10) == std::vector<IndexRange>{{0, 1}});
    CHECK(window_ranges(10, 10, 10) == std::vector<IndexRange>{{0, 10}});
    CHECK_THROWS_AS(window_ranges(3, 0, 1), Error);

    auto sessions = segment_sessions(records_every(25, std::chrono::minutes(1)), SessionPolicy::CalendarDay);
    auto ws = window(sessions[0], 0);
    REQUIRE(ws.size() == 3);
    CHECK(ws[0].records.size() == 10);
    CHECK(ws[2].records.size() == 5);
}

TEST_CASE("mock observations echo each record of the window") {
    MockBackend backend;
    auto sessions = segment_sessions(records_every(3, std::chrono::minutes(1)), SessionPolicy::CalendarDay);
    auto ws = window(sessions[0], 0);
    REQUIRE(ws.size() == 1);
    auto obs = extract_observations(ws[0], backend);
    REQUIRE(obs.size() == 3);
    for (std::size_t i = 0; i < obs.size(); ++i) {
        CHECK(obs[i].source_window == ws[0].id);
        CHECK(obs[i].session_id == sessions[0].session_id);
        CHECK(obs[i].text.find(ws[0].records[i].text) != std::string::npos);
    }
    CHECK(extract_observations(ws[0], backend) == obs);
}

TEST_CASE("an empty window is rejected") {
    MockBackend backend;
    Window w;
    w.id = "day-2025-03-03/c0/w0";
    w.session_id = "day-2025-03-03";
    try {
        extract_observations(w, backend);
        FAIL("expected EmptyWindow");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyWindow);
    }
}

TEST_CASE("fixture transcripts parse and segment into three days") {
    auto rs = read_records_jsonl(lwtest::fixture("amy_records.jsonl"));
    CHECK(rs.size() == 30);
    auto sessions = segment_sessions(rs, SessionPolicy::CalendarDay);
    REQUIRE(sessions.size() == 3);
    CHECK(sessions[0].chunks.size() == 2);
}
