#include "latticework/timeutil.hpp"

#include "latticework/error.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <mutex>
#include <optional>

namespace lw {

namespace {

int digits(std::string_view s, std::size_t pos, std::size_t n) {
    if (pos + n > s.size()) throw Error(ErrorCode::InvalidInput, "truncated timestamp: " + std::string(s));
    int v = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i])))
            throw Error(ErrorCode::InvalidInput, "bad timestamp: " + std::string(s));
        v = v * 10 + (s[i] - '0');
    }
    return v;
}

void expect(std::string_view s, std::size_t pos, char c) {
    if (pos >= s.size() || (s[pos] != c && !(c == 'T' && (s[pos] == 't' || s[pos] == ' '))))
        throw Error(ErrorCode::InvalidInput, "bad timestamp: " + std::string(s));
}

// "+hh:mm" / "-hh:mm" → minutes east of UTC.
std::optional<std::chrono::minutes> parse_offset(std::string_view s) {
    if (s.size() != 6 || (s[0] != '+' && s[0] != '-') || s[3] != ':') return std::nullopt;
    for (std::size_t i : {1, 2, 4, 5})
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
    int h = (s[1] - '0') * 10 + (s[2] - '0');
    int m = (s[4] - '0') * 10 + (s[5] - '0');
    if (h > 23 || m > 59) return std::nullopt;
    std::chrono::minutes off{h * 60 + m};
    return s[0] == '-' ? -off : off;
}

std::string ymd_string(std::chrono::sys_days day) {
    std::chrono::year_month_day ymd{day};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

std::mutex& tz_mutex() {
    static std::mutex m;
    return m;
}

} // namespace

Timestamp parse_rfc3339(std::string_view s) {
    using namespace std::chrono;
    int y = digits(s, 0, 4);
    expect(s, 4, '-');
    int mo = digits(s, 5, 2);
    expect(s, 7, '-');
    int d = digits(s, 8, 2);
    expect(s, 10, 'T');
    int hh = digits(s, 11, 2);
    expect(s, 13, ':');
    int mm = digits(s, 14, 2);
    expect(s, 16, ':');
    int ss = digits(s, 17, 2);
    std::size_t pos = 19;
    int millis = 0;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        int scale = 100;
        std::size_t start = pos;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
            millis += (s[pos] - '0') * scale;
            scale /= 10;
            ++pos;
        }
        if (pos == start) throw Error(ErrorCode::InvalidInput, "bad fractional seconds: " + std::string(s));
    }
    minutes offset{0};
    std::string_view rest = s.substr(pos);
    if (rest == "Z" || rest == "z") {
    } else if (auto off = parse_offset(rest)) {
        offset = *off;
    } else {
        throw Error(ErrorCode::InvalidInput, "timestamp lacks a valid zone designator: " + std::string(s));
    }
    year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || hh > 23 || mm > 59 || ss > 60)
        throw Error(ErrorCode::InvalidInput, "timestamp out of range: " + std::string(s));
    auto local = sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss} + milliseconds{millis};
    return time_point_cast<milliseconds>(local - offset);
}

std::string format_rfc3339(Timestamp ts) {
    using namespace std::chrono;
    auto day = floor<days>(ts);
    auto tod = ts - day;
    auto h = duration_cast<hours>(tod);
    auto m = duration_cast<minutes>(tod - h);
    auto sec = duration_cast<seconds>(tod - h - m);
    auto ms = (tod - h - m - sec).count();
    char buf[40];
    if (ms == 0) {
        std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02dZ", ymd_string(day).c_str(),
                      static_cast<int>(h.count()), static_cast<int>(m.count()), static_cast<int>(sec.count()));
    } else {
        std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02d.%03dZ", ymd_string(day).c_str(),
                      static_cast<int>(h.count()), static_cast<int>(m.count()), static_cast<int>(sec.count()),
                      static_cast<int>(ms));
    }
    return buf;
}

TimeZone TimeZone::parse(const std::string& spec) {
    TimeZone tz;
    tz.name_ = spec;
    if (spec == "UTC" || spec == "Z" || spec == "GMT") return tz;
    std::string_view rest = spec;
    if (rest.rfind("UTC", 0) == 0) rest.remove_prefix(3);
    if (auto off = parse_offset(rest)) {
        tz.offset_ = *off;
        return tz;
    }
    const char* dir = std::getenv("TZDIR");
    std::filesystem::path base = dir ? dir : "/usr/share/zoneinfo";
    if (spec.empty() || spec.find("..") != std::string::npos || !std::filesystem::is_regular_file(base / spec))
        throw Error(ErrorCode::ConfigError, "unknown timezone: " + spec);
    tz.fixed_ = false;
    return tz;
}

std::string TimeZone::local_date(Timestamp ts) const {
    using namespace std::chrono;
    if (fixed_) return ymd_string(floor<days>(ts + offset_));

    // libc has the only zoneinfo reader available here; TZ is process-global.
    std::lock_guard lock(tz_mutex());
    const char* prev = std::getenv("TZ");
    std::optional<std::string> saved = prev ? std::optional<std::string>(prev) : std::nullopt;
    setenv("TZ", name_.c_str(), 1);
    tzset();
    std::time_t t = system_clock::to_time_t(time_point_cast<seconds>(ts));
    std::tm tm{};
    localtime_r(&t, &tm);
    if (saved) setenv("TZ", saved->c_str(), 1); else unsetenv("TZ");
    tzset();
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday);
    return buf;
}

} // namespace lw
