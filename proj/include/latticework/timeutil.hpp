#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace lw {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

// RFC 3339 with optional fractional seconds and a Z or +hh:mm offset.
Timestamp parse_rfc3339(std::string_view text);
std::string format_rfc3339(Timestamp ts);

// Zone used to assign records to calendar days. Accepts "UTC", fixed offsets
// ("+05:30", "UTC-08:00") or an IANA name present in the system zoneinfo.
class TimeZone {
public:
    static TimeZone parse(const std::string& spec);
    static TimeZone utc() { return parse("UTC"); }

    // YYYY-MM-DD of `ts` in this zone.
    std::string local_date(Timestamp ts) const;
    const std::string& name() const { return name_; }

private:
    std::string name_;
    bool fixed_ = true;
    std::chrono::minutes offset_{0};
};

} // namespace lw
