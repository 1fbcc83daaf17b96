#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cfdsim {

// Error taxonomy mirrors the CLI exit codes: config 1, data 2, solver 3.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Hour-aligned UTC timestamp, seconds since the Unix epoch.
using HourStamp = std::int64_t;

constexpr std::int64_t kSecondsPerHour = 3600;

struct CivilDate {
    int year;
    unsigned month;  // 1..12
    unsigned day;    // 1..31
};

// Days since 1970-01-01 for a proleptic Gregorian civil date.
constexpr std::int64_t days_from_civil(int y, unsigned m, unsigned d) noexcept {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

constexpr CivilDate civil_from_days(std::int64_t z) noexcept {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return {static_cast<int>(y + (m <= 2)), m, d};
}

inline HourStamp make_hour(int year, unsigned month, unsigned day, unsigned hour) {
    return days_from_civil(year, month, day) * 86400 + static_cast<std::int64_t>(hour) * kSecondsPerHour;
}

// Calendar year of an hour stamp, on UTC.
inline int year_of_hour(HourStamp t) {
    const std::int64_t days = (t >= 0 ? t : t - 86399) / 86400;
    return civil_from_days(days).year;
}

inline bool is_leap_year(int y) {
    return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
}

inline int hours_in_year(int y) {
    return is_leap_year(y) ? 8784 : 8760;
}

// Accepts "YYYY-MM-DDTHH:MMZ", "YYYY-MM-DDTHH:MM:SSZ" and the "+00:00"
// suffix; anything off the hour boundary or outside UTC is rejected.
inline HourStamp parse_iso_hour(std::string_view s) {
    auto fail = [&]() -> HourStamp {
        throw DataError("invalid UTC hour timestamp: '" + std::string(s) + "'");
    };
    auto num = [&](std::size_t pos, std::size_t len) -> int {
        int v = 0;
        if (pos + len > s.size()) fail();
        for (std::size_t i = 0; i < len; ++i) {
            const char c = s[pos + i];
            if (c < '0' || c > '9') fail();
            v = v * 10 + (c - '0');
        }
        return v;
    };
    if (s.size() < 16) fail();
    const int year = num(0, 4);
    if (s[4] != '-') fail();
    const int month = num(5, 2);
    if (s[7] != '-') fail();
    const int day = num(8, 2);
    if (s[10] != 'T' && s[10] != ' ') fail();
    const int hour = num(11, 2);
    if (s[13] != ':') fail();
    const int minute = num(14, 2);
    int second = 0;
    std::size_t rest = 16;
    if (rest < s.size() && s[rest] == ':') {
        second = num(rest + 1, 2);
        rest += 3;
    }
    std::string_view tz = s.substr(rest);
    if (!(tz == "Z" || tz == "z" || tz == "+00:00" || tz == "+0000" || tz.empty())) fail();
    if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23) fail();
    if (minute != 0 || second != 0) fail();
    return make_hour(year, static_cast<unsigned>(month), static_cast<unsigned>(day),
                     static_cast<unsigned>(hour));
}

inline std::string format_iso_hour(HourStamp t) {
    const std::int64_t days = (t >= 0 ? t : t - 86399) / 86400;
    const CivilDate cd = civil_from_days(days);
    const int hour = static_cast<int>((t - days * 86400) / kSecondsPerHour);
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:00:00Z", cd.year, cd.month, cd.day, hour);
    return buf;
}

// Shortest round-trip decimal form; keeps serialized datasets byte-stable
// and reload-exact.
inline std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& what) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last) {
        throw DataError("invalid number in " + what + ": '" + std::string(s) + "'");
    }
    return v;
}

inline long parse_long(std::string_view s, const std::string& what) {
    long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw DataError("invalid integer in " + what + ": '" + std::string(s) + "'");
    }
    return v;
}

}  // namespace cfdsim
