#pragma once

// Timestamps, the two time-point normalizations used by the models, and
// sunrise/sunset geometry for the season-modulated pulse.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "timerep/errors.hpp"

namespace timerep {

inline constexpr std::int64_t kSecondsPerHour = 3600;
inline constexpr std::int64_t kSecondsPerDay = 86400;

struct CivilDate {
    int year = 1970;
    int month = 1;
    int day = 1;

    friend bool operator==(const CivilDate&, const CivilDate&) = default;
    friend auto operator<=>(const CivilDate&, const CivilDate&) = default;
};

/// Days since 1970-01-01 for a proleptic Gregorian date.
inline std::int64_t days_from_civil(const CivilDate& d) {
    using namespace std::chrono;
    const year_month_day ymd{year{d.year}, month{static_cast<unsigned>(d.month)},
                             day{static_cast<unsigned>(d.day)}};
    if (!ymd.ok()) throw ArgumentError("invalid calendar date");
    return sys_days{ymd}.time_since_epoch().count();
}

inline CivilDate civil_from_days(std::int64_t days) {
    using namespace std::chrono;
    const year_month_day ymd{sys_days{std::chrono::days{days}}};
    return {static_cast<int>(ymd.year()), static_cast<int>(static_cast<unsigned>(ymd.month())),
            static_cast<int>(static_cast<unsigned>(ymd.day()))};
}

inline int day_of_year(const CivilDate& d) {
    return static_cast<int>(days_from_civil(d) - days_from_civil({d.year, 1, 1})) + 1;
}

/// A timestamp with its calendar decomposition in a fixed UTC offset.
///
/// `unix_norm` is only meaningful once a dataset range is known, so it stays
/// empty until normalize_unix() fills it.
struct TimePoint {
    std::int64_t unix_seconds = 0;
    int utc_offset_seconds = 0;
    int year = 1970;
    int month = 1;
    int day = 1;
    int hour = 0;
    int minute = 0;
    int second = 0;
    std::optional<double> unix_norm;
    double hour_norm = 0.0;

    CivilDate date() const { return {year, month, day}; }
};

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

/// Decomposes a Unix timestamp into calendar fields at the given fixed offset.
inline TimePoint make_time_point(std::int64_t unix_seconds, int utc_offset_seconds = 0) {
    TimePoint tp;
    tp.unix_seconds = unix_seconds;
    tp.utc_offset_seconds = utc_offset_seconds;
    const std::int64_t local = unix_seconds + utc_offset_seconds;
    const std::int64_t days = floor_div(local, kSecondsPerDay);
    const std::int64_t rem = local - days * kSecondsPerDay;
    const CivilDate d = civil_from_days(days);
    tp.year = d.year;
    tp.month = d.month;
    tp.day = d.day;
    tp.hour = static_cast<int>(rem / kSecondsPerHour);
    tp.minute = static_cast<int>((rem % kSecondsPerHour) / 60);
    tp.second = static_cast<int>(rem % 60);
    tp.hour_norm = tp.hour / 24.0;
    return tp;
}

inline TimePoint make_time_point(const CivilDate& date, int hour, int minute = 0, int second = 0,
                                 int utc_offset_seconds = 0) {
    const std::int64_t local =
        days_from_civil(date) * kSecondsPerDay + hour * kSecondsPerHour + minute * 60 + second;
    return make_time_point(local - utc_offset_seconds, utc_offset_seconds);
}

/// Parses ISO-8601 date-times such as `2023-05-01T13:00:00Z`, `2023-05-01 13:00`,
/// `2023-05-01T13:00:00.250+02:00`. A timestamp without a zone designator is read
/// in `default_offset_seconds`. Returns Unix seconds (fractions truncated).
inline std::optional<std::int64_t> parse_iso8601(std::string_view text,
                                                 int default_offset_seconds = 0) {
    auto digits = [&](std::size_t pos, std::size_t n) -> std::optional<int> {
        if (pos + n > text.size()) return std::nullopt;
        int v = 0;
        for (std::size_t i = pos; i < pos + n; ++i) {
            if (text[i] < '0' || text[i] > '9') return std::nullopt;
            v = v * 10 + (text[i] - '0');
        }
        return v;
    };
    while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) text.remove_suffix(1);
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);

    auto y = digits(0, 4);
    if (!y || text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    auto mo = digits(5, 2);
    auto d = digits(8, 2);
    if (!mo || !d) return std::nullopt;
    int h = 0, mi = 0, s = 0;
    std::size_t pos = 10;
    if (pos < text.size() && (text[pos] == 'T' || text[pos] == ' ')) {
        auto hh = digits(pos + 1, 2);
        if (!hh || pos + 3 >= text.size() || text[pos + 3] != ':') return std::nullopt;
        auto mm = digits(pos + 4, 2);
        if (!mm) return std::nullopt;
        h = *hh;
        mi = *mm;
        pos += 6;
        if (pos < text.size() && text[pos] == ':') {
            auto ss = digits(pos + 1, 2);
            if (!ss) return std::nullopt;
            s = *ss;
            pos += 3;
            if (pos < text.size() && text[pos] == '.') {
                ++pos;
                const std::size_t start = pos;
                while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
                if (pos == start) return std::nullopt;
            }
        }
    }
    int offset = default_offset_seconds;
    if (pos < text.size()) {
        if (text[pos] == 'Z' && pos + 1 == text.size()) {
            offset = 0;
        } else if (text[pos] == '+' || text[pos] == '-') {
            const int sign = text[pos] == '-' ? -1 : 1;
            auto oh = digits(pos + 1, 2);
            if (!oh) return std::nullopt;
            std::size_t mpos = pos + 3;
            if (mpos < text.size() && text[mpos] == ':') ++mpos;
            int om = 0;
            if (mpos < text.size()) {
                auto omv = digits(mpos, 2);
                if (!omv || mpos + 2 != text.size()) return std::nullopt;
                om = *omv;
            } else if (mpos != text.size()) {
                return std::nullopt;
            }
            offset = sign * (*oh * 3600 + om * 60);
        } else {
            return std::nullopt;
        }
    }
    if (*mo < 1 || *mo > 12 || *d < 1 || *d > 31 || h > 23 || mi > 59 || s > 60)
        return std::nullopt;
    using namespace std::chrono;
    const year_month_day ymd{year{*y}, month{static_cast<unsigned>(*mo)},
                             day{static_cast<unsigned>(*d)}};
    if (!ymd.ok()) return std::nullopt;
    const std::int64_t days = sys_days{ymd}.time_since_epoch().count();
    return days * kSecondsPerDay + h * kSecondsPerHour + mi * 60 + s - offset;
}

/// `YYYY-MM-DDTHH:MM:SS` followed by `Z` or `+HH:MM`.
inline std::string format_iso8601(const TimePoint& tp) {
    char buf[40];
    if (tp.utc_offset_seconds == 0) {
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", tp.year, tp.month, tp.day,
                      tp.hour, tp.minute, tp.second);
    } else {
        const int off = tp.utc_offset_seconds;
        const int a = off < 0 ? -off : off;
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d%c%02d:%02d", tp.year,
                      tp.month, tp.day, tp.hour, tp.minute, tp.second, off < 0 ? '-' : '+',
                      a / 3600, (a % 3600) / 60);
    }
    return buf;
}

inline std::string format_date(const CivilDate& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
    return buf;
}

inline std::optional<CivilDate> parse_date(std::string_view text) {
    auto secs = parse_iso8601(text);
    if (!secs || text.size() != 10) return std::nullopt;
    return make_time_point(*secs).date();
}

/// Position of each point inside [range_start, range_end], written to `unix_norm`.
inline std::vector<TimePoint> normalize_unix(std::span<const TimePoint> points,
                                             std::int64_t range_start, std::int64_t range_end) {
    if (!(range_start < range_end)) throw ArgumentError("normalize_unix: degenerate range");
    const double width = static_cast<double>(range_end - range_start);
    std::vector<TimePoint> out(points.begin(), points.end());
    for (auto& p : out) {
        if (p.unix_seconds < range_start || p.unix_seconds > range_end)
            throw RangeError("normalize_unix: time point outside normalization range");
        p.unix_norm = static_cast<double>(p.unix_seconds - range_start) / width;
    }
    return out;
}

inline double normalize_unix(std::int64_t unix_seconds, std::int64_t range_start,
                             std::int64_t range_end) {
    if (!(range_start < range_end)) throw ArgumentError("normalize_unix: degenerate range");
    if (unix_seconds < range_start || unix_seconds > range_end)
        throw RangeError("normalize_unix: time point outside normalization range");
    return static_cast<double>(unix_seconds - range_start) /
           static_cast<double>(range_end - range_start);
}

/// Hour-of-day index over 24; minutes and seconds are ignored.
inline double hour_index_norm(const TimePoint& point) {
    if (point.hour < 0 || point.hour > 23) throw ArgumentError("hour_index_norm: invalid hour");
    return point.hour / 24.0;
}

struct Site {
    double latitude = 38.0;
    double longitude = 23.8;
};

struct SolarDay {
    CivilDate date;
    double sunrise_hour = 0.0;
    double solar_noon_hour = 0.0;
    double sunset_hour = 0.0;
    double latitude = 0.0;
    double longitude = 0.0;

    double daylight_hours() const { return sunset_hour - sunrise_hour; }
};

/// Sunrise and sunset from the NOAA fractional-year approximation of the
/// equation of time and solar declination, for a geometric horizon
/// (zenith 90 degrees, no refraction). Hours are expressed in the fixed
/// offset `utc_offset_seconds`.
inline SolarDay solar_day(const CivilDate& date, const Site& site, int utc_offset_seconds = 0) {
    if (!(std::abs(site.latitude) < 66.0))
        throw UnsupportedError("solar_day: latitude outside the supported band |lat| < 66");
    constexpr double pi = std::numbers::pi;
    const double days_in_year = std::chrono::year{date.year}.is_leap() ? 366.0 : 365.0;
    const double gamma = 2.0 * pi / days_in_year * (day_of_year(date) - 1);
    const double eqtime_min =
        229.18 * (0.000075 + 0.001868 * std::cos(gamma) - 0.032077 * std::sin(gamma) -
                  0.014615 * std::cos(2 * gamma) - 0.040849 * std::sin(2 * gamma));
    const double decl = 0.006918 - 0.399912 * std::cos(gamma) + 0.070257 * std::sin(gamma) -
                        0.006758 * std::cos(2 * gamma) + 0.000907 * std::sin(2 * gamma) -
                        0.002697 * std::cos(3 * gamma) + 0.00148 * std::sin(3 * gamma);
    const double lat = site.latitude * pi / 180.0;
    const double cos_ha = -std::tan(lat) * std::tan(decl);
    if (cos_ha < -1.0 || cos_ha > 1.0)
        throw UnsupportedError("solar_day: polar day or night at this latitude and date");
    const double ha_deg = std::acos(cos_ha) * 180.0 / pi;
    const double offset_min = utc_offset_seconds / 60.0;
    const double sunrise_min = 720.0 - 4.0 * (site.longitude + ha_deg) - eqtime_min + offset_min;
    const double sunset_min = 720.0 - 4.0 * (site.longitude - ha_deg) - eqtime_min + offset_min;

    SolarDay out;
    out.date = date;
    out.sunrise_hour = sunrise_min / 60.0;
    out.sunset_hour = sunset_min / 60.0;
    out.solar_noon_hour = 0.5 * (out.sunrise_hour + out.sunset_hour);
    out.latitude = site.latitude;
    out.longitude = site.longitude;
    return out;
}

}  // namespace timerep
