#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "timerep/temporal.hpp"

using namespace timerep;

namespace {

// Cooper's declination and the plain sunrise equation, independent of the
// NOAA series used by solar_day.
double cooper_daylight_hours(int doy, double lat_deg) {
    constexpr double pi = std::numbers::pi;
    const double decl = 23.45 * pi / 180.0 * std::sin(2.0 * pi * (284.0 + doy) / 365.0);
    const double lat = lat_deg * pi / 180.0;
    return 2.0 * std::acos(-std::tan(lat) * std::tan(decl)) * 180.0 / pi / 15.0;
}

}  // namespace

TEST(Calendar, CivilRoundTrip) {
    for (std::int64_t d = -800; d < 40000; d += 7) EXPECT_EQ(days_from_civil(civil_from_days(d)), d);
    EXPECT_EQ(days_from_civil({1970, 1, 1}), 0);
    EXPECT_EQ(day_of_year({2020, 12, 31}), 366);
    EXPECT_EQ(day_of_year({2021, 3, 1}), 60);
}

TEST(TimePointTest, FieldsAndOffset) {
    const auto tp = make_time_point(0, 2 * 3600);
    EXPECT_EQ(tp.year, 1970);
    EXPECT_EQ(tp.hour, 2);
    const auto back = make_time_point(CivilDate{1970, 1, 1}, 2, 0, 0, 2 * 3600);
    EXPECT_EQ(back.unix_seconds, 0);

    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::int64_t> u(0, 2'000'000'000);
    for (int i = 0; i < 500; ++i) {
        const auto t = make_time_point(u(rng), 3600 * (i % 5 - 2));
        const auto r = make_time_point(t.date(), t.hour, t.minute, t.second, t.utc_offset_seconds);
        EXPECT_EQ(r.unix_seconds, t.unix_seconds);
    }
}

TEST(TimePointTest, HourNormWithoutMinutes) {
    const auto tp = make_time_point(CivilDate{2023, 5, 4}, 18);
    EXPECT_DOUBLE_EQ(tp.hour_norm, 18.0 / 24.0);
}

TEST(Iso8601, Parses) {
    EXPECT_EQ(parse_iso8601("1970-01-01T00:00:00Z"), 0);
    EXPECT_EQ(parse_iso8601("1970-01-01 01:00:00+01:00"), 0);
    EXPECT_EQ(parse_iso8601("1970-01-01T01:00"), 3600);
    EXPECT_EQ(parse_iso8601("1970-01-02"), 86400);
    EXPECT_EQ(parse_iso8601("1970-01-01T00:00:00.75Z"), 0);
    EXPECT_FALSE(parse_iso8601("not a date"));
    EXPECT_FALSE(parse_iso8601("2023-13-01"));
    EXPECT_FALSE(parse_iso8601("2023-02-30T00:00"));
}

TEST(Iso8601, FormatRoundTrip) {
    const auto tp = make_time_point(1'700'000'000, 3 * 3600);
    EXPECT_EQ(parse_iso8601(format_iso8601(tp)), tp.unix_seconds);
}

TEST(NormalizeUnix, Examples) {
    const auto a = *parse_iso8601("2023-01-01T00:00Z");
    const auto b = *parse_iso8601("2023-01-02T00:00Z");
    EXPECT_DOUBLE_EQ(normalize_unix(a, a, b), 0.0);
    EXPECT_DOUBLE_EQ(normalize_unix(b, a, b), 1.0);
    EXPECT_DOUBLE_EQ(normalize_unix((a + b) / 2, a, b), 0.5);
    EXPECT_DOUBLE_EQ(normalize_unix(*parse_iso8601("2023-01-01T06:00Z"), a, b), 0.25);
    EXPECT_THROW(normalize_unix(a, a, a), ArgumentError);
    EXPECT_THROW(normalize_unix(b + 1, a, b), RangeError);
}

TEST(NormalizeUnix, StrictlyMonotone) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::int64_t> u(1'600'000'000, 1'700'000'000);
    std::vector<TimePoint> pts;
    for (int i = 0; i < 300; ++i) pts.push_back(make_time_point(u(rng)));
    const auto out = normalize_unix(pts, 1'600'000'000, 1'700'000'000);
    for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t j = 0; j < out.size(); ++j)
            if (pts[i].unix_seconds < pts[j].unix_seconds) EXPECT_LT(*out[i].unix_norm, *out[j].unix_norm);
}

TEST(HourIndex, Values) {
    EXPECT_DOUBLE_EQ(hour_index_norm(make_time_point(CivilDate{2023, 1, 1}, 0)), 0.0);
    EXPECT_DOUBLE_EQ(hour_index_norm(make_time_point(CivilDate{2023, 1, 1}, 12)), 0.5);
    EXPECT_NEAR(hour_index_norm(make_time_point(CivilDate{2023, 1, 1}, 23)), 0.9583, 1e-4);
    for (int h = 0; h < 24; ++h)
        EXPECT_DOUBLE_EQ(hour_index_norm(make_time_point(CivilDate{2023, 1, 1}, h)),
                         hour_index_norm(make_time_point(CivilDate{2023, 1, 2}, h)));
}

TEST(SolarDayTest, Equinox) {
    const auto sd = solar_day({2023, 3, 20}, Site{38.0, 23.8});
    EXPECT_NEAR(sd.daylight_hours(), 12.0, 0.2);
}

TEST(SolarDayTest, SolsticeMatchesIndependentOracle) {
    const auto sd = solar_day({2023, 6, 21}, Site{38.0, 23.8});
    EXPECT_GT(sd.daylight_hours(), 14.0);
    EXPECT_NEAR(sd.daylight_hours(), cooper_daylight_hours(172, 38.0), 0.1);
    const auto winter = solar_day({2023, 12, 21}, Site{38.0, 23.8});
    EXPECT_NEAR(winter.daylight_hours(), cooper_daylight_hours(355, 38.0), 0.1);
}

TEST(SolarDayTest, NoonIsMidpointAndOrdered) {
    for (int doy = 0; doy < 365; ++doy) {
        const auto date = civil_from_days(days_from_civil({2023, 1, 1}) + doy);
        const auto sd = solar_day(date, Site{38.0, 23.8}, 2 * 3600);
        EXPECT_DOUBLE_EQ(sd.solar_noon_hour, 0.5 * (sd.sunrise_hour + sd.sunset_hour));
        EXPECT_LT(sd.sunrise_hour, sd.solar_noon_hour);
        EXPECT_LT(sd.solar_noon_hour, sd.sunset_hour);
    }
}

TEST(SolarDayTest, ContinuousInDate) {
    double prev = solar_day({2023, 1, 1}, Site{}).daylight_hours();
    for (int doy = 1; doy < 730; ++doy) {
        const auto date = civil_from_days(days_from_civil({2023, 1, 1}) + doy);
        const double cur = solar_day(date, Site{}).daylight_hours();
        EXPECT_LT(std::abs(cur - prev), 10.0 / 60.0);
        prev = cur;
    }
}

TEST(SolarDayTest, NoonNearLongitudeEstimate) {
    // Clock noon shifts by 4 minutes per degree of longitude, +/- the equation of time (< 17 min).
    const auto sd = solar_day({2023, 4, 15}, Site{38.0, 23.8}, 2 * 3600);
    EXPECT_NEAR(sd.solar_noon_hour, 12.0 + 2.0 - 23.8 / 15.0, 17.0 / 60.0);
}

TEST(SolarDayTest, PolarRejected) {
    EXPECT_THROW(solar_day({2023, 6, 21}, Site{70.0, 20.0}), UnsupportedError);
    EXPECT_THROW(solar_day({2023, 6, 21}, Site{-80.0, 20.0}), UnsupportedError);
}
