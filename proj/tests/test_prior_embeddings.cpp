#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <utility>

#include "timerep/prior_embeddings.hpp"

using namespace timerep;

namespace {

TimePoint at(int month, int hour, int day = 15) {
    return make_time_point(CivilDate{2023, month, day}, hour);
}

}  // namespace

TEST(TriangularPulse, Examples) {
    EXPECT_DOUBLE_EQ(triangular_pulse(13.0, kFixedPulse), 1.0);
    EXPECT_DOUBLE_EQ(triangular_pulse(23.0, kFixedPulse), 0.01);
    EXPECT_NEAR(triangular_pulse(10.0, kFixedPulse), 0.505, 1e-12);
    EXPECT_DOUBLE_EQ(triangular_pulse(7.0, kFixedPulse), 0.01);
    EXPECT_DOUBLE_EQ(triangular_pulse(21.0, kFixedPulse), 0.01);
}

TEST(TriangularPulse, MirrorUnderOwnSlopes) {
    const auto& s = kFixedPulse;
    for (double delta = 0.01; delta <= s.peak_hour - s.start_hour; delta += 0.01) {
        const double right = s.peak_hour + delta * (s.end_hour - s.peak_hour) / (s.peak_hour - s.start_hour);
        EXPECT_NEAR(triangular_pulse(s.peak_hour - delta, s), triangular_pulse(right, s), 1e-12);
    }
}

TEST(TriangularPulse, NightIsFloor) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int i = 0; i < 1000; ++i) {
        double h = u(rng);
        h = h < 7.0 ? h : 21.0 + (h - 7.0);  // [0,7) or [21,24)
        EXPECT_EQ(triangular_pulse(h, kFixedPulse), kPulseFloor);
    }
}

TEST(SeasonalPulse, Examples) {
    const Site site{};
    const CivilDate eq{2023, 3, 20};
    const auto sd = solar_day(eq, site);
    const auto spec = seasonal_pulse_spec(eq, site);
    EXPECT_DOUBLE_EQ(triangular_pulse(sd.solar_noon_hour, spec), 1.0);
    EXPECT_DOUBLE_EQ(triangular_pulse(sd.sunset_hour + 0.5, spec), 0.01);
    const double h = sd.sunrise_hour + (sd.solar_noon_hour - sd.sunrise_hour) / 2.0;
    EXPECT_NEAR(triangular_pulse(h, spec), 0.505, 1e-12);
    const auto clock = seasonal_pulse_spec(eq, site, 0, PulsePeak::clock_noon);
    EXPECT_DOUBLE_EQ(clock.peak_hour, 12.0);
    EXPECT_THROW(season_modulated_pulse(at(6, 12), Site{75.0, 0.0}), UnsupportedError);
}

TEST(LinearFeature, RangeAndErrors) {
    std::vector<TimePoint> pts{at(1, 0, 1), at(6, 12), at(12, 23, 31)};
    EXPECT_THROW(linear_feature(pts[0]), StateError);
    const auto n = normalize_unix(pts, pts.front().unix_seconds, pts.back().unix_seconds);
    EXPECT_DOUBLE_EQ(linear_feature(n[0]), 0.0);
    EXPECT_DOUBLE_EQ(linear_feature(n[2]), 1.0);
    EXPECT_NE(linear_feature(n[0]), linear_feature(n[1]));
}

TEST(SineCosine, Examples) {
    const auto noon = sine_cosine_embedding(at(1, 12));
    EXPECT_NEAR(noon.values[0], 1.0, 1e-15);
    EXPECT_NEAR(noon.values[1], 0.0, 1e-15);
    EXPECT_NEAR(sine_cosine_embedding(at(1, 0)).values[0], -1.0, 1e-15);
    EXPECT_NEAR(sine_cosine_embedding(at(6, 0)).values[2], 1.0, 1e-15);
}

TEST(SineSawtooth, Examples) {
    EXPECT_DOUBLE_EQ(sine_sawtooth_embedding(at(1, 6)).values[1], -1.0);
    EXPECT_DOUBLE_EQ(sine_sawtooth_embedding(at(1, 9)).values[1], 0.0);
    EXPECT_DOUBLE_EQ(sine_sawtooth_embedding(at(12, 9)).values[3], -1.0);
    for (int h = 0; h < 18; ++h)
        EXPECT_NEAR(sine_sawtooth_embedding(at(3, h)).values[1],
                    sine_sawtooth_embedding(at(3, h + 6)).values[1], 1e-12);
}

TEST(EmbedSeries, SchemesAndErrors) {
    std::vector<TimePoint> pts{at(1, 0, 1), at(1, 12, 1), at(1, 0, 3)};
    const auto n = normalize_unix(pts, pts.front().unix_seconds, pts.back().unix_seconds);
    const auto fixed = embed_series(n, "fixed_tri_linear");
    EXPECT_DOUBLE_EQ(fixed[2].values[0], 0.01);
    EXPECT_DOUBLE_EQ(fixed[2].values[1], 1.0);
    EXPECT_EQ(fixed[0].feature_names, (std::vector<std::string>{"tri_pulse", "linear"}));
    EXPECT_NEAR(embed_series(n, "sine_cosine")[1].values[0], 1.0, 1e-15);
    EXPECT_THROW(embed_series(n, ""), ArgumentError);
    EXPECT_THROW(embed_series(n, "cosine_only"), ArgumentError);
    EXPECT_THROW(embed_series(n, "learned_sine"), ArgumentError);
    EXPECT_THROW(embed_series(std::span<const TimePoint>{}, TimeScheme::sine_cosine), ArgumentError);
    for (auto s : {TimeScheme::tri_linear, TimeScheme::fixed_tri_linear, TimeScheme::sine_cosine,
                   TimeScheme::sine_sawtooth})
        for (const auto& e : embed_series(n, s)) EXPECT_EQ(e.values.size(), e.feature_names.size());
}

TEST(Schemes, NamesRoundTrip) {
    for (auto s : {TimeScheme::tri_linear, TimeScheme::fixed_tri_linear, TimeScheme::sine_cosine,
                   TimeScheme::sine_sawtooth, TimeScheme::learned_sine, TimeScheme::learned_pulse})
        EXPECT_EQ(parse_scheme(to_string(s)), s);
}

// Exhaustive grid: every hour of every month.
TEST(Invariants, FullHourMonthGrid) {
    std::set<std::pair<long long, long long>> seen;
    const Site site{};
    for (int m = 1; m <= 12; ++m) {
        for (int h = 0; h < 24; ++h) {
            const TimePoint p = at(m, h);
            const auto sc = sine_cosine_embedding(p);
            EXPECT_NEAR(sc.values[0] * sc.values[0] + sc.values[1] * sc.values[1], 1.0, 1e-12);
            EXPECT_NEAR(sc.values[2] * sc.values[2] + sc.values[3] * sc.values[3], 1.0, 1e-12);
            seen.insert({std::llround(std::atan2(sc.values[0], sc.values[1]) * 1e9),
                         std::llround(std::atan2(sc.values[2], sc.values[3]) * 1e9)});
            const auto ss = sine_sawtooth_embedding(p);
            for (double v : ss.values) {
                EXPECT_GE(v, -1.0);
                EXPECT_LE(v, 1.0);
            }
            const double pulse = season_modulated_pulse(p, site);
            EXPECT_GE(pulse, kPulseFloor);
            EXPECT_LE(pulse, 1.0);
            const double fixed = triangular_pulse(p, kFixedPulse);
            EXPECT_EQ(fixed == 1.0, h == 13);
            if (h <= 7 || h >= 21) EXPECT_EQ(fixed, kPulseFloor);
        }
    }
    EXPECT_EQ(seen.size(), 24u * 12u);
}
