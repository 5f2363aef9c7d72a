#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "timerep/analysis.hpp"
#include "timerep/training.hpp"

using namespace timerep;

namespace {

constexpr double kPi = std::numbers::pi;

struct World {
    DatasetSplit split;
    DataContext ctx;
};

World world(DaylightProfile profile, int days = 20, std::uint64_t seed = 3) {
    SyntheticConfig sc;
    sc.days = days;
    sc.profile = profile;
    sc.seed = seed;
    World w;
    w.split = split_by_date(generate_synthetic(sc));
    w.ctx = make_context(w.split, 0, {}, sc.thresholds);
    return w;
}

ModelConfig small(TimeScheme scheme, TimeNormalization norm = TimeNormalization::unix_range) {
    ModelConfig c;
    c.scheme = scheme;
    c.d_model = 16;
    c.n_heads = 2;
    c.n_encoder_layers = 1;
    c.n_decoder_layers = 1;
    c.ff_width = 16;
    c.dropout = 0.0;
    c.time_normalization = norm;
    return c;
}

Checkpoint fresh(const ModelConfig& cfg, const DataContext& ctx) {
    Checkpoint ck{Model(cfg), ctx, std::nullopt, {}};
    if (cfg.learned()) ck.initial_time = ck.model.time_params();
    return ck;
}

FeatureCurve curve(std::size_t index, std::vector<double> mean) {
    FeatureCurve c;
    c.feature_index = index;
    for (std::size_t h = 0; h < mean.size(); ++h) c.hours.push_back(static_cast<double>(h));
    c.std.assign(mean.size(), 0.0);
    c.mean = std::move(mean);
    return c;
}

std::vector<double> wave(double freq, double phase, double scale = 1.0) {
    std::vector<double> v;
    for (int h = 0; h < 24; ++h) v.push_back(scale * std::sin(2.0 * kPi * freq * h / 24.0 + phase));
    return v;
}

}  // namespace

TEST(FeatureCurves, HandSetParametersGiveAnalyticSine) {
    auto w = world(DaylightProfile::sine);
    auto ck = fresh(small(TimeScheme::learned_sine, TimeNormalization::hour_index), w.ctx);
    auto heads = ck.model.time_params();
    heads[0].omega[1] = 2.0 * kPi;
    heads[0].alpha[1] = -kPi / 2.0;
    ck.model.set_time_params(heads);
    for (auto role : {CurveRole::key, CurveRole::query}) {
        const auto curves = extract_feature_curves(ck, w.split.test, role, CurveStage::final);
        ASSERT_EQ(curves.size(), 24u);
        for (std::size_t h = 0; h < 24; ++h) {
            EXPECT_NEAR(curves[1].mean[h], std::sin(2.0 * kPi * h / 24.0 - kPi / 2.0), 1e-9);
            EXPECT_EQ(curves[1].hours[h], static_cast<double>(h));
        }
    }
}

TEST(FeatureCurves, QueryCurvesHaveZeroSpread) {
    auto w = world(DaylightProfile::triangular);
    for (auto scheme : {TimeScheme::learned_sine, TimeScheme::learned_pulse}) {
        const auto ck = fresh(small(scheme), w.ctx);
        for (const auto& c : extract_feature_curves(ck, w.split.test, CurveRole::query, CurveStage::final))
            for (double s : c.std) EXPECT_EQ(s, 0.0);
    }
}

TEST(FeatureCurves, InvariantsAndNearFlatInitialization) {
    auto w = world(DaylightProfile::triangular);
    const auto ck = fresh(small(TimeScheme::learned_sine), w.ctx);
    const auto curves = extract_feature_curves(ck, w.split.test, CurveRole::key, CurveStage::initial);
    for (const auto& c : curves) {
        EXPECT_TRUE(std::is_sorted(c.hours.begin(), c.hours.end()));
        EXPECT_EQ(std::adjacent_find(c.hours.begin(), c.hours.end()), c.hours.end());
        for (double s : c.std) EXPECT_GE(s, 0.0);
        const auto [lo, hi] = std::minmax_element(c.mean.begin(), c.mean.end());
        EXPECT_LT(*hi - *lo, 0.01);
    }
}

TEST(FeatureCurves, SampleOrderDoesNotMatter) {
    auto w = world(DaylightProfile::triangular, 40);
    auto ck = fresh(small(TimeScheme::learned_pulse), w.ctx);
    auto heads = ck.model.time_params();
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 3.0);
    for (auto& h : heads)
        for (std::size_t i = 0; i < h.d(); ++i) {
            h.omega[i] = g(rng);
            h.alpha[i] = g(rng);
        }
    ck.model.set_time_params(heads);
    auto samples = w.split.train;
    const auto a = extract_feature_curves(ck, samples, CurveRole::key, CurveStage::final, {1, 0});
    std::shuffle(samples.begin(), samples.end(), rng);
    const auto b = extract_feature_curves(ck, samples, CurveRole::key, CurveStage::final, {1, 0});
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].mean, b[i].mean);
        EXPECT_EQ(a[i].std, b[i].std);
        EXPECT_EQ(a[i].head, 1u);
    }
}

TEST(FeatureCurves, InitialStageMatchesFinalBeforeTraining) {
    auto w = world(DaylightProfile::triangular);
    const auto ck = fresh(small(TimeScheme::learned_pulse), w.ctx);
    const auto a = extract_feature_curves(ck, w.split.test, CurveRole::key, CurveStage::initial);
    const auto b = extract_feature_curves(ck, w.split.test, CurveRole::key, CurveStage::final);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].mean, b[i].mean);
}

TEST(FeatureCurves, DenseQuerySweep) {
    auto w = world(DaylightProfile::sine);
    auto ck = fresh(small(TimeScheme::learned_sine, TimeNormalization::hour_index), w.ctx);
    auto heads = ck.model.time_params();
    heads[0].omega[2] = 2.0 * kPi;
    heads[0].alpha[2] = 0.0;
    ck.model.set_time_params(heads);
    const auto curves = extract_feature_curves(ck, {}, CurveRole::query, CurveStage::final, {0, 93});
    ASSERT_EQ(curves[2].hours.size(), 93u);
    EXPECT_EQ(curves[2].hours.front(), 0.0);
    EXPECT_NEAR(curves[2].hours.back(), 23.0, 1e-12);
    for (std::size_t k = 0; k < 93; ++k)
        EXPECT_NEAR(curves[2].mean[k], std::sin(2.0 * kPi * curves[2].hours[k] / 24.0), 1e-12);
}

TEST(FeatureCurves, PriorSchemeIsUnsupported) {
    auto w = world(DaylightProfile::triangular);
    const auto ck = fresh(small(TimeScheme::sine_cosine), w.ctx);
    EXPECT_THROW(extract_feature_curves(ck, w.split.test, CurveRole::key, CurveStage::final), UnsupportedError);
    EXPECT_THROW(key_query_magnitude_report(ck, w.split.test), UnsupportedError);
}

TEST(FeatureCurves, CsvLayout) {
    auto w = world(DaylightProfile::triangular);
    const auto ck = fresh(small(TimeScheme::learned_sine), w.ctx);
    const auto curves = extract_feature_curves(ck, w.split.test, CurveRole::query, CurveStage::initial);
    std::ostringstream out;
    write_curves_csv(out, curves);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "feature_index,role,stage,hour,mean,std");
    std::getline(in, line);
    EXPECT_EQ(line.rfind("0,query,initial,0,", 0), 0u);
    std::size_t rows = 1;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 24u * 24u);
}

TEST(Grouping, IdenticalAndNegatedCurvesJoin) {
    const std::vector<FeatureCurve> same{curve(1, wave(1, 0.3)), curve(2, wave(1, 0.3))};
    auto g = group_by_similarity(same);
    ASSERT_EQ(g.groups.size(), 1u);
    EXPECT_EQ(g.groups[0].members, (std::vector<std::size_t>{1, 2}));
    EXPECT_NEAR(*g.groups[0].cohesion, 1.0, 1e-12);

    const std::vector<FeatureCurve> flipped{curve(1, wave(1, 0.3)), curve(2, wave(1, 0.3, -2.0))};
    g = group_by_similarity(flipped);
    ASSERT_EQ(g.groups.size(), 1u);
    // Representative aligns signs before averaging.
    for (std::size_t h = 0; h < 24; ++h) EXPECT_NEAR(g.groups[0].representative[h], 1.5 * wave(1, 0.3)[h], 1e-12);
}

TEST(Grouping, ConstructedThreeCurveFixture) {
    // a and b differ by a small phase (|r| = cos 0.2 > 0.85); c is the
    // second harmonic, uncorrelated with both on a full period.
    const std::vector<FeatureCurve> cs{curve(0, wave(1, 0.0)), curve(1, wave(1, 0.2)), curve(2, wave(2, 0.0))};
    EXPECT_NEAR(*pearson(cs[0].mean, cs[1].mean), std::cos(0.2), 1e-12);
    EXPECT_NEAR(*pearson(cs[0].mean, cs[2].mean), 0.0, 1e-12);
    const auto g = group_by_similarity(cs, 0.15);
    ASSERT_EQ(g.groups.size(), 2u);
    EXPECT_EQ(g.groups[0].members, (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(g.groups[1].members, (std::vector<std::size_t>{2}));
    EXPECT_EQ(*g.groups[1].cohesion, 1.0);
    // Tightening the cut below 1 - cos(0.2) separates a and b.
    EXPECT_EQ(group_by_similarity(cs, 0.5 * (1.0 - std::cos(0.2))).groups.size(), 3u);
}

TEST(Grouping, ConstantCurveIsIsolatedWithUndefinedCohesion) {
    const std::vector<FeatureCurve> cs{curve(0, wave(1, 0.0)), curve(1, std::vector<double>(24, 0.7)),
                                       curve(2, wave(1, 0.0, 2.0))};
    const auto g = group_by_similarity(cs);
    ASSERT_EQ(g.groups.size(), 2u);
    EXPECT_EQ(g.groups[0].members, (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(g.groups[1].members, (std::vector<std::size_t>{1}));
    EXPECT_FALSE(g.groups[1].cohesion.has_value());
    const auto j = grouping_to_json(g);
    EXPECT_TRUE(j["groups"][1]["cohesion"].is_null());
    EXPECT_EQ(j["threshold"].get<double>(), 0.15);
}

TEST(Grouping, PartitionSingleLinkageAndScaleInvariance) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<FeatureCurve> cs, scaled;
        for (std::size_t i = 0; i < 23; ++i) {
            // a few base shapes plus noise so groups of varying size appear
            const double base = static_cast<double>(i % 4);
            std::vector<double> m = wave(1 + base, base, 1.0);
            for (double& v : m) v += 0.3 * g(rng);
            cs.push_back(curve(i + 1, m));
            for (double& v : m) v *= 3.0;
            scaled.push_back(curve(i + 1, m));
        }
        const double thr = 0.4;
        const auto a = group_by_similarity(cs, thr);
        const auto b = group_by_similarity(scaled, thr);
        ASSERT_EQ(a.groups.size(), b.groups.size());
        std::multiset<std::size_t> seen;
        for (std::size_t k = 0; k < a.groups.size(); ++k) {
            EXPECT_EQ(a.groups[k].members, b.groups[k].members);
            seen.insert(a.groups[k].members.begin(), a.groups[k].members.end());
        }
        EXPECT_EQ(seen.size(), 23u);
        for (std::size_t i = 1; i <= 23; ++i) EXPECT_EQ(seen.count(i), 1u);
        // single-linkage: members of different groups are never within the cut
        std::vector<std::size_t> group_of(24);
        for (std::size_t k = 0; k < a.groups.size(); ++k)
            for (auto m : a.groups[k].members) group_of[m] = k;
        for (std::size_t i = 0; i < 23; ++i)
            for (std::size_t j = i + 1; j < 23; ++j)
                if (group_of[i + 1] != group_of[j + 1])
                    EXPECT_GT(1.0 - std::abs(*pearson(cs[i].mean, cs[j].mean)), thr);
    }
}

TEST(Grouping, RejectsBadInput) {
    const std::vector<FeatureCurve> one{curve(0, wave(1, 0.0))};
    EXPECT_THROW(group_by_similarity(one), ArgumentError);
    const std::vector<FeatureCurve> two{curve(0, wave(1, 0.0)), curve(1, wave(1, 0.0))};
    EXPECT_THROW(group_by_similarity(two, -0.1), ArgumentError);
}

TEST(MagnitudeReport, UntrainedSpansAreSmall) {
    auto w = world(DaylightProfile::triangular);
    const auto ck = fresh(small(TimeScheme::learned_sine), w.ctx);
    const auto r = key_query_magnitude_report(ck, w.split.test);
    EXPECT_EQ(r.features.size(), 2u * 24u);
    for (const auto& f : r.features) {
        EXPECT_LT(f.final.key_pre.span(), 0.05);
        EXPECT_LT(f.final.query_pre.span(), 0.05);
    }
}

TEST(MagnitudeReport, HourIndexSpansAreIdentical) {
    auto w = world(DaylightProfile::triangular);
    for (auto scheme : {TimeScheme::learned_sine, TimeScheme::learned_pulse}) {
        auto cfg = small(scheme, TimeNormalization::hour_index);
        TrainConfig tc;
        tc.epochs = 3;
        tc.learning_rate = 1e-2;
        auto res = train(cfg, tc, w.ctx, w.split.train, w.split.validation, 0);
        const Checkpoint ck{res.model, w.ctx, res.initial_time, {}};
        const auto r = key_query_magnitude_report(ck, w.split.test);
        EXPECT_TRUE(r.identical);
        for (const auto& f : r.features) {
            EXPECT_EQ(f.final.key_pre, f.final.query_pre);
            EXPECT_EQ(f.final.key_eval.span(), f.final.query_eval.span());
        }
        EXPECT_EQ(r.key_growth, r.query_growth);
        EXPECT_EQ(r.grew, "equal");
    }
}

TEST(MagnitudeReport, UnixNormalizationDistinguishesKeysAndQueries) {
    auto w = world(DaylightProfile::sine, 30);
    TrainConfig tc;
    tc.epochs = 5;
    tc.learning_rate = 1e-2;
    auto res = train(small(TimeScheme::learned_sine), tc, w.ctx, w.split.train, w.split.validation, 0);
    const Checkpoint ck{res.model, w.ctx, res.initial_time, {}};
    const auto r = key_query_magnitude_report(ck, w.split.test);
    EXPECT_FALSE(r.identical);
    for (const auto& f : r.features) EXPECT_LT(f.final.key_pre.span(), f.final.query_pre.span());
    EXPECT_TRUE(std::isfinite(r.key_growth));
    EXPECT_TRUE(std::isfinite(r.query_growth));
    const auto j = magnitude_report_to_json(r);
    EXPECT_EQ(j["features"].size(), r.features.size());
    EXPECT_EQ(j["normalization"], "unix");
}

TEST(DaylightFit, RecoversTriangularGenerator) {
    SyntheticConfig sc;
    sc.days = 1;
    sc.noise = 0.0;
    for (auto [s, p, e] : {std::array<double, 3>{6, 12, 18}, {5, 13, 20}, {7, 10, 17}}) {
        sc.start_hour = s;
        sc.peak_hour = p;
        sc.end_hour = e;
        std::vector<double> y;
        for (int h = 0; h < 24; ++h) y.push_back(300.0 * daylight_profile(h, sc));
        const auto fit = fit_daylight_curve(y, CurveFamily::triangular);
        EXPECT_FALSE(fit.degenerate);
        EXPECT_LT(fit.rmse, 1e-6);
        EXPECT_NEAR(fit.start, s, 0.1);
        EXPECT_NEAR(fit.peak, p, 0.1);
        EXPECT_NEAR(fit.end, e, 0.1);
        EXPECT_NEAR(fit.amplitude, 300.0, 1e-3);
    }
}

TEST(DaylightFit, SineInputPrefersSineFamily) {
    SyntheticConfig sc;
    sc.profile = DaylightProfile::sine;
    std::vector<double> y;
    for (int h = 0; h < 24; ++h) y.push_back(800.0 * daylight_profile(h, sc));
    const auto sine = fit_daylight_curve(y, CurveFamily::sine);
    const auto tri = fit_daylight_curve(y, CurveFamily::triangular);
    EXPECT_LE(sine.rmse, tri.rmse);
    EXPECT_LT(sine.rmse, 1e-4);
    EXPECT_NEAR(sine.shift, 6.0, 1e-3);
    EXPECT_NEAR(sine.amplitude, 800.0, 1e-2);
}

TEST(DaylightFit, DegenerateAndInvalidInput) {
    for (double v : {0.0, 4.5}) {
        const auto fit = fit_daylight_curve(std::vector<double>(24, v), CurveFamily::sine);
        EXPECT_TRUE(fit.degenerate);
        EXPECT_EQ(fit.rmse, 0.0);
        EXPECT_TRUE(fit_daylight_curve(std::vector<double>(24, v), CurveFamily::triangular).degenerate);
    }
    EXPECT_THROW(fit_daylight_curve(std::vector<double>(23, 1.0), CurveFamily::sine), DimensionError);
    std::vector<double> bad(24, 1.0);
    bad[3] = std::nan("");
    EXPECT_THROW(fit_daylight_curve(bad, CurveFamily::triangular), ArgumentError);
    EXPECT_THROW(parse_family("square"), ArgumentError);
}

TEST(DaylightFit, HourlyMeansOfNoisyTriangularDays) {
    SyntheticConfig sc;
    sc.days = 60;
    sc.noise = 0.05;
    sc.seed = 9;
    const auto days = generate_synthetic(sc);
    const auto fit = fit_daylight_curve(hourly_feature_means(days), CurveFamily::triangular);
    EXPECT_NEAR(fit.start, 6.0, 1.0);
    EXPECT_NEAR(fit.peak, 12.0, 1.0);
    EXPECT_NEAR(fit.end, 18.0, 1.0);
}
