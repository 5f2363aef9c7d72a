#pragma once

// Hand-specified time representations: season-modulated and fixed triangular
// pulses paired with a linear ramp, sine/cosine pairs and sine/sawtooth pairs.

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "timerep/errors.hpp"
#include "timerep/temporal.hpp"

namespace timerep {

/// The six time representations compared by the experiments. The first four
/// are fixed features fed to the PriorTime transformer, the last two are
/// learned by the time-attention (mTAN) classifier.
enum class TimeScheme {
    tri_linear,
    fixed_tri_linear,
    sine_cosine,
    sine_sawtooth,
    learned_sine,
    learned_pulse,
};

inline std::string_view to_string(TimeScheme s) {
    switch (s) {
        case TimeScheme::tri_linear: return "tri_linear";
        case TimeScheme::fixed_tri_linear: return "fixed_tri_linear";
        case TimeScheme::sine_cosine: return "sine_cosine";
        case TimeScheme::sine_sawtooth: return "sine_sawtooth";
        case TimeScheme::learned_sine: return "learned_sine";
        case TimeScheme::learned_pulse: return "learned_pulse";
    }
    return "?";
}

inline TimeScheme parse_scheme(std::string_view name) {
    for (auto s : {TimeScheme::tri_linear, TimeScheme::fixed_tri_linear, TimeScheme::sine_cosine,
                   TimeScheme::sine_sawtooth, TimeScheme::learned_sine,
                   TimeScheme::learned_pulse}) {
        if (name == to_string(s)) return s;
    }
    throw ArgumentError("unknown time scheme '" + std::string(name) + "'");
}

inline bool is_learned(TimeScheme s) {
    return s == TimeScheme::learned_sine || s == TimeScheme::learned_pulse;
}

struct EmbeddingVector {
    std::vector<double> values;
    std::vector<std::string> feature_names;
};

inline constexpr double kPulseFloor = 0.01;

/// Triangular pulse base and peak, in (fractional) hours of the day.
struct PulseSpec {
    double start_hour = 7.0;
    double peak_hour = 13.0;
    double end_hour = 21.0;
    double floor = kPulseFloor;

    void validate() const {
        if (!(start_hour < peak_hour && peak_hour < end_hour))
            throw ArgumentError("PulseSpec: require start < peak < end");
        if (!(floor > 0.0 && floor < 1.0)) throw ArgumentError("PulseSpec: floor must be in (0,1)");
    }
};

inline constexpr PulseSpec kFixedPulse{7.0, 13.0, 21.0, kPulseFloor};

/// Which "noon" the season-modulated pulse peaks at.
enum class PulsePeak { solar_noon, clock_noon };

struct SawtoothParams {
    double hour_shift = 6.0;
    double hour_period = 6.0;
    double month_shift = 12.0;
    double month_period = 12.0;
};

inline double fractional_hour(const TimePoint& p) {
    return p.hour + p.minute / 60.0 + p.second / 3600.0;
}

/// Piecewise-linear pulse: `floor` outside [start, end], rising to 1 at the peak.
inline double triangular_pulse(double hour, const PulseSpec& spec) {
    if (hour <= spec.start_hour || hour >= spec.end_hour) return spec.floor;
    if (hour == spec.peak_hour) return 1.0;
    const double rise = 1.0 - spec.floor;
    if (hour <= spec.peak_hour)
        return spec.floor + rise * (hour - spec.start_hour) / (spec.peak_hour - spec.start_hour);
    return spec.floor + rise * (spec.end_hour - hour) / (spec.end_hour - spec.peak_hour);
}

inline double triangular_pulse(const TimePoint& point, const PulseSpec& spec) {
    return triangular_pulse(fractional_hour(point), spec);
}

/// Pulse spec whose base is the day's sunrise..sunset.
inline PulseSpec seasonal_pulse_spec(const CivilDate& date, const Site& site,
                                     int utc_offset_seconds = 0,
                                     PulsePeak peak = PulsePeak::solar_noon) {
    const SolarDay sd = solar_day(date, site, utc_offset_seconds);
    PulseSpec spec{sd.sunrise_hour,
                   peak == PulsePeak::solar_noon ? sd.solar_noon_hour : 12.0,
                   sd.sunset_hour, kPulseFloor};
    spec.validate();
    return spec;
}

inline double season_modulated_pulse(const TimePoint& point, const Site& site,
                                     PulsePeak peak = PulsePeak::solar_noon) {
    return triangular_pulse(point,
                            seasonal_pulse_spec(point.date(), site, point.utc_offset_seconds, peak));
}

inline double linear_feature(const TimePoint& point) {
    if (!point.unix_norm) throw StateError("linear_feature: unix_norm not populated");
    return *point.unix_norm;
}

inline double hour_angle(double hour) { return 2.0 * std::numbers::pi * (hour - 6.0) / 24.0; }
inline double month_angle(double month) { return 2.0 * std::numbers::pi * (month - 3.0) / 12.0; }

/// 2*frac((t - shift)/period) - 1, in [-1, 1), equal to -1 at every reset.
inline double sawtooth(double t, double shift, double period) {
    const double x = (t - shift) / period;
    return 2.0 * (x - std::floor(x)) - 1.0;
}

inline EmbeddingVector sine_cosine_embedding(const TimePoint& point) {
    const double th = hour_angle(fractional_hour(point));
    const double tm = month_angle(point.month);
    return {{std::sin(th), std::cos(th), std::sin(tm), std::cos(tm)},
            {"sin_hour", "cos_hour", "sin_month", "cos_month"}};
}

inline EmbeddingVector sine_sawtooth_embedding(const TimePoint& point,
                                               const SawtoothParams& saw = {}) {
    const double h = fractional_hour(point);
    return {{std::sin(hour_angle(h)), sawtooth(h, saw.hour_shift, saw.hour_period),
             std::sin(month_angle(point.month)),
             sawtooth(point.month, saw.month_shift, saw.month_period)},
            {"sin_hour", "saw_hour", "sin_month", "saw_month"}};
}

struct PriorEmbeddingOptions {
    Site site{};
    PulseSpec fixed_pulse = kFixedPulse;
    PulsePeak peak = PulsePeak::solar_noon;
    SawtoothParams sawtooth{};
};

inline std::vector<std::string> prior_feature_names(TimeScheme scheme) {
    switch (scheme) {
        case TimeScheme::tri_linear:
        case TimeScheme::fixed_tri_linear: return {"tri_pulse", "linear"};
        case TimeScheme::sine_cosine: return {"sin_hour", "cos_hour", "sin_month", "cos_month"};
        case TimeScheme::sine_sawtooth: return {"sin_hour", "saw_hour", "sin_month", "saw_month"};
        default: throw ArgumentError("not a prior time scheme: " + std::string(to_string(scheme)));
    }
}

inline EmbeddingVector embed_point(const TimePoint& p, TimeScheme scheme,
                                   const PriorEmbeddingOptions& opt = {}) {
    switch (scheme) {
        case TimeScheme::tri_linear:
            return {{season_modulated_pulse(p, opt.site, opt.peak), linear_feature(p)},
                    prior_feature_names(scheme)};
        case TimeScheme::fixed_tri_linear:
            return {{triangular_pulse(p, opt.fixed_pulse), linear_feature(p)},
                    prior_feature_names(scheme)};
        case TimeScheme::sine_cosine: return sine_cosine_embedding(p);
        case TimeScheme::sine_sawtooth: return sine_sawtooth_embedding(p, opt.sawtooth);
        default: throw ArgumentError("not a prior time scheme: " + std::string(to_string(scheme)));
    }
}

inline std::vector<EmbeddingVector> embed_series(std::span<const TimePoint> points,
                                                 TimeScheme scheme,
                                                 const PriorEmbeddingOptions& opt = {}) {
    if (points.empty()) throw ArgumentError("embed_series: empty point list");
    std::vector<EmbeddingVector> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(embed_point(p, scheme, opt));
    return out;
}

inline std::vector<EmbeddingVector> embed_series(std::span<const TimePoint> points,
                                                 std::string_view scheme,
                                                 const PriorEmbeddingOptions& opt = {}) {
    if (scheme.empty()) throw ArgumentError("embed_series: empty scheme name");
    return embed_series(points, parse_scheme(scheme), opt);
}

}  // namespace timerep
