#pragma once

// Sensor-data ingestion and preparation: CSV parsing, range cleaning, hourly
// aggregation, day assembly with masks, five-class labeling, contiguous
// date-blocked splits, and a synthetic generator with known daylight shape.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "timerep/errors.hpp"
#include "timerep/matrix.hpp"
#include "timerep/prior_embeddings.hpp"
#include "timerep/temporal.hpp"

namespace timerep {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline constexpr std::size_t kHoursPerDay = 24;
inline constexpr std::size_t kNumClasses = 5;

inline bool present(double v) { return std::isfinite(v); }

struct RawReading {
    std::int64_t unix_seconds = 0;
    double pyranometer = kMissing;
    double external_temp = kMissing;
    double power = kMissing;
};

/// Column names of the raw CSV and the tolerance for unparseable rows.
struct CsvSchema {
    std::string timestamp = "timestamp";
    std::string pyranometer = "pyranometer";
    std::string external_temp = "external_temp";
    std::string power = "power";
    double max_bad_row_fraction = 0.01;
    int default_utc_offset_seconds = 0;
};

struct IngestResult {
    std::vector<RawReading> readings;
    std::size_t total_rows = 0;
    std::size_t bad_rows = 0;
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(std::move(cur));
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

/// Empty or NA/NaN fields are gaps; anything else must parse completely.
inline std::optional<double> parse_field(std::string_view s) {
    s = trim(s);
    if (s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "null") return kMissing;
    std::string tmp(s);
    char* end = nullptr;
    const double v = std::strtod(tmp.c_str(), &end);
    if (end != tmp.c_str() + tmp.size()) return std::nullopt;
    return v;
}

inline std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (trim(header[i]) == name) return i;
    throw DataError("CSV header has no column '" + name + "'");
}

}  // namespace detail

inline IngestResult ingest_csv(std::istream& in, const CsvSchema& schema = {}) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("CSV input is empty (no header row)");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
    const auto header = detail::split_csv_line(line);
    const std::size_t ts = detail::column_index(header, schema.timestamp);
    const std::size_t py = detail::column_index(header, schema.pyranometer);
    const std::size_t te = detail::column_index(header, schema.external_temp);
    const std::size_t pw = detail::column_index(header, schema.power);
    const std::size_t needed = std::max({ts, py, te, pw}) + 1;

    IngestResult result;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty() || line == "\r") continue;
        ++result.total_rows;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() < needed) {
            ++result.bad_rows;
            continue;
        }
        auto t = parse_iso8601(fields[ts], schema.default_utc_offset_seconds);
        auto p = detail::parse_field(fields[py]);
        auto e = detail::parse_field(fields[te]);
        auto w = detail::parse_field(fields[pw]);
        if (!t || !p || !e || !w) {
            ++result.bad_rows;
            continue;
        }
        result.readings.push_back({*t, *p, *e, *w});
    }
    if (result.total_rows > 0 &&
        static_cast<double>(result.bad_rows) >
            schema.max_bad_row_fraction * static_cast<double>(result.total_rows)) {
        throw DataError("CSV: " + std::to_string(result.bad_rows) + " of " +
                        std::to_string(result.total_rows) +
                        " rows unparseable, above the configured threshold");
    }
    return result;
}

inline IngestResult ingest_csv(const std::string& path, const CsvSchema& schema = {}) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file '" + path + "'");
    return ingest_csv(in, schema);
}

struct ValueRange {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool contains(double v) const { return v >= lo && v <= hi; }
};

struct ValidRanges {
    ValueRange pyranometer{0.0, 1500.0};
    ValueRange external_temp{-30.0, 55.0};
    ValueRange power{};
};

/// Out-of-range values become gaps; the interval is closed.
inline std::vector<RawReading> clean(std::span<const RawReading> readings,
                                     const ValidRanges& ranges = {}) {
    std::vector<RawReading> out(readings.begin(), readings.end());
    for (auto& r : out) {
        if (present(r.pyranometer) && !ranges.pyranometer.contains(r.pyranometer))
            r.pyranometer = kMissing;
        if (present(r.external_temp) && !ranges.external_temp.contains(r.external_temp))
            r.external_temp = kMissing;
        if (present(r.power) && !ranges.power.contains(r.power)) r.power = kMissing;
    }
    return out;
}

struct HourlyRecord {
    std::int64_t hour_start = 0;  // unix seconds, multiple of 3600
    double pyranometer = kMissing;
    double external_temp = kMissing;
    double power = kMissing;
};

/// Per-clock-hour arithmetic mean of each field's present values. Hours in
/// which no reading arrived are absent from the output; a field with no
/// present value in an hour is a gap.
inline std::vector<HourlyRecord> aggregate_hourly(std::span<const RawReading> readings) {
    struct Acc {
        std::array<double, 3> sum{};
        std::array<int, 3> n{};
    };
    std::map<std::int64_t, Acc> buckets;
    for (const auto& r : readings) {
        Acc& a = buckets[floor_div(r.unix_seconds, kSecondsPerHour)];
        const std::array<double, 3> v{r.pyranometer, r.external_temp, r.power};
        for (std::size_t i = 0; i < 3; ++i)
            if (present(v[i])) {
                a.sum[i] += v[i];
                ++a.n[i];
            }
    }
    std::vector<HourlyRecord> out;
    out.reserve(buckets.size());
    for (const auto& [hour, a] : buckets) {
        auto mean = [&](std::size_t i) { return a.n[i] ? a.sum[i] / a.n[i] : kMissing; };
        out.push_back({hour * kSecondsPerHour, mean(0), mean(1), mean(2)});
    }
    return out;
}

/// Number of thresholds strictly below `value`; thresholds must ascend strictly.
inline int label_power(double value, std::span<const double> thresholds) {
    for (std::size_t i = 1; i < thresholds.size(); ++i)
        if (!(thresholds[i - 1] < thresholds[i]))
            throw ConfigError("label thresholds must be strictly ascending");
    int cls = 0;
    for (double t : thresholds)
        if (t < value) ++cls;
    return cls;
}

inline const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names{"pyranometer", "external_temp"};
    return names;
}

/// One calendar day on the 24-slot hourly grid.
struct SeriesSample {
    CivilDate date;
    std::vector<TimePoint> time_points;  // 24, hour h in slot h
    Matrix features;                     // 24 x 2 (pyranometer, external_temp), NaN in gaps
    std::vector<bool> mask;              // slot observed and labelable
    std::vector<double> power;           // hourly power, NaN in gaps
    std::vector<int> labels;             // class per slot, -1 where masked

    std::size_t observed() const {
        return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
    }
};

inline SeriesSample empty_day(const CivilDate& date, int utc_offset_seconds) {
    SeriesSample s;
    s.date = date;
    s.features = Matrix(kHoursPerDay, 2, kMissing);
    s.mask.assign(kHoursPerDay, false);
    s.power.assign(kHoursPerDay, kMissing);
    s.labels.assign(kHoursPerDay, -1);
    for (std::size_t h = 0; h < kHoursPerDay; ++h)
        s.time_points.push_back(make_time_point(date, static_cast<int>(h), 0, 0, utc_offset_seconds));
    return s;
}

/// Groups hourly records into days in the given fixed offset. A slot is
/// observed when both inputs and the power reading are present. Days with more
/// than `max_missing_hours` unobserved slots are dropped.
inline std::vector<SeriesSample> assemble_days(std::span<const HourlyRecord> hourly,
                                               int utc_offset_seconds = 0,
                                               std::size_t max_missing_hours = 12) {
    std::map<CivilDate, SeriesSample> days;
    for (const auto& rec : hourly) {
        const TimePoint tp = make_time_point(rec.hour_start, utc_offset_seconds);
        auto it = days.find(tp.date());
        if (it == days.end())
            it = days.emplace(tp.date(), empty_day(tp.date(), utc_offset_seconds)).first;
        SeriesSample& s = it->second;
        const auto h = static_cast<std::size_t>(tp.hour);
        s.features(h, 0) = rec.pyranometer;
        s.features(h, 1) = rec.external_temp;
        s.power[h] = rec.power;
        s.mask[h] = present(rec.pyranometer) && present(rec.external_temp) && present(rec.power);
    }
    std::vector<SeriesSample> out;
    for (auto& [date, s] : days)
        if (kHoursPerDay - s.observed() <= max_missing_hours && s.observed() > 0)
            out.push_back(std::move(s));
    return out;
}

inline void label_samples(std::span<SeriesSample> samples, std::span<const double> thresholds) {
    for (auto& s : samples)
        for (std::size_t h = 0; h < s.mask.size(); ++h)
            s.labels[h] = s.mask[h] ? label_power(s.power[h], thresholds) : -1;
}

/// Nearest-rank quantiles of the observed hourly power, nudged upwards where
/// needed so the result ascends strictly (night-time zeros create ties).
inline std::vector<double> derive_thresholds(std::span<const SeriesSample> samples,
                                             std::span<const double> quantiles = {}) {
    static constexpr std::array<double, 4> kDefault{0.5, 0.7, 0.85, 0.95};
    if (quantiles.empty()) quantiles = kDefault;
    std::vector<double> values;
    for (const auto& s : samples)
        for (std::size_t h = 0; h < s.mask.size(); ++h)
            if (s.mask[h]) values.push_back(s.power[h]);
    if (values.empty()) throw DataError("derive_thresholds: no observed power values");
    std::sort(values.begin(), values.end());
    std::vector<double> out;
    for (double q : quantiles) {
        auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
        rank = std::clamp<std::size_t>(rank, 1, values.size());
        double t = values[rank - 1];
        if (!out.empty() && !(t > out.back()))
            t = std::nextafter(out.back(), std::numeric_limits<double>::infinity());
        out.push_back(t);
    }
    return out;
}

struct SplitFractions {
    double train = 0.70;
    double validation = 0.15;
};

struct DatasetSplit {
    std::vector<SeriesSample> train;
    std::vector<SeriesSample> validation;
    std::vector<SeriesSample> test;
    std::int64_t range_start = 0;
    std::int64_t range_end = 0;
};

/// First/last slot timestamps over all samples.
inline std::pair<std::int64_t, std::int64_t> time_extent(std::span<const SeriesSample> samples) {
    if (samples.empty()) throw DataError("time_extent: no samples");
    std::int64_t lo = std::numeric_limits<std::int64_t>::max();
    std::int64_t hi = std::numeric_limits<std::int64_t>::min();
    for (const auto& s : samples)
        for (const auto& tp : s.time_points) {
            lo = std::min(lo, tp.unix_seconds);
            hi = std::max(hi, tp.unix_seconds);
        }
    return {lo, hi};
}

/// Contiguous date-blocked split, oldest days in train and newest in test.
inline DatasetSplit split_by_date(std::vector<SeriesSample> samples, const SplitFractions& f = {}) {
    if (samples.empty()) throw DataError("split_by_date: no samples");
    if (!(f.train > 0.0) || f.validation < 0.0 || f.train + f.validation > 1.0)
        throw ConfigError("split fractions must satisfy train > 0, validation >= 0, sum <= 1");
    std::sort(samples.begin(), samples.end(),
              [](const auto& a, const auto& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < samples.size(); ++i)
        if (samples[i].date == samples[i - 1].date)
            throw DataError("split_by_date: duplicate date " + format_date(samples[i].date));
    const std::size_t n = samples.size();
    auto n_train = static_cast<std::size_t>(std::floor(f.train * static_cast<double>(n) + 0.5));
    auto n_val = static_cast<std::size_t>(std::floor(f.validation * static_cast<double>(n) + 0.5));
    n_train = std::clamp<std::size_t>(n_train, 1, n);
    n_val = std::min(n_val, n - n_train);
    DatasetSplit split;
    std::tie(split.range_start, split.range_end) = time_extent(samples);
    for (std::size_t i = 0; i < n; ++i) {
        auto& dst = i < n_train ? split.train : i < n_train + n_val ? split.validation : split.test;
        dst.push_back(std::move(samples[i]));
    }
    return split;
}

enum class DaylightProfile { sine, triangular };

inline DaylightProfile parse_profile(std::string_view s) {
    if (s == "sine") return DaylightProfile::sine;
    if (s == "triangular") return DaylightProfile::triangular;
    throw ArgumentError("unknown daylight profile '" + std::string(s) + "'");
}

inline std::string_view to_string(DaylightProfile p) {
    return p == DaylightProfile::sine ? "sine" : "triangular";
}

struct SyntheticConfig {
    int days = 60;
    DaylightProfile profile = DaylightProfile::triangular;
    double noise = 0.05;  // standard deviation relative to the peak irradiance
    std::uint64_t seed = 0;
    CivilDate start{2023, 1, 1};
    int utc_offset_seconds = 0;
    double peak_irradiance = 1000.0;  // W/m2 at full seasonal amplitude
    double start_hour = 6.0;          // triangular base and peak
    double peak_hour = 12.0;
    double end_hour = 18.0;
    double gap_fraction = 0.0;        // fraction of slots randomly masked
    std::vector<double> thresholds{0.05, 0.3, 0.55, 0.8};
};

/// Daily shape in [0,1], zero at night. The sine profile is the positive half
/// of sin(2*pi*(h - 6)/24); the triangular profile rises linearly from the
/// start hour to 1 at the peak hour and back to 0 at the end hour.
inline double daylight_profile(double hour, const SyntheticConfig& cfg) {
    if (cfg.profile == DaylightProfile::sine)
        return std::max(0.0, std::sin(2.0 * std::numbers::pi * (hour - 6.0) / 24.0));
    if (hour <= cfg.start_hour || hour >= cfg.end_hour) return 0.0;
    if (hour <= cfg.peak_hour) return (hour - cfg.start_hour) / (cfg.peak_hour - cfg.start_hour);
    return (cfg.end_hour - hour) / (cfg.end_hour - cfg.peak_hour);
}

/// Relative seasonal amplitude in [0.5, 1], largest at the June solstice.
inline double seasonal_amplitude(const CivilDate& date) {
    return 0.75 + 0.25 * std::cos(2.0 * std::numbers::pi * (day_of_year(date) - 172) / 365.0);
}

/// Labeled synthetic days. Power is the noise-free relative signal
/// amplitude * profile; labels threshold it with `cfg.thresholds`.
inline std::vector<SeriesSample> generate_synthetic(const SyntheticConfig& cfg) {
    if (cfg.days < 1) throw ArgumentError("generate_synthetic: days must be >= 1");
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<SeriesSample> out;
    const std::int64_t first = days_from_civil(cfg.start);
    for (int d = 0; d < cfg.days; ++d) {
        const CivilDate date = civil_from_days(first + d);
        SeriesSample s = empty_day(date, cfg.utc_offset_seconds);
        const double amp = seasonal_amplitude(date);
        std::vector<bool> gap(kHoursPerDay, false);
        for (std::size_t h = 0; h < kHoursPerDay; ++h) {
            const double shape = daylight_profile(static_cast<double>(h), cfg);
            const double signal = amp * shape;
            const double e1 = gauss(rng);
            const double e2 = gauss(rng);
            gap[h] = cfg.gap_fraction > 0.0 && unif(rng) < cfg.gap_fraction;
            s.features(h, 0) = std::max(0.0, cfg.peak_irradiance * (signal + cfg.noise * e1));
            s.features(h, 1) = 12.0 + 8.0 * amp + 6.0 * shape + 20.0 * cfg.noise * e2;
            s.power[h] = signal;
            s.mask[h] = true;
            s.labels[h] = label_power(signal, cfg.thresholds);
        }
        if (std::all_of(gap.begin(), gap.end(), [](bool g) { return g; })) gap[12] = false;
        for (std::size_t h = 0; h < kHoursPerDay; ++h) {
            if (!gap[h]) continue;
            s.features(h, 0) = kMissing;
            s.features(h, 1) = kMissing;
            s.power[h] = kMissing;
            s.mask[h] = false;
            s.labels[h] = -1;
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline void write_raw_csv(std::ostream& out, std::span<const SeriesSample> samples) {
    out << "timestamp,pyranometer,external_temp,power\n";
    auto num = [](double v) {
        if (!present(v)) return std::string();
        std::ostringstream ss;
        ss.precision(17);
        ss << v;
        return ss.str();
    };
    for (const auto& s : samples)
        for (std::size_t h = 0; h < s.time_points.size(); ++h) {
            if (!s.mask[h]) continue;
            out << format_iso8601(s.time_points[h]) << ',' << num(s.features(h, 0)) << ','
                << num(s.features(h, 1)) << ',' << num(s.power[h]) << '\n';
        }
}

/// Processed split cache: `date,hour,mask,pyranometer,external_temp,label`.
inline void write_split_csv(std::ostream& out, std::span<const SeriesSample> samples) {
    out << "date,hour,mask,pyranometer,external_temp,label\n";
    out.precision(17);
    for (const auto& s : samples)
        for (std::size_t h = 0; h < s.time_points.size(); ++h) {
            out << format_date(s.date) << ',' << h << ',' << (s.mask[h] ? 1 : 0) << ',';
            if (s.mask[h] && present(s.features(h, 0))) out << s.features(h, 0);
            out << ',';
            if (s.mask[h] && present(s.features(h, 1))) out << s.features(h, 1);
            out << ',' << s.labels[h] << '\n';
        }
}

/// Reads a processed split. Hours must lie in [0, `slots`); labels in [-1, n_classes).
inline std::vector<SeriesSample> read_split_csv(std::istream& in, int utc_offset_seconds = 0,
                                                std::size_t n_classes = kNumClasses) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("split CSV is empty");
    const auto header = detail::split_csv_line(line);
    const std::size_t c_date = detail::column_index(header, "date");
    const std::size_t c_hour = detail::column_index(header, "hour");
    const std::size_t c_mask = detail::column_index(header, "mask");
    const std::size_t c_pyr = detail::column_index(header, "pyranometer");
    const std::size_t c_tmp = detail::column_index(header, "external_temp");
    const std::size_t c_lbl = detail::column_index(header, "label");
    std::map<CivilDate, SeriesSample> days;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto f = detail::split_csv_line(line);
        const std::string where = "split CSV line " + std::to_string(line_no);
        if (f.size() != header.size()) throw DataError(where + ": wrong field count");
        auto date = parse_date(detail::trim(f[c_date]));
        if (!date) throw DataError(where + ": bad date");
        const int hour = std::stoi(f[c_hour]);
        if (hour < 0 || hour >= static_cast<int>(kHoursPerDay))
            throw DimensionError(where + ": hour outside the 24-slot grid");
        const int label = std::stoi(f[c_lbl]);
        if (label < -1 || label >= static_cast<int>(n_classes))
            throw DimensionError(where + ": label outside the model's class range");
        auto it = days.find(*date);
        if (it == days.end()) it = days.emplace(*date, empty_day(*date, utc_offset_seconds)).first;
        SeriesSample& s = it->second;
        const auto h = static_cast<std::size_t>(hour);
        auto p = detail::parse_field(f[c_pyr]);
        auto t = detail::parse_field(f[c_tmp]);
        if (!p || !t) throw DataError(where + ": unparseable value");
        s.features(h, 0) = *p;
        s.features(h, 1) = *t;
        s.mask[h] = std::stoi(f[c_mask]) != 0 && present(*p) && present(*t) && label >= 0;
        s.labels[h] = s.mask[h] ? label : -1;
    }
    std::vector<SeriesSample> out;
    for (auto& [d, s] : days) out.push_back(std::move(s));
    return out;
}

}  // namespace timerep
