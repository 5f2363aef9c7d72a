#pragma once

// Experiment configuration read from YAML. Every error names the file, line
// and column of the offending node. See README for the key reference.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "timerep/data.hpp"
#include "timerep/errors.hpp"
#include "timerep/model.hpp"
#include "timerep/prior_embeddings.hpp"
#include "timerep/training.hpp"

namespace timerep {

enum class DataSource { csv, synthetic };

inline std::string_view to_string(DataSource s) { return s == DataSource::csv ? "csv" : "synthetic"; }

enum class LogLevel { debug, info, warn, error };

inline std::string_view to_string(LogLevel l) {
    switch (l) {
        case LogLevel::debug: return "debug";
        case LogLevel::info: return "info";
        case LogLevel::warn: return "warn";
        case LogLevel::error: return "error";
    }
    return "info";
}

inline LogLevel parse_log_level(std::string_view s) {
    if (s == "debug") return LogLevel::debug;
    if (s == "info") return LogLevel::info;
    if (s == "warn") return LogLevel::warn;
    if (s == "error") return LogLevel::error;
    throw ArgumentError("unknown log level '" + std::string(s) + "' (debug, info, warn, error)");
}

struct DataConfig {
    DataSource source = DataSource::csv;
    std::vector<std::filesystem::path> paths;  // resolved against the config file's directory
    CsvSchema schema{};
    ValidRanges ranges{};
    std::size_t max_missing_hours = 12;
    SyntheticConfig synthetic{};
};

struct ThresholdConfig {
    std::vector<double> quantiles{0.5, 0.7, 0.85, 0.95};
    std::vector<double> values;  // explicit class boundaries; overrides quantiles when set
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::string source;  // file the config came from, for messages
    DataConfig data{};
    PriorEmbeddingOptions prior{};
    SplitFractions split{};
    ThresholdConfig thresholds{};
    ModelConfig model{};
    TrainConfig training{};
    EvalOptions evaluation{};
    std::filesystem::path output_dir = "runs/experiment";
    LogLevel log_level = LogLevel::info;

    int utc_offset_seconds() const {
        return data.source == DataSource::synthetic ? data.synthetic.utc_offset_seconds
                                                    : data.schema.default_utc_offset_seconds;
    }
};

namespace detail {

class YamlReader {
public:
    explicit YamlReader(std::string source) : source_(std::move(source)) {}

    std::string where(const YAML::Node& n) const {
        const auto m = n.Mark();
        if (m.is_null()) return source_;
        return source_ + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1);
    }

    [[noreturn]] void fail(const YAML::Node& n, const std::string& msg) const {
        throw ConfigError(where(n) + ": " + msg);
    }

    void expect_map(const YAML::Node& n, std::string_view what) const {
        if (!n.IsMap()) fail(n, std::string(what) + " must be a mapping");
    }

    void check_keys(const YAML::Node& n, std::string_view what, std::initializer_list<std::string_view> allowed) const {
        expect_map(n, what);
        std::set<std::string> seen;
        for (const auto& kv : n) {
            const auto key = kv.first.as<std::string>();
            if (!seen.insert(key).second) fail(kv.first, "duplicate key '" + key + "' in " + std::string(what));
            bool ok = false;
            for (auto a : allowed) ok = ok || key == a;
            if (!ok) fail(kv.first, "unknown key '" + key + "' in " + std::string(what));
        }
    }

    template <class T>
    T scalar(const YAML::Node& n, std::string_view key) const {
        if (!n.IsScalar()) fail(n, std::string(key) + " must be a scalar");
        try {
            return n.as<T>();
        } catch (const YAML::Exception&) {
            fail(n, "cannot read " + std::string(key) + " from '" + n.Scalar() + "'");
        }
    }

    double number(const YAML::Node& n, std::string_view key) const {
        const double v = scalar<double>(n, key);
        if (!std::isfinite(v)) fail(n, std::string(key) + " must be finite");
        return v;
    }

    std::int64_t integer(const YAML::Node& n, std::string_view key, std::int64_t lo) const {
        const auto v = scalar<long long>(n, key);
        if (v < lo) fail(n, std::string(key) + " must be >= " + std::to_string(lo));
        return v;
    }

    std::size_t count(const YAML::Node& n, std::string_view key, std::size_t lo = 0) const {
        return static_cast<std::size_t>(integer(n, key, static_cast<std::int64_t>(lo)));
    }

    std::vector<double> numbers(const YAML::Node& n, std::string_view key) const {
        if (!n.IsSequence()) fail(n, std::string(key) + " must be a list");
        std::vector<double> out;
        for (const auto& e : n) out.push_back(number(e, key));
        return out;
    }

    template <class F>
    auto parsed(const YAML::Node& n, std::string_view key, F&& parse) const {
        const auto text = scalar<std::string>(n, key);
        try {
            return parse(text);
        } catch (const std::exception& e) {
            fail(n, e.what());
        }
    }

    ValueRange range(const YAML::Node& n, std::string_view key) const {
        const auto v = numbers(n, key);
        if (v.size() != 2 || !(v[0] <= v[1])) fail(n, std::string(key) + " must be [low, high] with low <= high");
        return {v[0], v[1]};
    }

private:
    std::string source_;
};

inline int utc_offset(const YamlReader& r, const YAML::Node& n) {
    const double hours = r.number(n, "utc_offset_hours");
    if (std::abs(hours) > 14.0) r.fail(n, "utc_offset_hours must lie in [-14, 14]");
    return static_cast<int>(std::lround(hours * 3600.0));
}

inline void read_synthetic(const YamlReader& r, const YAML::Node& n, SyntheticConfig& s) {
    r.check_keys(n, "data.synthetic",
                 {"days", "profile", "noise", "seed", "start", "utc_offset_hours", "gap_fraction", "peak_irradiance",
                  "start_hour", "peak_hour", "end_hour", "thresholds"});
    if (n["days"]) s.days = static_cast<int>(r.integer(n["days"], "days", 1));
    if (n["profile"]) s.profile = r.parsed(n["profile"], "profile", [](const std::string& t) { return parse_profile(t); });
    if (n["noise"]) {
        s.noise = r.number(n["noise"], "noise");
        if (s.noise < 0.0) r.fail(n["noise"], "noise must be >= 0");
    }
    if (n["seed"]) s.seed = static_cast<std::uint64_t>(r.integer(n["seed"], "seed", 0));
    if (n["start"]) {
        auto d = parse_date(r.scalar<std::string>(n["start"], "start"));
        if (!d) r.fail(n["start"], "start must be a YYYY-MM-DD date");
        s.start = *d;
    }
    if (n["utc_offset_hours"]) s.utc_offset_seconds = utc_offset(r, n["utc_offset_hours"]);
    if (n["gap_fraction"]) {
        s.gap_fraction = r.number(n["gap_fraction"], "gap_fraction");
        if (s.gap_fraction < 0.0 || s.gap_fraction >= 1.0) r.fail(n["gap_fraction"], "gap_fraction must be in [0, 1)");
    }
    if (n["peak_irradiance"]) s.peak_irradiance = r.number(n["peak_irradiance"], "peak_irradiance");
    if (n["start_hour"]) s.start_hour = r.number(n["start_hour"], "start_hour");
    if (n["peak_hour"]) s.peak_hour = r.number(n["peak_hour"], "peak_hour");
    if (n["end_hour"]) s.end_hour = r.number(n["end_hour"], "end_hour");
    if (!(s.start_hour < s.peak_hour && s.peak_hour < s.end_hour)) r.fail(n, "require start_hour < peak_hour < end_hour");
    if (n["thresholds"]) s.thresholds = r.numbers(n["thresholds"], "thresholds");
}

inline void read_data(const YamlReader& r, const YAML::Node& n, const std::filesystem::path& base, DataConfig& d) {
    r.check_keys(n, "data",
                 {"source", "paths", "utc_offset_hours", "schema", "valid_ranges", "max_missing_hours", "synthetic"});
    if (n["source"])
        d.source = r.parsed(n["source"], "source", [](const std::string& t) {
            if (t == "csv") return DataSource::csv;
            if (t == "synthetic") return DataSource::synthetic;
            throw ArgumentError("data.source must be csv or synthetic, got '" + t + "'");
        });
    if (n["paths"]) {
        if (!n["paths"].IsSequence()) r.fail(n["paths"], "paths must be a list");
        for (const auto& p : n["paths"]) {
            std::filesystem::path path = r.scalar<std::string>(p, "paths");
            if (path.is_relative()) path = base / path;
            if (!std::filesystem::exists(path)) r.fail(p, "dataset path '" + path.string() + "' does not exist");
            d.paths.push_back(path);
        }
    }
    if (d.source == DataSource::csv && d.paths.empty()) r.fail(n, "csv data needs at least one entry in paths");
    if (n["utc_offset_hours"]) d.schema.default_utc_offset_seconds = utc_offset(r, n["utc_offset_hours"]);
    if (const auto s = n["schema"]) {
        r.check_keys(s, "data.schema", {"timestamp", "pyranometer", "external_temp", "power", "max_bad_row_fraction"});
        if (s["timestamp"]) d.schema.timestamp = r.scalar<std::string>(s["timestamp"], "timestamp");
        if (s["pyranometer"]) d.schema.pyranometer = r.scalar<std::string>(s["pyranometer"], "pyranometer");
        if (s["external_temp"]) d.schema.external_temp = r.scalar<std::string>(s["external_temp"], "external_temp");
        if (s["power"]) d.schema.power = r.scalar<std::string>(s["power"], "power");
        if (s["max_bad_row_fraction"]) {
            d.schema.max_bad_row_fraction = r.number(s["max_bad_row_fraction"], "max_bad_row_fraction");
            if (d.schema.max_bad_row_fraction < 0.0 || d.schema.max_bad_row_fraction > 1.0)
                r.fail(s["max_bad_row_fraction"], "max_bad_row_fraction must be in [0, 1]");
        }
    }
    if (const auto v = n["valid_ranges"]) {
        r.check_keys(v, "data.valid_ranges", {"pyranometer", "external_temp", "power"});
        if (v["pyranometer"]) d.ranges.pyranometer = r.range(v["pyranometer"], "pyranometer");
        if (v["external_temp"]) d.ranges.external_temp = r.range(v["external_temp"], "external_temp");
        if (v["power"]) d.ranges.power = r.range(v["power"], "power");
    }
    if (n["max_missing_hours"]) {
        d.max_missing_hours = r.count(n["max_missing_hours"], "max_missing_hours");
        if (d.max_missing_hours >= kHoursPerDay) r.fail(n["max_missing_hours"], "max_missing_hours must be < 24");
    }
    if (n["synthetic"]) read_synthetic(r, n["synthetic"], d.synthetic);
}

inline void read_prior(const YamlReader& r, const YAML::Node& n, PriorEmbeddingOptions& p) {
    r.check_keys(n, "prior", {"pulse_peak", "fixed_pulse", "sawtooth"});
    if (n["pulse_peak"])
        p.peak = r.parsed(n["pulse_peak"], "pulse_peak", [](const std::string& t) {
            if (t == "solar_noon") return PulsePeak::solar_noon;
            if (t == "clock_noon") return PulsePeak::clock_noon;
            throw ArgumentError("pulse_peak must be solar_noon or clock_noon, got '" + t + "'");
        });
    if (const auto f = n["fixed_pulse"]) {
        r.check_keys(f, "prior.fixed_pulse", {"start_hour", "peak_hour", "end_hour", "floor"});
        if (f["start_hour"]) p.fixed_pulse.start_hour = r.number(f["start_hour"], "start_hour");
        if (f["peak_hour"]) p.fixed_pulse.peak_hour = r.number(f["peak_hour"], "peak_hour");
        if (f["end_hour"]) p.fixed_pulse.end_hour = r.number(f["end_hour"], "end_hour");
        if (f["floor"]) p.fixed_pulse.floor = r.number(f["floor"], "floor");
        try {
            p.fixed_pulse.validate();
        } catch (const ArgumentError& e) {
            r.fail(f, e.what());
        }
    }
    if (const auto s = n["sawtooth"]) {
        r.check_keys(s, "prior.sawtooth", {"hour_shift", "hour_period", "month_shift", "month_period"});
        if (s["hour_shift"]) p.sawtooth.hour_shift = r.number(s["hour_shift"], "hour_shift");
        if (s["hour_period"]) p.sawtooth.hour_period = r.number(s["hour_period"], "hour_period");
        if (s["month_shift"]) p.sawtooth.month_shift = r.number(s["month_shift"], "month_shift");
        if (s["month_period"]) p.sawtooth.month_period = r.number(s["month_period"], "month_period");
        if (!(p.sawtooth.hour_period > 0.0) || !(p.sawtooth.month_period > 0.0))
            r.fail(s, "sawtooth periods must be positive");
    }
}

inline void read_model(const YamlReader& r, const YAML::Node& n, ModelConfig& m) {
    r.check_keys(n, "model",
                 {"scheme", "d_model", "n_heads", "encoder_layers", "decoder_layers", "ff_width", "dropout",
                  "time_grid", "time_normalization", "time_init_scale", "reconstruction_weight", "pulse"});
    if (n["scheme"]) m.scheme = r.parsed(n["scheme"], "scheme", [](const std::string& t) { return parse_scheme(t); });
    if (n["d_model"]) m.d_model = r.count(n["d_model"], "d_model", 1);
    if (n["n_heads"]) m.n_heads = r.count(n["n_heads"], "n_heads", 1);
    if (n["encoder_layers"]) m.n_encoder_layers = r.count(n["encoder_layers"], "encoder_layers", 1);
    if (n["decoder_layers"]) m.n_decoder_layers = r.count(n["decoder_layers"], "decoder_layers", 1);
    if (n["ff_width"]) m.ff_width = r.count(n["ff_width"], "ff_width", 1);
    if (n["dropout"]) m.dropout = r.number(n["dropout"], "dropout");
    if (n["time_grid"]) m.time_grid = r.count(n["time_grid"], "time_grid", 1);
    if (n["time_normalization"])
        m.time_normalization = r.parsed(n["time_normalization"], "time_normalization",
                                        [](const std::string& t) { return parse_time_normalization(t); });
    if (n["time_init_scale"]) m.time_init_scale = r.number(n["time_init_scale"], "time_init_scale");
    if (n["reconstruction_weight"]) m.reconstruction_weight = r.number(n["reconstruction_weight"], "reconstruction_weight");
    if (const auto p = n["pulse"]) {
        r.check_keys(p, "model.pulse", {"peak_index", "percentile", "gradient"});
        if (p["peak_index"]) m.pulse.peak_index = r.count(p["peak_index"], "peak_index");
        if (p["percentile"]) m.pulse.percentile = r.number(p["percentile"], "percentile");
        if (p["gradient"])
            m.pulse.gradient = r.parsed(p["gradient"], "gradient", [](const std::string& t) {
                if (t == "exact") return PercentileGradient::exact;
                if (t == "frozen") return PercentileGradient::frozen;
                throw ArgumentError("pulse.gradient must be exact or frozen, got '" + t + "'");
            });
    }
    try {
        m.validate();
    } catch (const ConfigError& e) {
        r.fail(n, e.what());
    }
}

inline void read_training(const YamlReader& r, const YAML::Node& n, TrainConfig& t) {
    r.check_keys(n, "training",
                 {"epochs", "batch_size", "learning_rate", "optimizer", "seeds", "early_stop_patience",
                  "class_weighting", "time_lr_scale"});
    if (n["epochs"]) t.epochs = r.count(n["epochs"], "epochs", 1);
    if (n["batch_size"]) t.batch_size = r.count(n["batch_size"], "batch_size", 1);
    if (n["learning_rate"]) t.learning_rate = r.number(n["learning_rate"], "learning_rate");
    if (n["optimizer"])
        t.optimizer = r.parsed(n["optimizer"], "optimizer", [](const std::string& s) { return parse_optimizer(s); });
    if (const auto s = n["seeds"]) {
        if (!s.IsSequence()) r.fail(s, "seeds must be a list");
        t.seeds.clear();
        for (const auto& e : s) t.seeds.push_back(static_cast<std::uint64_t>(r.integer(e, "seeds", 0)));
    }
    if (n["early_stop_patience"]) t.early_stop_patience = r.count(n["early_stop_patience"], "early_stop_patience");
    if (n["class_weighting"]) t.class_weighting = r.scalar<bool>(n["class_weighting"], "class_weighting");
    if (n["time_lr_scale"]) t.time_lr_scale = r.number(n["time_lr_scale"], "time_lr_scale");
    try {
        t.validate();
    } catch (const ConfigError& e) {
        r.fail(n, e.what());
    }
}

}  // namespace detail

/// Parses a YAML document. `base_dir` anchors relative dataset paths.
inline ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>",
                                     const std::filesystem::path& base_dir = ".") {
    detail::YamlReader r(source);
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                          ": " + e.msg);
    }
    if (!root || root.IsNull()) throw ConfigError(source + ": configuration is empty");
    r.check_keys(root, "configuration",
                 {"name", "output_dir", "log_level", "data", "site", "prior", "split", "thresholds", "model",
                  "training", "evaluation"});
    ExperimentConfig c;
    c.source = source;
    if (root["name"]) c.name = r.scalar<std::string>(root["name"], "name");
    c.output_dir = "runs/" + c.name;
    if (root["output_dir"]) {
        c.output_dir = r.scalar<std::string>(root["output_dir"], "output_dir");
        if (c.output_dir.is_relative()) c.output_dir = base_dir / c.output_dir;
    }
    if (root["log_level"])
        c.log_level = r.parsed(root["log_level"], "log_level", [](const std::string& t) { return parse_log_level(t); });
    if (!root["data"]) r.fail(root, "missing required section 'data'");
    detail::read_data(r, root["data"], base_dir, c.data);
    if (const auto s = root["site"]) {
        r.check_keys(s, "site", {"latitude", "longitude"});
        if (s["latitude"]) c.prior.site.latitude = r.number(s["latitude"], "latitude");
        if (s["longitude"]) c.prior.site.longitude = r.number(s["longitude"], "longitude");
        if (std::abs(c.prior.site.latitude) > 90.0) r.fail(s, "latitude must lie in [-90, 90]");
        if (std::abs(c.prior.site.longitude) > 180.0) r.fail(s, "longitude must lie in [-180, 180]");
    }
    if (root["prior"]) detail::read_prior(r, root["prior"], c.prior);
    if (const auto s = root["split"]) {
        r.check_keys(s, "split", {"train", "validation"});
        if (s["train"]) c.split.train = r.number(s["train"], "train");
        if (s["validation"]) c.split.validation = r.number(s["validation"], "validation");
        if (!(c.split.train > 0.0) || c.split.validation < 0.0 || c.split.train + c.split.validation >= 1.0)
            r.fail(s, "split needs train > 0, validation >= 0 and train + validation < 1");
    }
    if (const auto t = root["thresholds"]) {
        r.check_keys(t, "thresholds", {"quantiles", "values"});
        if (t["quantiles"]) {
            c.thresholds.quantiles = r.numbers(t["quantiles"], "quantiles");
            for (double q : c.thresholds.quantiles)
                if (q <= 0.0 || q >= 1.0) r.fail(t["quantiles"], "quantiles must lie in (0, 1)");
        }
        if (t["values"]) c.thresholds.values = r.numbers(t["values"], "values");
        const auto& chk = c.thresholds.values.empty() ? c.thresholds.quantiles : c.thresholds.values;
        if (chk.size() + 1 != kNumClasses) r.fail(t, "need exactly 4 class boundaries");
        if (!std::is_sorted(chk.begin(), chk.end()) || std::adjacent_find(chk.begin(), chk.end()) != chk.end())
            r.fail(t, "class boundaries must ascend strictly");
    }
    if (root["model"]) detail::read_model(r, root["model"], c.model);
    if (root["training"]) detail::read_training(r, root["training"], c.training);
    if (const auto e = root["evaluation"]) {
        r.check_keys(e, "evaluation", {"daylight_only"});
        if (e["daylight_only"]) c.evaluation.daylight_only = r.scalar<bool>(e["daylight_only"], "daylight_only");
    }
    return c;
}

/// Environment overrides: TIMEREP_OUTPUT_DIR and TIMEREP_LOG_LEVEL.
inline void apply_env_overrides(ExperimentConfig& c) {
    if (const char* dir = std::getenv("TIMEREP_OUTPUT_DIR"); dir && *dir) c.output_dir = dir;
    if (const char* lvl = std::getenv("TIMEREP_LOG_LEVEL"); lvl && *lvl) {
        try {
            c.log_level = parse_log_level(lvl);
        } catch (const ArgumentError& e) {
            throw ConfigError(std::string("TIMEREP_LOG_LEVEL: ") + e.what());
        }
    }
}

inline ExperimentConfig load_config(const std::filesystem::path& path, bool env_overrides = true) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string() + ": cannot open configuration file");
    std::stringstream ss;
    ss << in.rdbuf();
    auto c = parse_config(ss.str(), path.string(), path.parent_path().empty() ? "." : path.parent_path());
    if (env_overrides) apply_env_overrides(c);
    return c;
}

}  // namespace timerep
