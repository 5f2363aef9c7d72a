#pragma once

// Command implementations behind the timerep CLI. Each command throws the
// library's error types; exit_code_for() maps them onto the process contract
// (0 success, 2 usage or configuration, 3 numerical failure).

#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "timerep/analysis.hpp"
#include "timerep/config.hpp"
#include "timerep/training.hpp"

namespace timerep {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

class Logger {
public:
    explicit Logger(LogLevel level = LogLevel::info, std::ostream* out = nullptr);
    void set_level(LogLevel level) { level_ = level; }
    LogLevel level() const { return level_; }
    void log(LogLevel level, const std::string& msg) const;
    void debug(const std::string& m) const { log(LogLevel::debug, m); }
    void info(const std::string& m) const { log(LogLevel::info, m); }
    void warn(const std::string& m) const { log(LogLevel::warn, m); }
    void error(const std::string& m) const { log(LogLevel::error, m); }

private:
    LogLevel level_;
    std::ostream* out_;
};

int exit_code_for(const std::exception& e);

struct PreparedData {
    DatasetSplit split;
    DataContext context;
    std::size_t total_rows = 0;
    std::size_t bad_rows = 0;
};

/// ingest -> clean -> hourly -> days -> split -> labels (or the synthetic generator).
PreparedData prepare_data(const ExperimentConfig& cfg, const Logger& log);

struct TrainOutcome {
    int exit_code = kExitOk;
    MultiSeedResult result;
    std::filesystem::path metrics_json;
};

/// Writes under cfg.output_dir: checkpoints/seed_<s>.{json,bin}, loss_curves.csv,
/// metrics.json, metrics.csv and splits/{train,validation,test}.csv.
TrainOutcome cmd_train(const ExperimentConfig& cfg, const Logger& log);

struct EvaluateOptions {
    std::filesystem::path checkpoint;
    std::filesystem::path data;  // processed split CSV
    std::filesystem::path out;   // prefix; writes <out>.json and <out>.csv
    bool daylight_only = false;
};

MetricReport cmd_evaluate(const EvaluateOptions& opt, const Logger& log);

struct EmbedOptions {
    std::string scheme;
    std::filesystem::path timestamps;  // CSV with a `timestamp` column
    std::filesystem::path out;
    std::optional<std::filesystem::path> checkpoint;  // required for learned schemes
    std::size_t head = 0;
    Site site{};
    PulsePeak peak = PulsePeak::solar_noon;
    int utc_offset_seconds = 0;
};

/// Number of embedded rows.
std::size_t cmd_embed(const EmbedOptions& opt, const Logger& log);

struct InspectOptions {
    std::filesystem::path checkpoint;
    std::filesystem::path data;  // processed split CSV (test days)
    std::filesystem::path out_dir;
    std::vector<CurveStage> stages{CurveStage::final};
    std::vector<CurveRole> roles{CurveRole::key};
    std::size_t head = 0;
    double threshold = 0.15;
    std::size_t dense_points = 0;
};

struct InspectOutcome {
    std::vector<FeatureCurve> curves;
    std::vector<GroupingResult> groups;
    MagnitudeReport magnitude;
};

/// Writes curves.csv, groups_<role>_<stage>.json, magnitude.json and daylight_fit.json.
InspectOutcome cmd_inspect_features(const InspectOptions& opt, const Logger& log);

/// Writes the raw-reading CSV for the configured synthetic world.
std::size_t cmd_gen_synthetic(const SyntheticConfig& cfg, const std::filesystem::path& out, const Logger& log);

}  // namespace timerep
