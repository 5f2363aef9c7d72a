#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "timerep/commands.hpp"

using namespace timerep;

namespace {

LogLevel env_level(LogLevel fallback) {
    if (const char* v = std::getenv("TIMEREP_LOG_LEVEL"); v && *v) return parse_log_level(v);
    return fallback;
}

template <class T, class F>
std::vector<T> expand(const std::string& s, std::initializer_list<T> both, F parse) {
    if (s == "both") return both;
    return {parse(s)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"timerep: time representations for attention-based irradiance classification"};
    app.require_subcommand(1);
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "debug, info, warn or error (TIMEREP_LOG_LEVEL overrides)")
        ->check(CLI::IsMember({"debug", "info", "warn", "error"}));

    auto* train = app.add_subcommand("train", "Train one model per seed from a YAML experiment config");
    std::string config_path;
    train->add_option("-c,--config", config_path, "Experiment config file")->required();

    auto* eval = app.add_subcommand("evaluate", "Score a checkpoint on a processed split CSV");
    EvaluateOptions ev;
    eval->add_option("--checkpoint", ev.checkpoint, "Checkpoint prefix or .json path")->required();
    eval->add_option("--data", ev.data, "Split CSV written by train (splits/test.csv)")->required();
    eval->add_option("--out", ev.out, "Output prefix; writes <out>.json and <out>.csv")->required();
    eval->add_flag("--daylight-only", ev.daylight_only, "Score only hours with nonzero irradiance");

    auto* embed = app.add_subcommand("embed", "Embed timestamps with a prior or learned time scheme");
    EmbedOptions em;
    double offset_hours = 0.0;
    std::string peak = "solar_noon";
    embed->add_option("--scheme", em.scheme, "Time scheme name")->required();
    embed->add_option("--timestamps", em.timestamps, "CSV with a timestamp column (ISO-8601)")->required();
    embed->add_option("--out", em.out, "Output CSV")->required();
    embed->add_option("--checkpoint", em.checkpoint, "Checkpoint for learned schemes");
    embed->add_option("--head", em.head, "Attention head whose time parameters are used")->capture_default_str();
    embed->add_option("--lat", em.site.latitude, "Site latitude in degrees")->capture_default_str();
    embed->add_option("--lon", em.site.longitude, "Site longitude in degrees")->capture_default_str();
    embed->add_option("--peak", peak, "Pulse peak: solar_noon or clock_noon")
        ->check(CLI::IsMember({"solar_noon", "clock_noon"}))
        ->capture_default_str();
    embed->add_option("--utc-offset-hours", offset_hours, "Offset for timestamps without a zone")
        ->capture_default_str();

    auto* inspect = app.add_subcommand("inspect-features", "Dump learned time feature curves, groups and spans");
    InspectOptions in;
    std::string stage = "final", role = "key";
    inspect->add_option("--checkpoint", in.checkpoint, "Checkpoint of a learned scheme")->required();
    inspect->add_option("--data", in.data, "Split CSV supplying key timestamps")->required();
    inspect->add_option("--out-dir", in.out_dir, "Output directory")->required();
    inspect->add_option("--stage", stage, "initial, final or both")
        ->check(CLI::IsMember({"initial", "final", "both"}))
        ->capture_default_str();
    inspect->add_option("--role", role, "key, query or both")
        ->check(CLI::IsMember({"key", "query", "both"}))
        ->capture_default_str();
    inspect->add_option("--head", in.head, "Attention head")->capture_default_str();
    inspect->add_option("--threshold", in.threshold, "Grouping distance threshold on 1-|r|")->capture_default_str();
    inspect->add_option("--dense", in.dense_points, "Query sweep points over one day (0 = reference grid)")
        ->capture_default_str();

    auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic raw-reading CSV");
    SyntheticConfig sc;
    std::string profile = "triangular", start = "2023-01-01";
    std::string gen_out;
    gen->add_option("--days", sc.days, "Number of days")->capture_default_str();
    gen->add_option("--profile", profile, "triangular or sine")
        ->check(CLI::IsMember({"triangular", "sine"}))
        ->capture_default_str();
    gen->add_option("--seed", sc.seed, "Noise seed")->capture_default_str();
    gen->add_option("--noise", sc.noise, "Noise std relative to peak irradiance")->capture_default_str();
    gen->add_option("--gap-fraction", sc.gap_fraction, "Fraction of hours dropped")->capture_default_str();
    gen->add_option("--start", start, "First day, YYYY-MM-DD")->capture_default_str();
    gen->add_option("--utc-offset-hours", offset_hours, "Local offset of the generated site")->capture_default_str();
    gen->add_option("--out", gen_out, "Output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    Logger log(env_level(parse_log_level(log_level)));
    try {
        if (*train) {
            const ExperimentConfig cfg = load_config(config_path);
            log.set_level(cfg.log_level);
            return cmd_train(cfg, log).exit_code;
        }
        if (*eval) {
            cmd_evaluate(ev, log);
        } else if (*embed) {
            em.peak = peak == "clock_noon" ? PulsePeak::clock_noon : PulsePeak::solar_noon;
            em.utc_offset_seconds = static_cast<int>(std::lround(offset_hours * 3600.0));
            cmd_embed(em, log);
        } else if (*inspect) {
            in.stages = expand(stage, {CurveStage::initial, CurveStage::final}, parse_stage);
            in.roles = expand(role, {CurveRole::key, CurveRole::query}, parse_role);
            cmd_inspect_features(in, log);
        } else if (*gen) {
            sc.profile = parse_profile(profile);
            auto d = parse_date(start);
            if (!d) throw ArgumentError("--start: expected YYYY-MM-DD, got '" + start + "'");
            sc.start = *d;
            sc.utc_offset_seconds = static_cast<int>(std::lround(offset_hours * 3600.0));
            cmd_gen_synthetic(sc, gen_out, log);
        }
        return kExitOk;
    } catch (const std::exception& e) {
        log.error(e.what());
        return exit_code_for(e);
    }
}
