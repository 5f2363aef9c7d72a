#include "timerep/commands.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "timerep/checkpoint.hpp"

namespace timerep {

namespace fs = std::filesystem;

Logger::Logger(LogLevel level, std::ostream* out) : level_(level), out_(out ? out : &std::cerr) {}

void Logger::log(LogLevel level, const std::string& msg) const {
    if (static_cast<int>(level) < static_cast<int>(level_)) return;
    *out_ << "[" << to_string(level) << "] " << msg << '\n';
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const DivergenceError*>(&e)) return kExitNumerical;
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ArgumentError*>(&e) ||
        dynamic_cast<const RangeError*>(&e) || dynamic_cast<const UnsupportedError*>(&e) ||
        dynamic_cast<const DataError*>(&e) || dynamic_cast<const EmptyInputError*>(&e))
        return kExitUsage;
    return kExitInternal;
}

namespace {

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    return out;
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read '" + path.string() + "'");
    return in;
}

void write_split(const fs::path& path, std::span<const SeriesSample> samples) {
    auto out = open_out(path);
    write_split_csv(out, samples);
}

std::vector<SeriesSample> read_split(const fs::path& path, const Checkpoint& ck) {
    auto in = open_in(path);
    return read_split_csv(in, ck.context.utc_offset_seconds, ck.model.config().n_classes);
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& cfg, const Logger& log) {
    PreparedData d;
    std::vector<SeriesSample> samples;
    std::vector<double> thresholds = cfg.thresholds.values;
    const int offset = cfg.utc_offset_seconds();
    if (cfg.data.source == DataSource::synthetic) {
        samples = generate_synthetic(cfg.data.synthetic);
        if (thresholds.empty())
            thresholds = cfg.data.synthetic.thresholds;
        else
            label_samples(samples, thresholds);
        log.info("generated " + std::to_string(samples.size()) + " synthetic days");
    } else {
        std::vector<RawReading> readings;
        for (const auto& path : cfg.data.paths) {
            auto r = ingest_csv(path.string(), cfg.data.schema);
            d.total_rows += r.total_rows;
            d.bad_rows += r.bad_rows;
            log.info("read " + std::to_string(r.readings.size()) + " readings from " + path.string() + " (" +
                     std::to_string(r.bad_rows) + " malformed rows skipped)");
            readings.insert(readings.end(), r.readings.begin(), r.readings.end());
        }
        const auto cleaned = clean(readings, cfg.data.ranges);
        const auto hourly = aggregate_hourly(cleaned);
        samples = assemble_days(hourly, offset, cfg.data.max_missing_hours);
        log.info("assembled " + std::to_string(samples.size()) + " days from " + std::to_string(hourly.size()) +
                 " hourly records");
    }
    d.split = split_by_date(std::move(samples), cfg.split);
    if (cfg.data.source == DataSource::csv) {
        if (thresholds.empty()) thresholds = derive_thresholds(d.split.train, cfg.thresholds.quantiles);
        label_samples(d.split.train, thresholds);
        label_samples(d.split.validation, thresholds);
        label_samples(d.split.test, thresholds);
    }
    if (d.split.test.empty()) throw DataError("split left no test days; add data or lower the train/validation fractions");
    d.context = make_context(d.split, offset, cfg.prior, thresholds);
    log.info("split: " + std::to_string(d.split.train.size()) + " train / " +
             std::to_string(d.split.validation.size()) + " validation / " + std::to_string(d.split.test.size()) +
             " test days");
    return d;
}

TrainOutcome cmd_train(const ExperimentConfig& cfg, const Logger& log) {
    const PreparedData data = prepare_data(cfg, log);
    const fs::path dir = cfg.output_dir;
    fs::create_directories(dir / "checkpoints");
    write_split(dir / "splits" / "train.csv", data.split.train);
    write_split(dir / "splits" / "validation.csv", data.split.validation);
    write_split(dir / "splits" / "test.csv", data.split.test);

    std::vector<EpochLog> epochs;
    auto on_epoch = [&](const EpochLog& e) {
        epochs.push_back(e);
        log.debug("seed " + std::to_string(e.seed) + " epoch " + std::to_string(e.epoch + 1) + " loss " +
                  format_number(e.train_loss) + " validation " + format_number(e.validation_loss));
    };
    const std::string scheme(to_string(cfg.model.scheme));
    log.info("training " + scheme + " for " + std::to_string(cfg.training.epochs) + " epochs over " +
             std::to_string(cfg.training.seeds.size()) + " seed(s)");

    TrainOutcome out;
    out.result = cfg.training.seeds.size() >= 2
                     ? run_multiseed(cfg.model, cfg.training, data.context, data.split, cfg.evaluation, on_epoch)
                     : run_seeds(cfg.model, cfg.training, data.context, data.split, cfg.evaluation, on_epoch);

    bool diverged = false;
    for (const auto& o : out.result.outcomes) {
        if (o.result) {
            Checkpoint ck{o.result->model, data.context, o.result->initial_time, {}};
            ck.info = {{"experiment", cfg.name},
                       {"seed", o.seed},
                       {"best_epoch", o.result->best_epoch + 1},
                       {"epochs", cfg.training.epochs}};
            save_checkpoint((dir / "checkpoints" / ("seed_" + std::to_string(o.seed))).string(), ck);
        } else if (o.diverged) {
            diverged = true;
            log.error(o.failure);
        } else {
            log.warn("seed " + std::to_string(o.seed) + " failed: " + o.failure);
        }
    }

    {
        auto csv = open_out(dir / "loss_curves.csv");
        csv << "epoch,normalized_loss,seed,train_loss,validation_loss\n";
        for (const auto& e : epochs)
            csv << e.epoch + 1 << ',' << format_number(e.normalized_loss) << ',' << e.seed << ','
                << format_number(e.train_loss) << ',' << format_number(e.validation_loss) << '\n';
    }
    out.metrics_json = dir / "metrics.json";
    {
        auto js = open_out(out.metrics_json);
        js << aggregate_to_json(out.result.aggregate, scheme);
    }
    {
        auto csv = open_out(dir / "metrics.csv");
        write_table_csv(csv, {{scheme, out.result.aggregate}});
    }

    const auto& agg = out.result.aggregate;
    if (auto it = agg.stats.find("f1_micro"); it != agg.stats.end())
        log.info("micro F1 " + format_number(it->second.mean) + " +/- " + format_number(it->second.std) + " over " +
                 std::to_string(agg.n_succeeded) + " run(s)");
    if (diverged)
        out.exit_code = kExitNumerical;
    else if (agg.n_succeeded == 0)
        out.exit_code = kExitUsage;
    return out;
}

MetricReport cmd_evaluate(const EvaluateOptions& opt, const Logger& log) {
    const Checkpoint ck = load_checkpoint(opt.checkpoint.string());
    const auto samples = read_split(opt.data, ck);
    if (ck.model.config().n_features != feature_names().size())
        throw DimensionError("checkpoint expects " + std::to_string(ck.model.config().n_features) +
                             " input features, data provides " + std::to_string(feature_names().size()));
    const MetricReport rep = evaluate(ck.model, ck.context, samples, {opt.daylight_only});
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(report_to_json(rep).dump());
    j["daylight_only"] = opt.daylight_only;
    j["scheme"] = std::string(to_string(ck.model.config().scheme));
    fs::path json_path = opt.out;
    json_path += ".json";
    fs::path csv_path = opt.out;
    csv_path += ".csv";
    write_json(json_path, j);
    auto csv = open_out(csv_path);
    write_report_csv(csv, rep, std::string(to_string(ck.model.config().scheme)));
    log.info("evaluated " + std::to_string(rep.total) + " hours; micro F1 " + format_number(rep.micro.f1));
    return rep;
}

std::size_t cmd_embed(const EmbedOptions& opt, const Logger& log) {
    const TimeScheme scheme = parse_scheme(opt.scheme);
    std::vector<std::string> stamps;
    {
        auto in = open_in(opt.timestamps);
        std::string line;
        if (std::getline(in, line)) {
            const auto header = detail::split_csv_line(line);
            const std::size_t col = detail::column_index(header, "timestamp");
            std::size_t line_no = 1;
            while (std::getline(in, line)) {
                ++line_no;
                if (detail::trim(line).empty()) continue;
                const auto f = detail::split_csv_line(line);
                if (f.size() <= col) throw DataError("timestamps line " + std::to_string(line_no) + ": missing field");
                stamps.emplace_back(detail::trim(f[col]));
            }
        }
    }
    std::vector<TimePoint> points;
    for (std::size_t i = 0; i < stamps.size(); ++i) {
        auto secs = parse_iso8601(stamps[i], opt.utc_offset_seconds);
        if (!secs) throw DataError("timestamps row " + std::to_string(i + 1) + ": cannot parse '" + stamps[i] + "'");
        points.push_back(make_time_point(*secs, opt.utc_offset_seconds));
    }

    std::ostringstream out;
    out.precision(17);
    if (is_learned(scheme)) {
        if (!opt.checkpoint) throw ConfigError("embedding a learned scheme needs --checkpoint");
        const Checkpoint ck = load_checkpoint(opt.checkpoint->string());
        if (ck.model.config().scheme != scheme)
            throw ConfigError("checkpoint holds scheme '" + std::string(to_string(ck.model.config().scheme)) +
                              "', not '" + opt.scheme + "'");
        const TimeLayer layer = time_layer(ck, CurveStage::final, opt.head);
        out << "timestamp";
        for (std::size_t i = 0; i < layer.params.d(); ++i) out << ",phi_" << i;
        out << '\n';
        for (std::size_t r = 0; r < points.size(); ++r) {
            const auto norm = ck.model.config().time_normalization;
            if (norm == TimeNormalization::unix_range &&
                (points[r].unix_seconds < ck.context.range_start || points[r].unix_seconds > ck.context.range_end))
                throw RangeError("timestamp '" + stamps[r] + "' lies outside the checkpoint's training time range " +
                                 format_iso8601(make_time_point(ck.context.range_start, 0)) + " .. " +
                                 format_iso8601(make_time_point(ck.context.range_end, 0)));
            const double t = key_time(points[r], norm, ck.context);
            out << stamps[r];
            for (double v : evaluate_time_embedding(t, layer.params, layer.activation, layer.pulse)) out << ',' << v;
            out << '\n';
        }
    } else {
        out << "timestamp";
        for (const auto& name : prior_feature_names(scheme)) out << ',' << name;
        out << '\n';
        if (!points.empty()) {
            std::int64_t lo = points[0].unix_seconds, hi = lo;
            for (const auto& p : points) {
                lo = std::min(lo, p.unix_seconds);
                hi = std::max(hi, p.unix_seconds);
            }
            if (hi == lo) ++hi;
            PriorEmbeddingOptions popt;
            popt.site = opt.site;
            popt.peak = opt.peak;
            const auto emb = embed_series(normalize_unix(points, lo, hi), scheme, popt);
            for (std::size_t r = 0; r < points.size(); ++r) {
                out << stamps[r];
                for (double v : emb[r].values) out << ',' << v;
                out << '\n';
            }
        }
    }
    auto file = open_out(opt.out);
    file << out.str();
    log.info("embedded " + std::to_string(points.size()) + " timestamps with " + opt.scheme);
    return points.size();
}

InspectOutcome cmd_inspect_features(const InspectOptions& opt, const Logger& log) {
    const Checkpoint ck = load_checkpoint(opt.checkpoint.string());
    if (!ck.model.config().learned())
        throw UnsupportedError("unsupported scheme '" + std::string(to_string(ck.model.config().scheme)) +
                               "': feature inspection needs a learned time scheme");
    const auto samples = read_split(opt.data, ck);
    InspectOutcome res;
    fs::create_directories(opt.out_dir);
    CurveOptions copt{opt.head, opt.dense_points};
    for (CurveRole role : opt.roles)
        for (CurveStage stage : opt.stages) {
            auto curves = extract_feature_curves(ck, samples, role, stage, copt);
            std::vector<FeatureCurve> periodic(curves.begin() + 1, curves.end());
            auto groups = group_by_similarity(periodic, opt.threshold);
            write_json(opt.out_dir / ("groups_" + std::string(to_string(role)) + "_" + std::string(to_string(stage)) +
                                      ".json"),
                       grouping_to_json(groups));
            log.info(std::string(to_string(role)) + "/" + std::string(to_string(stage)) + ": " +
                     std::to_string(curves.size()) + " curves, " + std::to_string(groups.groups.size()) +
                     " groups of periodic features");
            res.curves.insert(res.curves.end(), curves.begin(), curves.end());
            res.groups.push_back(std::move(groups));
        }
    {
        auto csv = open_out(opt.out_dir / "curves.csv");
        write_curves_csv(csv, res.curves);
    }
    res.magnitude = key_query_magnitude_report(ck, samples);
    write_json(opt.out_dir / "magnitude.json", magnitude_report_to_json(res.magnitude));
    log.info("key span growth " + format_number(res.magnitude.key_growth) + ", query span growth " +
             format_number(res.magnitude.query_growth));
    try {
        const auto means = hourly_feature_means(samples, 0);
        nlohmann::ordered_json fits;
        fits["hourly_means"] = means;
        fits["sine"] = daylight_fit_to_json(fit_daylight_curve(means, CurveFamily::sine));
        fits["triangular"] = daylight_fit_to_json(fit_daylight_curve(means, CurveFamily::triangular));
        write_json(opt.out_dir / "daylight_fit.json", fits);
    } catch (const EmptyInputError& e) {
        log.warn(std::string("daylight fit skipped: ") + e.what());
    }
    return res;
}

std::size_t cmd_gen_synthetic(const SyntheticConfig& cfg, const fs::path& out_path, const Logger& log) {
    const auto days = generate_synthetic(cfg);
    auto out = open_out(out_path);
    write_raw_csv(out, days);
    std::size_t rows = 0;
    for (const auto& d : days) rows += d.observed();
    log.info("wrote " + std::to_string(days.size()) + " days (" + std::to_string(rows) + " hourly rows) to " +
             out_path.string());
    return rows;
}

}  // namespace timerep
