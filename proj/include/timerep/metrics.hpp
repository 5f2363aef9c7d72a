#pragma once

// Multiclass classification metrics from a confusion matrix, and their
// aggregation across seeds.
//
// Conventions:
//   - confusion(t, p) counts hours with truth t predicted as p
//   - a class's precision (recall) is 0 when it was never predicted (never true)
//   - macro averages run over classes that occur in truth or prediction
//   - weighted averages use true support, so absent classes drop out

#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "timerep/errors.hpp"

namespace timerep {

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t support = 0;
    std::int64_t predicted = 0;
};

struct AveragedMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct MetricReport {
    std::vector<std::vector<std::int64_t>> confusion;
    std::vector<ClassMetrics> per_class;
    AveragedMetrics micro;
    AveragedMetrics macro;
    AveragedMetrics weighted;
    std::int64_t total = 0;

    std::size_t n_classes() const { return confusion.size(); }
};

/// Names of the nine summary metrics, in table order.
inline const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names{
        "precision_micro", "recall_micro",  "f1_micro",    "precision_macro", "recall_macro",
        "f1_macro",        "precision_weighted", "recall_weighted", "f1_weighted"};
    return names;
}

inline const std::vector<std::string>& metric_labels() {
    static const std::vector<std::string> labels{
        "Precision (Micro)",    "Recall (Micro)",    "F-score (Micro)",
        "Precision (Macro)",    "Recall (Macro)",    "F-score (Macro)",
        "Precision (Weighted)", "Recall (Weighted)", "F-score (Weighted)"};
    return labels;
}

inline std::array<double, 9> summary_values(const MetricReport& r) {
    return {r.micro.precision, r.micro.recall, r.micro.f1,  r.macro.precision, r.macro.recall,
            r.macro.f1,        r.weighted.precision, r.weighted.recall, r.weighted.f1};
}

namespace detail {

inline double safe_div(double a, double b) { return b > 0.0 ? a / b : 0.0; }

inline double f1_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace detail

inline MetricReport report_from_confusion(std::vector<std::vector<std::int64_t>> confusion) {
    const std::size_t k = confusion.size();
    for (const auto& row : confusion) {
        if (row.size() != k) throw DimensionError("confusion matrix must be square");
        for (auto v : row)
            if (v < 0) throw ArgumentError("confusion entries must be non-negative");
    }
    MetricReport r;
    r.confusion = std::move(confusion);
    r.per_class.resize(k);
    std::int64_t correct = 0;
    for (std::size_t t = 0; t < k; ++t)
        for (std::size_t p = 0; p < k; ++p) {
            r.total += r.confusion[t][p];
            r.per_class[t].support += r.confusion[t][p];
            r.per_class[p].predicted += r.confusion[t][p];
            if (t == p) correct += r.confusion[t][p];
        }
    if (r.total == 0) throw EmptyInputError("no labeled hours to evaluate");

    std::size_t present = 0;
    for (std::size_t c = 0; c < k; ++c) {
        ClassMetrics& m = r.per_class[c];
        const auto tp = static_cast<double>(r.confusion[c][c]);
        m.precision = detail::safe_div(tp, static_cast<double>(m.predicted));
        m.recall = detail::safe_div(tp, static_cast<double>(m.support));
        m.f1 = detail::f1_of(m.precision, m.recall);
        const double w = static_cast<double>(m.support);
        r.weighted.precision += w * m.precision;
        r.weighted.recall += w * m.recall;
        r.weighted.f1 += w * m.f1;
        if (m.support > 0 || m.predicted > 0) {
            ++present;
            r.macro.precision += m.precision;
            r.macro.recall += m.recall;
            r.macro.f1 += m.f1;
        }
    }
    const auto total = static_cast<double>(r.total);
    r.weighted.precision /= total;
    r.weighted.recall /= total;
    r.weighted.f1 /= total;
    r.macro.precision /= static_cast<double>(present);
    r.macro.recall /= static_cast<double>(present);
    r.macro.f1 /= static_cast<double>(present);
    // Single-label: every error is one false positive and one false negative.
    const double acc = static_cast<double>(correct) / static_cast<double>(r.total);
    r.micro = {acc, acc, acc};
    return r;
}

/// Metrics over paired truth/prediction labels. Pairs with truth < 0 are skipped.
inline MetricReport compute_metrics(std::span<const int> truth, std::span<const int> predicted,
                                    std::size_t n_classes) {
    if (truth.size() != predicted.size())
        throw DimensionError("compute_metrics: truth and prediction lengths differ");
    std::vector<std::vector<std::int64_t>> cm(n_classes, std::vector<std::int64_t>(n_classes, 0));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0) continue;
        const auto t = static_cast<std::size_t>(truth[i]);
        const auto p = static_cast<std::size_t>(predicted[i]);
        if (t >= n_classes || predicted[i] < 0 || p >= n_classes)
            throw RangeError("compute_metrics: class id out of range");
        ++cm[t][p];
    }
    return report_from_confusion(std::move(cm));
}

inline nlohmann::json report_to_json(const MetricReport& r) {
    nlohmann::ordered_json j;
    const auto vals = summary_values(r);
    for (std::size_t i = 0; i < vals.size(); ++i) j[metric_names()[i]] = vals[i];
    j["total"] = r.total;
    j["confusion"] = r.confusion;
    nlohmann::ordered_json pc = nlohmann::ordered_json::array();
    for (const auto& c : r.per_class)
        pc.push_back({{"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1},
                      {"support", c.support}});
    j["per_class"] = pc;
    return nlohmann::json::parse(j.dump());
}

struct MetricStat {
    double mean = 0.0;
    double std = 0.0;
};

struct SeedRun {
    std::uint64_t seed = 0;
    std::optional<MetricReport> report;  // empty when the run failed
    std::string failure;
};

struct SeedAggregate {
    std::vector<SeedRun> runs;
    std::map<std::string, MetricStat> stats;  // over successful runs
    std::size_t n_succeeded = 0;

    bool partial() const { return n_succeeded != runs.size(); }
};

/// Mean and sample standard deviation (n - 1) per metric; a single
/// successful run has std 0.
inline SeedAggregate aggregate_runs(std::vector<SeedRun> runs) {
    SeedAggregate agg;
    agg.runs = std::move(runs);
    std::vector<std::array<double, 9>> vals;
    for (const auto& r : agg.runs)
        if (r.report) vals.push_back(summary_values(*r.report));
    agg.n_succeeded = vals.size();
    if (vals.empty()) return agg;
    const double n = static_cast<double>(vals.size());
    for (std::size_t m = 0; m < 9; ++m) {
        double mean = 0.0;
        for (const auto& v : vals) mean += v[m];
        mean /= n;
        double ss = 0.0;
        for (const auto& v : vals) ss += (v[m] - mean) * (v[m] - mean);
        agg.stats[metric_names()[m]] = {mean, vals.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
    }
    return agg;
}

/// Deterministic JSON document: fixed key order, shortest round-trip number formatting.
inline std::string aggregate_to_json(const SeedAggregate& agg, const std::string& scheme) {
    nlohmann::ordered_json j;
    j["scheme"] = scheme;
    j["n_runs"] = agg.runs.size();
    j["n_succeeded"] = agg.n_succeeded;
    j["partial"] = agg.partial();
    nlohmann::ordered_json summary;
    for (const auto& name : metric_names()) {
        auto it = agg.stats.find(name);
        if (it == agg.stats.end()) continue;
        summary[name] = {{"mean", it->second.mean}, {"std", it->second.std}};
    }
    j["summary"] = summary;
    nlohmann::ordered_json runs = nlohmann::ordered_json::array();
    for (const auto& r : agg.runs) {
        nlohmann::ordered_json rj;
        rj["seed"] = r.seed;
        if (r.report) {
            rj["status"] = "ok";
            rj["metrics"] = nlohmann::ordered_json::parse(report_to_json(*r.report).dump());
        } else {
            rj["status"] = "failed";
            rj["failure"] = r.failure;
        }
        runs.push_back(rj);
    }
    j["runs"] = runs;
    return j.dump(2) + "\n";
}

inline std::string format_number(double v) {
    std::ostringstream ss;
    ss << std::setprecision(17) << v;
    return ss.str();
}

/// One row per metric, `mean` and `std` columns per scheme.
inline void write_table_csv(std::ostream& out,
                            const std::vector<std::pair<std::string, SeedAggregate>>& columns) {
    out << "metric";
    for (const auto& [scheme, agg] : columns) out << ',' << scheme << "_mean," << scheme << "_std";
    out << '\n';
    for (std::size_t m = 0; m < metric_names().size(); ++m) {
        out << metric_labels()[m];
        for (const auto& [scheme, agg] : columns) {
            auto it = agg.stats.find(metric_names()[m]);
            if (it == agg.stats.end())
                out << ",,";
            else
                out << ',' << format_number(it->second.mean) << ',' << format_number(it->second.std);
        }
        out << '\n';
    }
}

/// Single-report variant of the table (std column 0).
inline void write_report_csv(std::ostream& out, const MetricReport& r, const std::string& column) {
    out << "metric," << column << '\n';
    const auto vals = summary_values(r);
    for (std::size_t m = 0; m < vals.size(); ++m)
        out << metric_labels()[m] << ',' << format_number(vals[m]) << '\n';
}

}  // namespace timerep
