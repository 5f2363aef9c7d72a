#pragma once

// Inspection of learned time representations: per-feature curves over the
// hour grid, correlation grouping, key/query span report, and parametric
// fits of a mean daily curve.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <nlohmann/json.hpp>

#include "timerep/checkpoint.hpp"
#include "timerep/data.hpp"
#include "timerep/errors.hpp"
#include "timerep/learned_embeddings.hpp"
#include "timerep/metrics.hpp"
#include "timerep/model.hpp"

namespace timerep {

enum class CurveRole { key, query };
enum class CurveStage { initial, final };

inline std::string_view to_string(CurveRole r) { return r == CurveRole::key ? "key" : "query"; }
inline std::string_view to_string(CurveStage s) { return s == CurveStage::initial ? "initial" : "final"; }

inline CurveRole parse_role(std::string_view s) {
    if (s == "key") return CurveRole::key;
    if (s == "query") return CurveRole::query;
    throw ArgumentError("unknown role '" + std::string(s) + "' (expected key or query)");
}

inline CurveStage parse_stage(std::string_view s) {
    if (s == "initial") return CurveStage::initial;
    if (s == "final") return CurveStage::final;
    throw ArgumentError("unknown stage '" + std::string(s) + "' (expected initial or final)");
}

struct FeatureCurve {
    std::size_t feature_index = 0;
    std::size_t head = 0;
    CurveRole role = CurveRole::key;
    CurveStage stage = CurveStage::final;
    std::vector<double> hours;
    std::vector<double> mean;
    std::vector<double> std;
};

struct CurveOptions {
    std::size_t head = 0;
    std::size_t dense_points = 0;  // query role only: evaluate this many evenly spaced grid positions
};

/// Everything needed to evaluate one head's time embedding outside a model.
struct TimeLayer {
    TimeEmbeddingParams params;
    TimeActivation activation = TimeActivation::sine;
    PulseTransformSpec pulse{};
};

namespace detail {

inline void require_learned(const Checkpoint& ck) {
    if (!ck.model.config().learned())
        throw UnsupportedError(std::string("unsupported scheme '") + std::string(to_string(ck.model.config().scheme)) +
                               "': feature inspection needs a learned time scheme");
}

inline std::vector<TimeEmbeddingParams> stage_params(const Checkpoint& ck, CurveStage stage) {
    if (stage == CurveStage::final) return ck.model.time_params();
    if (!ck.initial_time) throw UnsupportedError("checkpoint has no initial time parameters");
    return *ck.initial_time;
}

/// Sorted before summing, so the result does not depend on sample order.
inline std::pair<double, double> mean_std(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / n)};
}

inline double query_grid_time(double index, std::size_t size, TimeNormalization norm) {
    if (norm == TimeNormalization::hour_index) return index / static_cast<double>(size);
    return size > 1 ? index / static_cast<double>(size - 1) : 0.0;
}

}  // namespace detail

inline TimeLayer time_layer(const Checkpoint& ck, CurveStage stage, std::size_t head) {
    detail::require_learned(ck);
    const auto heads = detail::stage_params(ck, stage);
    if (head >= heads.size()) throw RangeError("head " + std::to_string(head) + " out of range");
    return {heads[head], ck.model.time_activation(), ck.model.config().pulse};
}

/// Curves from explicit evaluation times. `times[s][h]` is sample s at grid
/// position h; every sample must cover all of `hours`.
inline std::vector<FeatureCurve> feature_curves(const TimeLayer& layer, std::span<const std::vector<double>> times,
                                                std::span<const double> hours, CurveRole role, CurveStage stage,
                                                std::size_t head = 0) {
    if (times.empty()) throw EmptyInputError("feature_curves: no samples");
    const std::size_t d = layer.params.d();
    const std::size_t n_hours = hours.size();
    // values[i][h] collects feature i at position h across samples
    std::vector<std::vector<std::vector<double>>> values(d, std::vector<std::vector<double>>(n_hours));
    for (const auto& row : times) {
        if (row.size() != n_hours) throw DimensionError("feature_curves: sample does not cover the grid");
        for (std::size_t h = 0; h < n_hours; ++h) {
            const auto e = evaluate_time_embedding(row[h], layer.params, layer.activation, layer.pulse);
            for (std::size_t i = 0; i < d; ++i) values[i][h].push_back(e[i]);
        }
    }
    std::vector<FeatureCurve> out(d);
    for (std::size_t i = 0; i < d; ++i) {
        FeatureCurve& c = out[i];
        c.feature_index = i;
        c.head = head;
        c.role = role;
        c.stage = stage;
        c.hours.assign(hours.begin(), hours.end());
        for (std::size_t h = 0; h < n_hours; ++h) {
            const auto [m, s] = detail::mean_std(std::move(values[i][h]));
            c.mean.push_back(m);
            c.std.push_back(s);
        }
    }
    return out;
}

/// Key role: each sample's slot times (all slots, observed or not). Query
/// role: the model's reference grid, identical for every sample.
inline std::vector<FeatureCurve> extract_feature_curves(const Checkpoint& ck, std::span<const SeriesSample> samples,
                                                        CurveRole role, CurveStage stage,
                                                        const CurveOptions& opt = {}) {
    const TimeLayer layer = time_layer(ck, stage, opt.head);
    const ModelConfig& cfg = ck.model.config();
    std::vector<std::vector<double>> times;
    std::vector<double> hours;
    if (role == CurveRole::key) {
        if (samples.empty()) throw EmptyInputError("extract_feature_curves: no test samples");
        for (std::size_t h = 0; h < kHoursPerDay; ++h) hours.push_back(static_cast<double>(h));
        for (const auto& s : samples) {
            if (s.time_points.size() != kHoursPerDay)
                throw DimensionError("extract_feature_curves: sample is not a 24-slot day");
            std::vector<double> row;
            for (const auto& tp : s.time_points) row.push_back(key_time(tp, cfg.time_normalization, ck.context));
            times.push_back(std::move(row));
        }
    } else {
        const std::size_t g = cfg.time_grid;
        const double hours_per_step = static_cast<double>(kHoursPerDay) / static_cast<double>(g);
        std::vector<double> row;
        if (opt.dense_points > 1) {
            const double last = static_cast<double>(g - 1);
            for (std::size_t k = 0; k < opt.dense_points; ++k) {
                const double idx = last * static_cast<double>(k) / static_cast<double>(opt.dense_points - 1);
                hours.push_back(idx * hours_per_step);
                row.push_back(detail::query_grid_time(idx, g, cfg.time_normalization));
            }
        } else {
            const Matrix grid = reference_grid(g, cfg.time_normalization);
            for (std::size_t j = 0; j < g; ++j) {
                hours.push_back(static_cast<double>(j) * hours_per_step);
                row.push_back(grid(j, 0));
            }
        }
        times.push_back(std::move(row));
    }
    return feature_curves(layer, times, hours, role, stage, opt.head);
}

inline void write_curves_csv(std::ostream& out, std::span<const FeatureCurve> curves) {
    out << "feature_index,role,stage,hour,mean,std\n";
    for (const auto& c : curves)
        for (std::size_t h = 0; h < c.hours.size(); ++h)
            out << c.feature_index << ',' << to_string(c.role) << ',' << to_string(c.stage) << ','
                << format_number(c.hours[h]) << ',' << format_number(c.mean[h]) << ',' << format_number(c.std[h])
                << '\n';
}

// ---------------------------------------------------------------- grouping

struct FeatureGroup {
    std::vector<std::size_t> members;   // feature indices, ascending
    std::vector<double> representative; // sign-aligned mean of the member curves
    std::optional<double> cohesion;     // mean pairwise |r|; empty for a constant curve
};

struct GroupingResult {
    double threshold = 0.15;
    std::vector<FeatureGroup> groups;  // ordered by lowest member
};

/// Pearson correlation; nullopt when either input is constant.
inline std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) throw DimensionError("pearson: length mismatch");
    auto flat = [](std::span<const double> v) { return std::ranges::min(v) == std::ranges::max(v); };
    if (flat(a) || flat(b)) return std::nullopt;
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return std::nullopt;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

/// Single-linkage clustering on 1 - |r| between mean curves, cut at `threshold`
/// (pairs at distance <= threshold are linked). Constant curves stay alone.
inline GroupingResult group_by_similarity(std::span<const FeatureCurve> curves, double threshold = 0.15) {
    if (curves.size() < 2) throw ArgumentError("group_by_similarity: need at least two curves");
    if (!std::isfinite(threshold) || threshold < 0.0) throw ArgumentError("group_by_similarity: bad threshold");
    const std::size_t n = curves.size();
    for (const auto& c : curves)
        if (c.mean.size() != curves[0].mean.size()) throw DimensionError("group_by_similarity: curve lengths differ");

    std::vector<std::vector<std::optional<double>>> r(n, std::vector<std::optional<double>>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) r[i][j] = r[j][i] = pearson(curves[i].mean, curves[j].mean);

    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> root = [&](std::size_t i) {
        return parent[i] == i ? i : parent[i] = root(parent[i]);
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            if (!r[i][j] || 1.0 - std::abs(*r[i][j]) > threshold) continue;
            const std::size_t a = root(i), b = root(j);
            if (a != b) parent[std::max(a, b)] = std::min(a, b);  // lowest index is the root
        }

    GroupingResult res;
    res.threshold = threshold;
    std::vector<std::vector<std::size_t>> positions;
    std::vector<std::size_t> slot(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t g = root(i);
        if (slot[g] == n) {
            slot[g] = positions.size();
            positions.emplace_back();
        }
        positions[slot[g]].push_back(i);
    }
    for (const auto& pos : positions) {
        FeatureGroup grp;
        const std::size_t first = pos.front();
        grp.representative.assign(curves[first].mean.size(), 0.0);
        for (std::size_t p : pos) {
            grp.members.push_back(curves[p].feature_index);
            const double sgn = (p == first || !r[first][p] || *r[first][p] >= 0.0) ? 1.0 : -1.0;
            for (std::size_t h = 0; h < grp.representative.size(); ++h)
                grp.representative[h] += sgn * curves[p].mean[h];
        }
        for (double& v : grp.representative) v /= static_cast<double>(pos.size());
        const bool constant = pos.size() == 1 && !pearson(curves[first].mean, curves[first].mean);
        if (!constant) {
            double sum = 0.0;
            std::size_t pairs = 0;
            for (std::size_t a = 0; a < pos.size(); ++a)
                for (std::size_t b = a + 1; b < pos.size(); ++b) {
                    sum += std::abs(r[pos[a]][pos[b]].value_or(0.0));
                    ++pairs;
                }
            grp.cohesion = pairs ? sum / static_cast<double>(pairs) : 1.0;
        }
        std::sort(grp.members.begin(), grp.members.end());
        res.groups.push_back(std::move(grp));
    }
    return res;
}

inline nlohmann::ordered_json grouping_to_json(const GroupingResult& g) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json groups = nlohmann::ordered_json::array();
    for (const auto& grp : g.groups) {
        nlohmann::ordered_json e;
        e["members"] = grp.members;
        e["cohesion"] = grp.cohesion ? nlohmann::ordered_json(*grp.cohesion) : nlohmann::ordered_json(nullptr);
        e["representative"] = grp.representative;
        groups.push_back(e);
    }
    j["groups"] = groups;
    j["threshold"] = g.threshold;
    return j;
}

// ------------------------------------------------------ key/query spans

struct Interval {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void add(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    double span() const { return hi - lo; }
    bool operator==(const Interval&) const = default;
};

struct StageSpans {
    Interval key_pre, query_pre;    // omega * t + alpha
    Interval key_eval, query_eval;  // activated output
};

struct FeatureSpan {
    std::size_t head = 0;
    std::size_t feature = 0;
    bool periodic = true;
    StageSpans initial, final;
};

struct MagnitudeReport {
    TimeNormalization normalization = TimeNormalization::unix_range;
    std::vector<FeatureSpan> features;
    // Ratios of summed final to summed initial spans over periodic features.
    double key_growth = 0.0;
    double query_growth = 0.0;
    double key_pre_growth = 0.0;
    double query_pre_growth = 0.0;
    std::string grew;  // "keys", "queries" or "equal" (evaluated spans)
    bool identical = false;
};

namespace detail {

inline void spans_for(const TimeLayer& layer, std::span<const double> keys, std::span<const double> queries,
                      std::vector<StageSpans>& out) {
    const std::size_t d = layer.params.d();
    out.assign(d, {});
    auto visit = [&](std::span<const double> ts, bool key) {
        for (double t : ts) {
            const auto z = phi_preactivation(t, layer.params);
            const auto e = evaluate_time_embedding(t, layer.params, layer.activation, layer.pulse);
            for (std::size_t i = 0; i < d; ++i) {
                (key ? out[i].key_pre : out[i].query_pre).add(z[i]);
                (key ? out[i].key_eval : out[i].query_eval).add(e[i]);
            }
        }
    };
    visit(keys, true);
    visit(queries, false);
}

inline double growth(double final_sum, double initial_sum) {
    if (initial_sum > 0.0) return final_sum / initial_sum;
    return final_sum > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
}

}  // namespace detail

/// Pooled spans over every test key (all slots of all samples) and the query grid.
inline MagnitudeReport key_query_magnitude_report(const Checkpoint& ck, std::span<const SeriesSample> samples) {
    detail::require_learned(ck);
    if (samples.empty()) throw EmptyInputError("key_query_magnitude_report: no test samples");
    const ModelConfig& cfg = ck.model.config();
    std::vector<double> keys;
    for (const auto& s : samples)
        for (const auto& tp : s.time_points) keys.push_back(key_time(tp, cfg.time_normalization, ck.context));
    const Matrix grid = reference_grid(cfg.time_grid, cfg.time_normalization);
    std::vector<double> queries;
    for (std::size_t j = 0; j < grid.rows(); ++j) queries.push_back(grid(j, 0));

    MagnitudeReport rep;
    rep.normalization = cfg.time_normalization;
    double ke_i = 0, ke_f = 0, qe_i = 0, qe_f = 0, kp_i = 0, kp_f = 0, qp_i = 0, qp_f = 0;
    bool identical = true;
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
        std::vector<StageSpans> ini, fin;
        detail::spans_for(time_layer(ck, CurveStage::initial, h), keys, queries, ini);
        detail::spans_for(time_layer(ck, CurveStage::final, h), keys, queries, fin);
        for (std::size_t i = 0; i < ini.size(); ++i) {
            FeatureSpan f{h, i, i > 0, ini[i], fin[i]};
            for (const StageSpans* s : {&f.initial, &f.final})
                identical = identical && s->key_pre.span() == s->query_pre.span() &&
                            s->key_eval.span() == s->query_eval.span();
            if (f.periodic) {
                ke_i += f.initial.key_eval.span();
                ke_f += f.final.key_eval.span();
                qe_i += f.initial.query_eval.span();
                qe_f += f.final.query_eval.span();
                kp_i += f.initial.key_pre.span();
                kp_f += f.final.key_pre.span();
                qp_i += f.initial.query_pre.span();
                qp_f += f.final.query_pre.span();
            }
            rep.features.push_back(f);
        }
    }
    rep.key_growth = detail::growth(ke_f, ke_i);
    rep.query_growth = detail::growth(qe_f, qe_i);
    rep.key_pre_growth = detail::growth(kp_f, kp_i);
    rep.query_pre_growth = detail::growth(qp_f, qp_i);
    rep.grew = rep.key_growth > rep.query_growth ? "keys" : rep.key_growth < rep.query_growth ? "queries" : "equal";
    rep.identical = identical;
    return rep;
}

inline nlohmann::ordered_json magnitude_report_to_json(const MagnitudeReport& r) {
    auto iv = [](const Interval& v) {
        return nlohmann::ordered_json{{"min", v.lo}, {"max", v.hi}, {"span", v.span()}};
    };
    auto stage = [&](const StageSpans& s) {
        nlohmann::ordered_json j;
        j["key_preactivation"] = iv(s.key_pre);
        j["query_preactivation"] = iv(s.query_pre);
        j["key_evaluated"] = iv(s.key_eval);
        j["query_evaluated"] = iv(s.query_eval);
        return j;
    };
    nlohmann::ordered_json j;
    j["normalization"] = std::string(to_string(r.normalization));
    j["key_growth"] = r.key_growth;
    j["query_growth"] = r.query_growth;
    j["key_preactivation_growth"] = r.key_pre_growth;
    j["query_preactivation_growth"] = r.query_pre_growth;
    j["grew"] = r.grew;
    j["identical_spans"] = r.identical;
    nlohmann::ordered_json feats = nlohmann::ordered_json::array();
    for (const auto& f : r.features) {
        nlohmann::ordered_json e;
        e["head"] = f.head;
        e["feature_index"] = f.feature;
        e["periodic"] = f.periodic;
        e["initial"] = stage(f.initial);
        e["final"] = stage(f.final);
        feats.push_back(e);
    }
    j["features"] = feats;
    return j;
}

// ------------------------------------------------------------ curve fits

enum class CurveFamily { sine, triangular };

inline std::string_view to_string(CurveFamily f) { return f == CurveFamily::sine ? "sine" : "triangular"; }

inline CurveFamily parse_family(std::string_view s) {
    if (s == "sine") return CurveFamily::sine;
    if (s == "triangular") return CurveFamily::triangular;
    throw ArgumentError("unknown curve family '" + std::string(s) + "'");
}

/// Sine family: max(floor, amplitude * sin(2*pi*(h - shift)/24) + offset), floor = min of the input.
/// Triangular family: baseline + amplitude * pulse(h; start, peak, end), pulse zero outside (start, end).
struct DaylightFit {
    CurveFamily family = CurveFamily::triangular;
    double amplitude = 0.0;
    double shift = 0.0;
    double offset = 0.0;
    double floor = 0.0;
    double start = 0.0;
    double peak = 0.0;
    double end = 0.0;
    double baseline = 0.0;
    double rmse = 0.0;
    bool degenerate = false;
    std::vector<double> fitted;

    double operator()(double h) const {
        if (family == CurveFamily::sine)
            return std::max(floor, amplitude * std::sin(2.0 * std::numbers::pi * (h - shift) / 24.0) + offset);
        double p = 0.0;
        if (h > start && h < end) p = h <= peak ? (h - start) / (peak - start) : (end - h) / (end - peak);
        return baseline + amplitude * p;
    }
};

namespace detail {

inline double unit_pulse(double h, double s, double p, double e) {
    if (h <= s || h >= e) return 0.0;
    return h <= p ? (h - s) / (p - s) : (e - h) / (e - p);
}

/// Least-squares y ~ b + a * g, returns (a, b, sse).
inline std::array<double, 3> affine_fit(std::span<const double> g, std::span<const double> y) {
    const double n = static_cast<double>(y.size());
    const double mg = std::accumulate(g.begin(), g.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sgg = 0.0, sgy = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        sgg += (g[i] - mg) * (g[i] - mg);
        sgy += (g[i] - mg) * (y[i] - my);
    }
    const double a = sgg > 0.0 ? sgy / sgg : 0.0;
    const double b = my - a * mg;
    double sse = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) sse += (y[i] - b - a * g[i]) * (y[i] - b - a * g[i]);
    return {a, b, sse};
}

/// Nelder-Mead refinement; returns the minimizer.
inline std::vector<double> nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x0, const std::vector<double>& step) {
    struct Ctx {
        const std::function<double(const std::vector<double>&)>* f;
        std::size_t n;
    } ctx{&f, x0.size()};
    gsl_multimin_function fn;
    fn.n = x0.size();
    fn.params = &ctx;
    fn.f = [](const gsl_vector* v, void* p) {
        const auto* c = static_cast<Ctx*>(p);
        std::vector<double> x(c->n);
        for (std::size_t i = 0; i < c->n; ++i) x[i] = gsl_vector_get(v, i);
        return (*c->f)(x);
    };
    gsl_vector* x = gsl_vector_alloc(fn.n);
    gsl_vector* ss = gsl_vector_alloc(fn.n);
    for (std::size_t i = 0; i < fn.n; ++i) {
        gsl_vector_set(x, i, x0[i]);
        gsl_vector_set(ss, i, step[i]);
    }
    gsl_multimin_fminimizer* m = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, fn.n);
    gsl_multimin_fminimizer_set(m, &fn, x, ss);
    for (int it = 0; it < 5000; ++it) {
        if (gsl_multimin_fminimizer_iterate(m) != GSL_SUCCESS) break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(m), 1e-10) == GSL_SUCCESS) break;
    }
    for (std::size_t i = 0; i < fn.n; ++i) x0[i] = gsl_vector_get(m->x, i);
    gsl_multimin_fminimizer_free(m);
    gsl_vector_free(ss);
    gsl_vector_free(x);
    return x0;
}

inline double sse_of(const DaylightFit& fit, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t h = 0; h < y.size(); ++h) s += (fit(static_cast<double>(h)) - y[h]) * (fit(static_cast<double>(h)) - y[h]);
    return s;
}

inline DaylightFit fit_triangular(std::span<const double> y) {
    const std::size_t n = y.size();
    std::vector<double> g(n);
    auto solve = [&](double s, double p, double e) {
        for (std::size_t h = 0; h < n; ++h) g[h] = unit_pulse(static_cast<double>(h), s, p, e);
        return affine_fit(g, y);
    };
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> x{0.0, 12.0, 24.0};
    for (double s = -1.0; s <= 23.0; s += 0.5)
        for (double p = s + 0.5; p <= 24.0; p += 0.5)
            for (double e = p + 0.5; e <= 25.0; e += 0.5) {
                const double sse = solve(s, p, e)[2];
                if (sse < best) {
                    best = sse;
                    x = {s, p, e};
                }
            }
    auto objective = [&](const std::vector<double>& v) {
        if (!(v[0] < v[1] && v[1] < v[2])) return 1e300;
        return solve(v[0], v[1], v[2])[2];
    };
    x = nelder_mead(objective, x, {0.25, 0.25, 0.25});
    const auto [a, b, sse] = solve(x[0], x[1], x[2]);
    DaylightFit fit;
    fit.family = CurveFamily::triangular;
    fit.start = x[0];
    fit.peak = x[1];
    fit.end = x[2];
    fit.amplitude = a;
    fit.baseline = b;
    return fit;
}

inline DaylightFit fit_sine(std::span<const double> y) {
    const std::size_t n = y.size();
    const double floor = std::ranges::min(y);
    // Shape sin(theta) + bias clipped at 0, scaled by a least-squares amplitude.
    std::vector<double> g(n), resid(n);
    for (std::size_t h = 0; h < n; ++h) resid[h] = y[h] - floor;
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> x{1.0, 6.0, 0.0};
    for (double s = 0.0; s < 24.0; s += 0.25)
        for (double bias = -0.95; bias <= 0.96; bias += 0.05) {
            double sgg = 0.0, sgy = 0.0;
            for (std::size_t h = 0; h < n; ++h) {
                g[h] = std::max(0.0, std::sin(2.0 * std::numbers::pi * (static_cast<double>(h) - s) / 24.0) + bias);
                sgg += g[h] * g[h];
                sgy += g[h] * resid[h];
            }
            if (sgg <= 0.0) continue;
            const double a = sgy / sgg;
            double sse = 0.0;
            for (std::size_t h = 0; h < n; ++h) sse += (resid[h] - a * g[h]) * (resid[h] - a * g[h]);
            if (sse < best) {
                best = sse;
                x = {a, s, floor + a * bias};
            }
        }
    DaylightFit fit;
    fit.family = CurveFamily::sine;
    fit.floor = floor;
    auto objective = [&](const std::vector<double>& v) {
        DaylightFit f = fit;
        f.amplitude = v[0];
        f.shift = v[1];
        f.offset = v[2];
        return sse_of(f, y);
    };
    const double scale = std::max(1e-12, std::ranges::max(y) - floor);
    x = nelder_mead(objective, x, {0.1 * scale, 0.25, 0.1 * scale});
    fit.amplitude = x[0];
    fit.shift = x[1];
    fit.offset = x[2];
    if (fit.amplitude < 0.0) {
        fit.amplitude = -fit.amplitude;
        fit.shift += 12.0;
    }
    fit.shift = std::fmod(std::fmod(fit.shift, 24.0) + 24.0, 24.0);
    return fit;
}

}  // namespace detail

/// Least-squares fit of a 24-point hourly curve. A constant input yields a
/// flat fit with `degenerate` set.
inline DaylightFit fit_daylight_curve(std::span<const double> hourly_means, CurveFamily family) {
    if (hourly_means.size() != kHoursPerDay) throw DimensionError("fit_daylight_curve: expected 24 hourly values");
    for (double v : hourly_means)
        if (!std::isfinite(v)) throw ArgumentError("fit_daylight_curve: non-finite hourly value");
    DaylightFit fit;
    if (std::ranges::min(hourly_means) == std::ranges::max(hourly_means)) {
        fit.family = family;
        fit.degenerate = true;
        fit.offset = fit.baseline = fit.floor = hourly_means[0];
        if (family == CurveFamily::triangular) fit.peak = fit.end = 0.0;
    } else {
        fit = family == CurveFamily::sine ? detail::fit_sine(hourly_means) : detail::fit_triangular(hourly_means);
    }
    for (std::size_t h = 0; h < kHoursPerDay; ++h) fit.fitted.push_back(fit(static_cast<double>(h)));
    fit.rmse = std::sqrt(detail::sse_of(fit, hourly_means) / static_cast<double>(kHoursPerDay));
    return fit;
}

inline nlohmann::ordered_json daylight_fit_to_json(const DaylightFit& f) {
    nlohmann::ordered_json j;
    j["family"] = std::string(to_string(f.family));
    if (f.family == CurveFamily::sine) {
        j["amplitude"] = f.amplitude;
        j["shift"] = f.shift;
        j["offset"] = f.offset;
        j["floor"] = f.floor;
    } else {
        j["start"] = f.start;
        j["peak"] = f.peak;
        j["end"] = f.end;
        j["amplitude"] = f.amplitude;
        j["baseline"] = f.baseline;
    }
    j["rmse"] = f.rmse;
    j["degenerate"] = f.degenerate;
    j["fitted"] = f.fitted;
    return j;
}

/// Mean of one feature column per hour slot over observed slots.
inline std::vector<double> hourly_feature_means(std::span<const SeriesSample> samples, std::size_t feature = 0) {
    std::vector<double> sum(kHoursPerDay, 0.0);
    std::vector<std::size_t> cnt(kHoursPerDay, 0);
    for (const auto& s : samples)
        for (std::size_t h = 0; h < kHoursPerDay && h < s.mask.size(); ++h)
            if (s.mask[h] && present(s.features(h, feature))) {
                sum[h] += s.features(h, feature);
                ++cnt[h];
            }
    std::vector<double> out(kHoursPerDay);
    for (std::size_t h = 0; h < kHoursPerDay; ++h) {
        if (!cnt[h]) throw EmptyInputError("hourly_feature_means: hour " + std::to_string(h) + " never observed");
        out[h] = sum[h] / static_cast<double>(cnt[h]);
    }
    return out;
}

}  // namespace timerep
