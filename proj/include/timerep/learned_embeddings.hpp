#pragma once

// Learnable time embedding phi(t): one linear element and d-1 periodic
// elements, either sine-activated or shaped into triangular pulses by a
// percentile threshold around a fixed peak element.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "timerep/errors.hpp"
#include "timerep/matrix.hpp"
#include "timerep/tape.hpp"

namespace timerep {

enum class TimeActivation { sine, pulse };

inline std::string_view to_string(TimeActivation a) {
    return a == TimeActivation::sine ? "sine" : "pulse";
}

inline TimeActivation parse_activation(std::string_view s) {
    if (s == "sine") return TimeActivation::sine;
    if (s == "pulse") return TimeActivation::pulse;
    throw ArgumentError("unknown time activation '" + std::string(s) + "'");
}

/// Frequencies and phases of one attention head's time embedding.
struct TimeEmbeddingParams {
    std::vector<double> omega;
    std::vector<double> alpha;
    int head_index = 0;

    std::size_t d() const { return omega.size(); }

    void validate() const {
        if (omega.size() != alpha.size())
            throw DimensionError("TimeEmbeddingParams: omega and alpha lengths differ");
        if (omega.empty()) throw DimensionError("TimeEmbeddingParams: empty embedding");
    }

    /// Uniform(-scale, scale) initialization.
    static TimeEmbeddingParams random(std::size_t d, double scale, std::mt19937_64& rng,
                                      int head_index = 0) {
        std::uniform_real_distribution<double> u(-scale, scale);
        TimeEmbeddingParams p;
        p.head_index = head_index;
        p.omega.resize(d);
        p.alpha.resize(d);
        for (std::size_t i = 0; i < d; ++i) {
            p.omega[i] = u(rng);
            p.alpha[i] = u(rng);
        }
        return p;
    }
};

/// Pre-activation omega_i * t + alpha_i for every element.
inline std::vector<double> phi_preactivation(double t, const TimeEmbeddingParams& params) {
    params.validate();
    std::vector<double> z(params.d());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = params.omega[i] * t + params.alpha[i];
    return z;
}

/// Sine-activated embedding: element 0 linear, the rest sin(omega_i t + alpha_i).
inline std::vector<double> phi(double t, const TimeEmbeddingParams& params) {
    std::vector<double> z = phi_preactivation(t, params);
    for (std::size_t i = 1; i < z.size(); ++i) z[i] = std::sin(z[i]);
    return z;
}

/// Partials of each phi element. Element i depends only on (omega_i, alpha_i, t),
/// so the Jacobians with respect to omega and alpha are diagonal.
struct PhiGradients {
    std::vector<double> d_omega;
    std::vector<double> d_alpha;
    std::vector<double> d_t;
};

inline PhiGradients phi_gradients(double t, const TimeEmbeddingParams& params) {
    params.validate();
    const std::size_t d = params.d();
    PhiGradients g{std::vector<double>(d), std::vector<double>(d), std::vector<double>(d)};
    g.d_omega[0] = t;
    g.d_alpha[0] = 1.0;
    g.d_t[0] = params.omega[0];
    for (std::size_t i = 1; i < d; ++i) {
        const double c = std::cos(params.omega[i] * t + params.alpha[i]);
        g.d_omega[i] = t * c;
        g.d_alpha[i] = c;
        g.d_t[i] = params.omega[i] * c;
    }
    return g;
}

/// How the gradient treats the percentile threshold v.
///   exact  - v is differentiated as the order statistic it is (piecewise linear)
///   frozen - v is held constant
enum class PercentileGradient { exact, frozen };

struct PulseTransformSpec {
    std::size_t peak_index = 13;
    double percentile = 25.0;
    PercentileGradient gradient = PercentileGradient::exact;

    void validate(std::size_t width) const {
        if (peak_index >= width) throw ArgumentError("PulseTransformSpec: peak_index out of range");
        if (!(percentile > 0.0 && percentile < 100.0))
            throw ArgumentError("PulseTransformSpec: percentile must be in (0,100)");
    }
};

namespace detail {

struct PulseRow {
    std::vector<double> dist;
    double threshold = 0.0;
    std::size_t threshold_index = 0;  // element whose distance is the percentile
};

/// Nearest-rank percentile of |z_j - z_peak|; ties broken by lower index.
inline PulseRow pulse_row(std::span<const double> z, const PulseTransformSpec& spec) {
    const std::size_t w = z.size();
    PulseRow row;
    row.dist.resize(w);
    for (std::size_t j = 0; j < w; ++j) row.dist[j] = std::abs(z[j] - z[spec.peak_index]);
    std::vector<std::size_t> order(w);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return row.dist[a] < row.dist[b]; });
    auto rank = static_cast<std::size_t>(std::ceil(spec.percentile / 100.0 * static_cast<double>(w)));
    rank = std::clamp<std::size_t>(rank, 1, w);
    row.threshold_index = order[rank - 1];
    row.threshold = row.dist[row.threshold_index];
    return row;
}

inline double sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace detail

/// Applies the percentile pulse to every row of `time_vectors`:
/// out_ij = 1 - dist_ij / v_i when dist_ij < v_i, else 0, where dist_ij is the
/// distance to the peak element and v_i the row's nearest-rank percentile of
/// those distances. A row with v_i = 0 becomes the indicator of the peak.
inline Matrix pulse_transform(const Matrix& time_vectors, const PulseTransformSpec& spec) {
    spec.validate(time_vectors.cols());
    Matrix out(time_vectors.rows(), time_vectors.cols());
    for (std::size_t i = 0; i < time_vectors.rows(); ++i) {
        const auto row = detail::pulse_row(time_vectors.row_span(i), spec);
        if (!(row.threshold > 0.0)) {
            out(i, spec.peak_index) = 1.0;
            continue;
        }
        for (std::size_t j = 0; j < time_vectors.cols(); ++j)
            out(i, j) = row.dist[j] < row.threshold ? 1.0 - row.dist[j] / row.threshold : 0.0;
    }
    return out;
}

/// Jacobian d out_i / d z_i of one row (width x width, [output][input]).
inline Matrix pulse_row_jacobian(std::span<const double> z, const PulseTransformSpec& spec) {
    const std::size_t w = z.size();
    spec.validate(w);
    Matrix jac(w, w);
    const auto row = detail::pulse_row(z, spec);
    const double v = row.threshold;
    if (!(v > 0.0)) return jac;
    const std::size_t p = spec.peak_index;
    const std::size_t k = row.threshold_index;
    const double sk = detail::sign(z[k] - z[p]);
    for (std::size_t j = 0; j < w; ++j) {
        if (j == p || !(row.dist[j] < v)) continue;
        const double sj = detail::sign(z[j] - z[p]);
        jac(j, j) += -sj / v;
        jac(j, p) += sj / v;
        if (spec.gradient == PercentileGradient::exact) {
            const double dout_dv = row.dist[j] / (v * v);
            jac(j, k) += dout_dv * sk;
            jac(j, p) -= dout_dv * sk;
        }
    }
    return jac;
}

/// One Jacobian per row of `time_vectors`.
inline std::vector<Matrix> pulse_transform_gradients(const Matrix& time_vectors,
                                                     const PulseTransformSpec& spec) {
    std::vector<Matrix> out;
    out.reserve(time_vectors.rows());
    for (std::size_t i = 0; i < time_vectors.rows(); ++i)
        out.push_back(pulse_row_jacobian(time_vectors.row_span(i), spec));
    return out;
}

/// Pulse-activated embedding for a single t: element 0 linear, elements
/// 1..d-1 the pulse of the periodic pre-activations.
inline std::vector<double> phi_pulse(double t, const TimeEmbeddingParams& params,
                                     const PulseTransformSpec& spec) {
    std::vector<double> z = phi_preactivation(t, params);
    const Matrix periodic(1, z.size() - 1, std::vector<double>(z.begin() + 1, z.end()));
    const Matrix pulsed = pulse_transform(periodic, spec);
    for (std::size_t i = 1; i < z.size(); ++i) z[i] = pulsed(0, i - 1);
    return z;
}

inline std::vector<double> evaluate_time_embedding(double t, const TimeEmbeddingParams& params,
                                                   TimeActivation act,
                                                   const PulseTransformSpec& spec = {}) {
    return act == TimeActivation::sine ? phi(t, params) : phi_pulse(t, params, spec);
}

namespace ad {

/// Row-wise pulse transform on the tape.
inline Var pulse_rows(Var a, const PulseTransformSpec& spec) {
    Matrix out = pulse_transform(a.value(), spec);
    if (!a.tape->requires_grad(a)) return a.tape->constant(std::move(out));
    return a.tape->push(std::move(out), true, [a, spec](Tape& t, const Matrix& g) {
        const Matrix& z = t.value(a);
        Matrix gz(z.rows(), z.cols());
        for (std::size_t i = 0; i < z.rows(); ++i) {
            const Matrix jac = pulse_row_jacobian(z.row_span(i), spec);
            for (std::size_t j = 0; j < z.cols(); ++j) {
                const double gj = g(i, j);
                if (gj == 0.0) continue;
                for (std::size_t m = 0; m < z.cols(); ++m) gz(i, m) += gj * jac(j, m);
            }
        }
        t.accumulate(a.id, gz);
    });
}

/// phi over a column of times (n x 1), with omega and alpha as 1 x d rows.
/// Returns the n x d embedding.
inline Var time_embedding(Var times, Var omega, Var alpha, TimeActivation act,
                          const PulseTransformSpec& spec = {}) {
    const std::size_t d = omega.cols();
    Var z = add_row(matmul(times, omega), alpha);
    if (d == 1) return z;
    Var linear = slice_cols(z, 0, 1);
    Var periodic = slice_cols(z, 1, d);
    Var activated = act == TimeActivation::sine ? sin(periodic) : pulse_rows(periodic, spec);
    const Var parts[] = {linear, activated};
    return concat_cols(parts);
}

}  // namespace ad

/// Snapshot of every head's parameters:
/// {"d": 24, "activation": "sine", "heads": [{"head_index": 0, "omega": [...], "alpha": [...]}]}
inline nlohmann::json time_params_to_json(std::span<const TimeEmbeddingParams> heads,
                                          TimeActivation act) {
    nlohmann::json j;
    j["d"] = heads.empty() ? 0 : heads.front().d();
    j["activation"] = std::string(to_string(act));
    j["heads"] = nlohmann::json::array();
    for (const auto& h : heads)
        j["heads"].push_back({{"head_index", h.head_index}, {"omega", h.omega}, {"alpha", h.alpha}});
    return j;
}

struct TimeParamsSnapshot {
    std::size_t d = 0;
    TimeActivation activation = TimeActivation::sine;
    std::vector<TimeEmbeddingParams> heads;
};

inline TimeParamsSnapshot time_params_from_json(const nlohmann::json& j) {
    TimeParamsSnapshot s;
    try {
        s.d = j.at("d").get<std::size_t>();
        s.activation = parse_activation(j.at("activation").get<std::string>());
        for (const auto& h : j.at("heads")) {
            TimeEmbeddingParams p;
            p.head_index = h.at("head_index").get<int>();
            p.omega = h.at("omega").get<std::vector<double>>();
            p.alpha = h.at("alpha").get<std::vector<double>>();
            p.validate();
            if (p.d() != s.d) throw DimensionError("time params: head width differs from d");
            s.heads.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("time params JSON: ") + e.what());
    }
    return s;
}

}  // namespace timerep
