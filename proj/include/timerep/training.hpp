#pragma once

// Mini-batch training with per-sample tapes, evaluation, and seed sweeps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "timerep/checkpoint.hpp"
#include "timerep/data.hpp"
#include "timerep/errors.hpp"
#include "timerep/metrics.hpp"
#include "timerep/model.hpp"

namespace timerep {

enum class OptimizerKind { sgd, adam };

inline std::string_view to_string(OptimizerKind o) { return o == OptimizerKind::sgd ? "sgd" : "adam"; }

inline OptimizerKind parse_optimizer(std::string_view s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    throw ArgumentError("unknown optimizer '" + std::string(s) + "'");
}

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 8;
    double learning_rate = 1e-3;
    OptimizerKind optimizer = OptimizerKind::adam;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5};
    std::size_t early_stop_patience = 0;  // 0 disables early stopping
    bool class_weighting = false;
    double time_lr_scale = 1.0;  // learning-rate multiplier for the learned time layers

    void validate() const {
        if (epochs == 0) throw ConfigError("epochs must be at least 1");
        if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
            throw ConfigError("learning_rate must be positive and finite");
        if (!(time_lr_scale > 0.0) || !std::isfinite(time_lr_scale))
            throw ConfigError("time_lr_scale must be positive and finite");
        if (seeds.empty()) throw ConfigError("seeds must not be empty");
        if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
            throw ConfigError("seeds must be distinct");
    }
};

class Optimizer {
public:
    Optimizer(OptimizerKind kind, double lr, double time_lr_scale = 1.0)
        : kind_(kind), lr_(lr), time_scale_(time_lr_scale) {}

    void step(ParameterStore& store) {
        auto& params = store.all();
        if (kind_ == OptimizerKind::sgd) {
            for (auto& p : params) {
                const double lr = rate(p);
                for (std::size_t i = 0; i < p.value.size(); ++i) p.value.data()[i] -= lr * p.grad.data()[i];
            }
            return;
        }
        if (m_.empty()) {
            for (const auto& p : params) {
                m_.emplace_back(p.value.size(), 0.0);
                v_.emplace_back(p.value.size(), 0.0);
            }
        }
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t k = 0; k < params.size(); ++k) {
            auto& p = params[k];
            const double lr = rate(p);
            for (std::size_t i = 0; i < p.value.size(); ++i) {
                const double g = p.grad.data()[i];
                m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * g;
                v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * g * g;
                p.value.data()[i] -= lr * (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + eps_);
            }
        }
    }

private:
    double rate(const Parameter& p) const { return p.name.starts_with("time.") ? lr_ * time_scale_ : lr_; }

    OptimizerKind kind_;
    double lr_;
    double time_scale_ = 1.0;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

struct EpochLog {
    std::uint64_t seed = 0;
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double normalized_loss = 0.0;
    double validation_loss = 0.0;
    bool improved = false;
};

using EpochCallback = std::function<void(const EpochLog&)>;

struct TrainResult {
    Model model;              // best-validation parameters, float32-rounded
    std::uint64_t seed = 0;
    std::vector<double> train_loss;
    std::vector<double> normalized_loss;
    std::vector<double> validation_loss;
    std::size_t best_epoch = 0;
    std::optional<std::vector<TimeEmbeddingParams>> initial_time;
};

/// Inverse-frequency weights over the labeled hours, normalized so the mean
/// weight of a labeled hour is 1. Absent classes get weight 1.
inline std::vector<double> class_weights(std::span<const ModelInput> inputs, std::size_t n_classes) {
    std::vector<double> count(n_classes, 0.0);
    double total = 0.0;
    for (const auto& in : inputs)
        for (int l : in.labels)
            if (l >= 0) {
                count[static_cast<std::size_t>(l)] += 1.0;
                total += 1.0;
            }
    std::size_t present = 0;
    for (double c : count) present += c > 0.0;
    std::vector<double> w(n_classes, 1.0);
    for (std::size_t c = 0; c < n_classes; ++c)
        if (count[c] > 0.0) w[c] = total / (static_cast<double>(present) * count[c]);
    return w;
}

inline std::vector<ModelInput> prepare_inputs(std::span<const SeriesSample> samples, const ModelConfig& cfg,
                                              const DataContext& ctx) {
    std::vector<ModelInput> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(prepare_input(s, cfg, ctx));
    return out;
}

/// Mean cross-entropy per labeled hour, without dropout.
inline double mean_loss(const Model& model, std::span<const ModelInput> inputs) {
    double sum = 0.0, labeled = 0.0;
    for (const auto& in : inputs) {
        const auto w = in.label_weights();
        double n = 0.0;
        for (double x : w) n += x;
        if (n == 0.0) continue;
        ad::Tape t;
        const auto g = model.trace(t, in);
        std::vector<int> lbl = in.labels;
        for (auto& l : lbl) l = std::max(l, 0);
        sum += ad::cross_entropy(g.logits, lbl, w, 1.0).value()(0, 0);
        labeled += n;
    }
    return labeled > 0.0 ? sum / labeled : 0.0;
}

namespace detail {

inline bool store_finite(const ParameterStore& s, bool grads) {
    for (const auto& p : s.all())
        if (!all_finite(grads ? p.grad : p.value)) return false;
    return true;
}

}  // namespace detail

inline TrainResult train(const ModelConfig& model_cfg, const TrainConfig& cfg, const DataContext& ctx,
                         std::span<const SeriesSample> train_set, std::span<const SeriesSample> validation_set,
                         std::uint64_t seed, const EpochCallback& on_epoch = {}) {
    cfg.validate();
    if (train_set.empty()) throw DataError("train: empty training set");
    ModelConfig mc = model_cfg;
    mc.seed = seed;
    Model model(mc);
    TrainResult result{model, seed, {}, {}, {}, 0, std::nullopt};
    if (mc.learned()) result.initial_time = model.time_params();

    const auto train_in = prepare_inputs(train_set, mc, ctx);
    const auto val_in = prepare_inputs(validation_set, mc, ctx);
    LossOptions loss_opt;
    if (cfg.class_weighting) loss_opt.class_weights = class_weights(train_in, mc.n_classes);

    std::mt19937_64 order_rng(seed ^ 0x5DEECE66DULL);
    std::mt19937_64 dropout_rng(seed ^ 0x9E3779B97F4A7C15ULL);
    Optimizer opt(cfg.optimizer, cfg.learning_rate, cfg.time_lr_scale);
    std::vector<std::size_t> order(train_in.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    double best = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    auto diverged = [&](std::size_t epoch, const std::string& what) {
        return DivergenceError("training diverged at epoch " + std::to_string(epoch) + " (seed " +
                               std::to_string(seed) + "): " + what);
    };

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), order_rng);
        double epoch_sum = 0.0, epoch_labeled = 0.0;
        for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
            const std::size_t e = std::min(order.size(), b + cfg.batch_size);
            double batch_labeled = 0.0;
            for (std::size_t i = b; i < e; ++i)
                for (double w : train_in[order[i]].label_weights()) batch_labeled += w;
            if (batch_labeled == 0.0) continue;
            model.parameters().zero_grad();
            loss_opt.normalizer = batch_labeled;
            double batch_loss = 0.0;
            for (std::size_t i = b; i < e; ++i) {
                const ModelInput& in = train_in[order[i]];
                bool any = false;
                for (int l : in.labels) any = any || l >= 0;
                if (!any) continue;
                model.forward(in, mc.dropout > 0.0 ? &dropout_rng : nullptr);
                ad::Var loss = model.loss(loss_opt);
                batch_loss += loss.value()(0, 0);
                model.backward(loss);
            }
            if (!std::isfinite(batch_loss)) throw diverged(epoch, "non-finite loss");
            if (!detail::store_finite(model.parameters(), true)) throw diverged(epoch, "non-finite gradient");
            opt.step(model.parameters());
            if (!detail::store_finite(model.parameters(), false)) throw diverged(epoch, "non-finite parameter");
            epoch_sum += batch_loss * batch_labeled;
            epoch_labeled += batch_labeled;
        }
        if (epoch_labeled == 0.0) throw DataError("train: no labeled hours in the training set");
        const double train_loss = epoch_sum / epoch_labeled;
        result.train_loss.push_back(train_loss);
        result.normalized_loss.push_back(train_loss / result.train_loss.front());
        const double val = val_in.empty() ? train_loss : mean_loss(model, val_in);
        if (!std::isfinite(val)) throw diverged(epoch, "non-finite validation loss");
        result.validation_loss.push_back(val);
        const bool improved = val < best;
        if (improved) {
            best = val;
            result.best_epoch = epoch;
            result.model = model;
            since_best = 0;
        } else {
            ++since_best;
        }
        if (on_epoch) on_epoch({seed, epoch, train_loss, result.normalized_loss.back(), val, improved});
        if (cfg.early_stop_patience > 0 && since_best >= cfg.early_stop_patience) break;
    }
    round_to_float32(result.model.parameters());
    return result;
}

struct EvalOptions {
    bool daylight_only = false;
};

/// Hour slot of output row `row` for a model with `rows` outputs per day.
inline std::size_t output_slot(std::size_t row, std::size_t rows) { return row * kHoursPerDay / rows; }

/// Argmax predictions on every labeled output row. With `daylight_only`,
/// rows whose hour midpoint falls outside sunrise..sunset at the site are skipped.
inline MetricReport evaluate(const Model& model, const DataContext& ctx, std::span<const SeriesSample> samples,
                             const EvalOptions& opt = {}) {
    std::vector<int> truth, pred;
    for (const auto& s : samples) {
        if (s.observed() == 0) continue;
        const ModelInput in = prepare_input(s, model.config(), ctx);
        const auto p = argmax_rows(model.logits(in));
        std::optional<SolarDay> sd;
        if (opt.daylight_only) sd = solar_day(s.date, ctx.prior.site, ctx.utc_offset_seconds);
        for (std::size_t r = 0; r < p.size(); ++r) {
            if (in.labels[r] < 0) continue;
            if (sd) {
                const double mid = static_cast<double>(output_slot(r, p.size())) + 0.5;
                if (mid <= sd->sunrise_hour || mid >= sd->sunset_hour) continue;
            }
            truth.push_back(in.labels[r]);
            pred.push_back(p[r]);
        }
    }
    if (truth.empty()) throw EmptyInputError("evaluate: no labeled test hours");
    return compute_metrics(truth, pred, model.config().n_classes);
}

struct SeedOutcome {
    std::uint64_t seed = 0;
    std::optional<TrainResult> result;
    std::string failure;
    bool diverged = false;
};

struct MultiSeedResult {
    SeedAggregate aggregate;
    std::vector<SeedOutcome> outcomes;
};

/// Trains and evaluates once per configured seed; failures are recorded per seed.
inline MultiSeedResult run_seeds(const ModelConfig& model_cfg, const TrainConfig& cfg, const DataContext& ctx,
                                 const DatasetSplit& split, const EvalOptions& eval = {},
                                 const EpochCallback& on_epoch = {}) {
    cfg.validate();
    MultiSeedResult out;
    std::vector<SeedRun> runs;
    for (std::uint64_t seed : cfg.seeds) {
        SeedOutcome o{seed, std::nullopt, {}, false};
        SeedRun run{seed, std::nullopt, {}};
        try {
            o.result = train(model_cfg, cfg, ctx, split.train, split.validation, seed, on_epoch);
            run.report = evaluate(o.result->model, ctx, split.test, eval);
        } catch (const DivergenceError& e) {
            o.diverged = true;
            o.failure = e.what();
        } catch (const EmptyInputError& e) {
            o.failure = e.what();
        }
        run.failure = o.failure;
        runs.push_back(std::move(run));
        out.outcomes.push_back(std::move(o));
    }
    out.aggregate = aggregate_runs(std::move(runs));
    return out;
}

inline MultiSeedResult run_multiseed(const ModelConfig& model_cfg, const TrainConfig& cfg, const DataContext& ctx,
                                     const DatasetSplit& split, const EvalOptions& eval = {},
                                     const EpochCallback& on_epoch = {}) {
    if (cfg.seeds.size() < 2) throw ConfigError("run_multiseed needs at least two seeds");
    return run_seeds(model_cfg, cfg, ctx, split, eval, on_epoch);
}

/// Data context for a split: normalization range, scaler fitted on train,
/// and either the given thresholds or ones derived from train power.
inline DataContext make_context(const DatasetSplit& split, int utc_offset_seconds, const PriorEmbeddingOptions& prior,
                                std::vector<double> thresholds) {
    DataContext ctx;
    ctx.range_start = split.range_start;
    ctx.range_end = split.range_end;
    ctx.utc_offset_seconds = utc_offset_seconds;
    ctx.prior = prior;
    fit_feature_scaler(ctx, split.train);
    ctx.thresholds = std::move(thresholds);
    return ctx;
}

}  // namespace timerep
