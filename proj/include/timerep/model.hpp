#pragma once

// The two classifiers compared by the experiments.
//
// PriorTime: observation features concatenated with a prior time embedding,
//   input projection -> encoder self-attention stack -> decoder stack ->
//   reconstruction back to the input width -> linear classifier per hour.
//
// mTAN: per head, keys phi_h(observed times) and queries phi_h(reference
//   grid) go through learned query/key projections; attention re-grids the
//   projected observations onto the fixed grid, followed by an output
//   projection and the linear classifier.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "timerep/attention.hpp"
#include "timerep/data.hpp"
#include "timerep/errors.hpp"
#include "timerep/learned_embeddings.hpp"
#include "timerep/matrix.hpp"
#include "timerep/prior_embeddings.hpp"
#include "timerep/tape.hpp"
#include "timerep/temporal.hpp"

namespace timerep {

/// How observed timestamps become scalar times for the learned embedding.
///   unix_range - position within the dataset's date range; queries j/(G-1)
///   hour_index - hour/24 for keys and j/G for queries, so both share values
enum class TimeNormalization { unix_range, hour_index };

inline std::string_view to_string(TimeNormalization n) {
    return n == TimeNormalization::unix_range ? "unix" : "hour_index";
}

inline TimeNormalization parse_time_normalization(std::string_view s) {
    if (s == "unix") return TimeNormalization::unix_range;
    if (s == "hour_index") return TimeNormalization::hour_index;
    throw ArgumentError("unknown time normalization '" + std::string(s) + "'");
}

struct ModelConfig {
    TimeScheme scheme = TimeScheme::sine_cosine;
    std::size_t d_model = 64;
    std::size_t n_heads = 4;
    std::size_t n_encoder_layers = 2;
    std::size_t n_decoder_layers = 2;
    std::size_t ff_width = 128;
    double dropout = 0.1;
    std::size_t n_classes = kNumClasses;
    std::size_t time_grid = kHoursPerDay;
    std::size_t n_features = 2;
    TimeNormalization time_normalization = TimeNormalization::unix_range;
    double time_init_scale = 0.01;
    PulseTransformSpec pulse{};
    double reconstruction_weight = 0.0;
    std::uint64_t seed = 0;

    bool learned() const { return is_learned(scheme); }

    /// Width of the learned embedding; tied to the output grid.
    std::size_t time_dim() const { return time_grid; }

    std::size_t prior_time_width() const { return learned() ? 0 : prior_feature_names(scheme).size(); }

    void validate() const {
        if (d_model == 0 || n_heads == 0) throw ConfigError("d_model and n_heads must be positive");
        if (d_model % n_heads) throw ConfigError("d_model must be divisible by n_heads");
        if (n_classes < 2) throw ConfigError("n_classes must be at least 2");
        if (time_grid == 0) throw ConfigError("time_grid must be positive");
        if (n_features == 0) throw ConfigError("n_features must be positive");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0,1)");
        if (!learned()) {
            if (n_encoder_layers == 0 || n_decoder_layers == 0)
                throw ConfigError("PriorTime needs at least one encoder and one decoder layer");
            if (ff_width == 0) throw ConfigError("ff_width must be positive");
        } else {
            if (time_dim() < 2) throw ConfigError("learned time embedding needs time_grid >= 2");
            if (scheme == TimeScheme::learned_pulse) {
                try {
                    pulse.validate(time_dim() - 1);
                } catch (const ArgumentError& e) {
                    throw ConfigError(std::string("pulse: ") + e.what());
                }
            }
        }
    }
};

/// Everything needed to turn a SeriesSample into model input, fixed at
/// training time and stored with the checkpoint.
struct DataContext {
    std::int64_t range_start = 0;
    std::int64_t range_end = 1;
    int utc_offset_seconds = 0;
    PriorEmbeddingOptions prior{};
    std::vector<double> feature_mean{0.0, 0.0};
    std::vector<double> feature_std{1.0, 1.0};
    std::vector<double> thresholds;
};

/// Per-feature mean and standard deviation over observed training slots.
inline void fit_feature_scaler(DataContext& ctx, std::span<const SeriesSample> train) {
    const std::size_t nf = feature_names().size();
    std::vector<double> sum(nf, 0.0), sq(nf, 0.0);
    std::size_t n = 0;
    for (const auto& s : train)
        for (std::size_t h = 0; h < s.mask.size(); ++h) {
            if (!s.mask[h]) continue;
            ++n;
            for (std::size_t f = 0; f < nf; ++f) {
                sum[f] += s.features(h, f);
                sq[f] += s.features(h, f) * s.features(h, f);
            }
        }
    ctx.feature_mean.assign(nf, 0.0);
    ctx.feature_std.assign(nf, 1.0);
    if (n == 0) return;
    for (std::size_t f = 0; f < nf; ++f) {
        const double mean = sum[f] / static_cast<double>(n);
        const double var = std::max(0.0, sq[f] / static_cast<double>(n) - mean * mean);
        ctx.feature_mean[f] = mean;
        ctx.feature_std[f] = var > 1e-12 ? std::sqrt(var) : 1.0;
    }
}

/// Model-ready view of one sample.
struct ModelInput {
    Matrix values;            // n x F, standardized, zero where masked
    std::vector<bool> mask;   // observed slots
    std::vector<int> labels;  // per output row (slot or grid point), -1 where unlabeled
    Matrix prior_time;        // n x k for prior schemes
    Matrix key_times;         // n x 1 for learned schemes
    Matrix query_times;       // G x 1 for learned schemes
    std::vector<double> label_weights() const {
        std::vector<double> w(labels.size(), 0.0);
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = labels[i] >= 0 ? 1.0 : 0.0;
        return w;
    }
};

inline Matrix reference_grid(std::size_t size, TimeNormalization norm) {
    Matrix g(size, 1);
    for (std::size_t j = 0; j < size; ++j) {
        if (norm == TimeNormalization::hour_index)
            g(j, 0) = static_cast<double>(j) / static_cast<double>(size);
        else
            g(j, 0) = size > 1 ? static_cast<double>(j) / static_cast<double>(size - 1) : 0.0;
    }
    return g;
}

inline double key_time(const TimePoint& tp, TimeNormalization norm, const DataContext& ctx) {
    if (norm == TimeNormalization::hour_index) return hour_index_norm(tp);
    return normalize_unix(tp.unix_seconds, ctx.range_start, ctx.range_end);
}

inline ModelInput prepare_input(const SeriesSample& s, const ModelConfig& cfg,
                                const DataContext& ctx) {
    const std::size_t n = s.time_points.size();
    if (s.features.rows() != n || s.mask.size() != n || s.labels.size() != n)
        throw DimensionError("prepare_input: inconsistent sample lengths");
    if (s.features.cols() != cfg.n_features)
        throw DimensionError("prepare_input: sample feature count differs from model");
    if (ctx.feature_mean.size() != cfg.n_features || ctx.feature_std.size() != cfg.n_features)
        throw DimensionError("prepare_input: feature scaler width differs from model");
    ModelInput in;
    in.values = Matrix(n, cfg.n_features);
    in.mask = s.mask;
    in.labels = s.labels;
    for (std::size_t h = 0; h < n; ++h) {
        if (!s.mask[h]) {
            in.labels[h] = -1;
            continue;
        }
        for (std::size_t f = 0; f < cfg.n_features; ++f)
            in.values(h, f) = (s.features(h, f) - ctx.feature_mean[f]) / ctx.feature_std[f];
    }
    if (cfg.learned()) {
        in.key_times = Matrix(n, 1);
        for (std::size_t h = 0; h < n; ++h)
            in.key_times(h, 0) = key_time(s.time_points[h], cfg.time_normalization, ctx);
        in.query_times = reference_grid(cfg.time_grid, cfg.time_normalization);
        // Grid point j carries the label of the slot it falls in.
        in.labels.assign(cfg.time_grid, -1);
        for (std::size_t j = 0; j < cfg.time_grid; ++j) {
            const std::size_t slot = j * n / cfg.time_grid;
            in.labels[j] = s.mask[slot] ? s.labels[slot] : -1;
        }
    } else {
        const auto pts = normalize_unix(s.time_points, ctx.range_start, ctx.range_end);
        const auto emb = embed_series(pts, cfg.scheme, ctx.prior);
        in.prior_time = Matrix(n, cfg.prior_time_width());
        for (std::size_t h = 0; h < n; ++h)
            for (std::size_t k = 0; k < emb[h].values.size(); ++k) in.prior_time(h, k) = emb[h].values[k];
    }
    return in;
}

struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;
};

/// Named trainable tensors in insertion order.
class ParameterStore {
public:
    Parameter& add(std::string name, Matrix init) {
        if (index_.count(name)) throw ArgumentError("duplicate parameter '" + name + "'");
        index_[name] = params_.size();
        Matrix g(init.rows(), init.cols());
        params_.push_back({std::move(name), std::move(init), std::move(g)});
        return params_.back();
    }
    bool contains(const std::string& name) const { return index_.count(name) > 0; }
    std::size_t index_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ArgumentError("no parameter named '" + name + "'");
        return it->second;
    }
    Parameter& at(const std::string& name) { return params_[index_of(name)]; }
    const Parameter& at(const std::string& name) const { return params_[index_of(name)]; }
    std::vector<Parameter>& all() { return params_; }
    const std::vector<Parameter>& all() const { return params_; }
    std::size_t size() const { return params_.size(); }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p.value.size();
        return n;
    }

    void zero_grad() {
        for (auto& p : params_)
            for (auto& g : p.grad.data()) g = 0.0;
    }

private:
    std::vector<Parameter> params_;
    std::map<std::string, std::size_t> index_;
};

struct ForwardGraph {
    ad::Var logits;                            // n_out x n_classes
    std::optional<ad::Var> reconstruction;     // PriorTime only
    Matrix reconstruction_target;
    std::optional<ad::Var> time_features;      // prior time input, never differentiated
    std::vector<ad::Var> attention_weights;    // mTAN: per head, G x n
    std::vector<ad::Var> head_values;          // mTAN: per head, projected values n x dv
    std::vector<ad::Var> head_contexts;        // mTAN: per head, G x dv
    std::vector<ad::Var> key_embeddings;       // mTAN: per head, n x d
    std::vector<ad::Var> query_embeddings;     // mTAN: per head, G x d
    std::vector<std::pair<std::size_t, ad::Var>> parameters;  // store index -> tape leaf
};

struct TraceOptions {
    bool track_gradients = false;
    std::mt19937_64* dropout_rng = nullptr;  // dropout only when set
};

struct LossOptions {
    double normalizer = 0.0;               // 0: number of labeled slots in this sample
    std::vector<double> class_weights;     // empty: all ones
};

class Model {
public:
    explicit Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        std::mt19937_64 rng(cfg_.seed);
        if (cfg_.learned())
            init_mtan(rng);
        else
            init_prior_time(rng);
    }

    // Copies carry configuration and parameters, never an in-flight recording.
    Model(const Model& o) : cfg_(o.cfg_), params_(o.params_) {}
    Model& operator=(const Model& o) {
        if (this != &o) {
            cfg_ = o.cfg_;
            params_ = o.params_;
            tape_.reset();
            graph_.reset();
        }
        return *this;
    }
    Model(Model&&) = default;
    Model& operator=(Model&&) = default;

    const ModelConfig& config() const { return cfg_; }
    ParameterStore& parameters() { return params_; }
    const ParameterStore& parameters() const { return params_; }

    /// Records the computation on a caller-owned tape.
    ForwardGraph trace(ad::Tape& tape, const ModelInput& in, const TraceOptions& opt = {}) const {
        check_input(in);
        ForwardGraph g;
        Leaves leaves{&tape, &params_, opt.track_gradients, &g, {}};
        if (cfg_.learned())
            trace_mtan(tape, in, leaves, g);
        else
            trace_prior_time(tape, in, leaves, opt.dropout_rng, g);
        return g;
    }

    /// Inference logits. Uses a private tape; safe to call concurrently on a const model.
    Matrix logits(const ModelInput& in) const {
        ad::Tape tape;
        return trace(tape, in).logits.value();
    }

    /// Starts a recording on the model's own tape for a subsequent loss/backward.
    const ForwardGraph& forward(const ModelInput& in, std::mt19937_64* dropout_rng = nullptr) {
        tape_ = std::make_unique<ad::Tape>();
        graph_ = trace(*tape_, in, {true, dropout_rng});
        input_labels_ = in.labels;
        input_weights_ = in.label_weights();
        return *graph_;
    }

    /// Cross-entropy over labeled slots of the recorded forward, plus the
    /// weighted reconstruction term when configured.
    ad::Var loss(const LossOptions& opt = {}) {
        if (!tape_ || !graph_) throw StateError("loss: no forward pass recorded");
        std::vector<double> w = input_weights_;
        double labeled = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            labeled += w[i];
            if (w[i] > 0.0 && !opt.class_weights.empty())
                w[i] *= opt.class_weights.at(static_cast<std::size_t>(input_labels_[i]));
        }
        if (labeled == 0.0) throw EmptyInputError("loss: sample has no labeled slots");
        const double norm = opt.normalizer > 0.0 ? opt.normalizer : labeled;
        std::vector<int> lbl = input_labels_;
        for (auto& l : lbl) l = std::max(l, 0);
        ad::Var ce = ad::cross_entropy(graph_->logits, lbl, w, norm);
        if (cfg_.reconstruction_weight > 0.0 && graph_->reconstruction) {
            std::vector<double> rw = input_weights_;
            const double width = static_cast<double>(graph_->reconstruction_target.cols());
            ad::Var rec = ad::weighted_squared_error(*graph_->reconstruction,
                                                     graph_->reconstruction_target, rw,
                                                     norm * width);
            ce = ad::add(ce, ad::scale(rec, cfg_.reconstruction_weight));
        }
        return ce;
    }

    /// Accumulates d(loss)/d(parameter) into every parameter's gradient and
    /// ends the recording.
    void backward(ad::Var loss) {
        if (!tape_ || !graph_) throw StateError("backward: no forward pass recorded");
        if (loss.tape != tape_.get()) throw StateError("backward: loss not from the recorded pass");
        tape_->backward(loss);
        for (const auto& [idx, var] : graph_->parameters) params_.all()[idx].grad += tape_->grad(var);
        tape_.reset();
        graph_.reset();
    }

    /// Learned time-embedding parameters per head.
    std::vector<TimeEmbeddingParams> time_params() const {
        if (!cfg_.learned()) throw UnsupportedError("time_params: model uses a prior time scheme");
        std::vector<TimeEmbeddingParams> out;
        for (std::size_t h = 0; h < cfg_.n_heads; ++h) {
            TimeEmbeddingParams p;
            p.head_index = static_cast<int>(h);
            p.omega = params_.at(time_name(h, "omega")).value.data();
            p.alpha = params_.at(time_name(h, "alpha")).value.data();
            out.push_back(std::move(p));
        }
        return out;
    }

    void set_time_params(std::span<const TimeEmbeddingParams> heads) {
        if (!cfg_.learned()) throw UnsupportedError("set_time_params: model uses a prior time scheme");
        if (heads.size() != cfg_.n_heads) throw DimensionError("set_time_params: head count mismatch");
        for (const auto& p : heads) {
            if (p.d() != cfg_.time_dim()) throw DimensionError("set_time_params: width mismatch");
            const auto h = static_cast<std::size_t>(p.head_index);
            params_.at(time_name(h, "omega")).value = Matrix::row(p.omega);
            params_.at(time_name(h, "alpha")).value = Matrix::row(p.alpha);
        }
    }

    TimeActivation time_activation() const {
        return cfg_.scheme == TimeScheme::learned_pulse ? TimeActivation::pulse : TimeActivation::sine;
    }

    static std::string time_name(std::size_t head, const char* what) {
        return "time.h" + std::to_string(head) + "." + what;
    }

private:
    struct Leaves {
        ad::Tape* tape;
        const ParameterStore* store;
        bool track;
        ForwardGraph* graph;
        std::map<std::string, ad::Var> cache;

        ad::Var operator()(const std::string& name) {
            auto it = cache.find(name);
            if (it != cache.end()) return it->second;
            const std::size_t idx = store->index_of(name);
            const Matrix& v = store->all()[idx].value;
            ad::Var var = track ? tape->variable(v) : tape->constant(v);
            if (track) graph->parameters.emplace_back(idx, var);
            cache.emplace(name, var);
            return var;
        }
    };

    static Matrix xavier(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> u(-limit, limit);
        Matrix m(fan_in, fan_out);
        for (auto& v : m.data()) v = u(rng);
        return m;
    }

    void add_linear(const std::string& prefix, std::size_t in, std::size_t out, std::mt19937_64& rng) {
        params_.add(prefix + ".weight", xavier(in, out, rng));
        params_.add(prefix + ".bias", Matrix(1, out));
    }

    void add_block(const std::string& prefix, std::mt19937_64& rng) {
        const std::size_t dm = cfg_.d_model;
        for (const char* w : {"wq", "wk", "wv", "wo"}) params_.add(prefix + ".attn." + w, xavier(dm, dm, rng));
        params_.add(prefix + ".attn.bo", Matrix(1, dm));
        params_.add(prefix + ".norm1.gain", Matrix(1, dm, 1.0));
        params_.add(prefix + ".norm1.bias", Matrix(1, dm));
        add_linear(prefix + ".ff1", dm, cfg_.ff_width, rng);
        add_linear(prefix + ".ff2", cfg_.ff_width, dm, rng);
        params_.add(prefix + ".norm2.gain", Matrix(1, dm, 1.0));
        params_.add(prefix + ".norm2.bias", Matrix(1, dm));
    }

    std::size_t prior_input_width() const { return cfg_.n_features + cfg_.prior_time_width(); }

    void init_prior_time(std::mt19937_64& rng) {
        const std::size_t in = prior_input_width();
        add_linear("input", in, cfg_.d_model, rng);
        for (std::size_t l = 0; l < cfg_.n_encoder_layers; ++l) add_block("encoder." + std::to_string(l), rng);
        for (std::size_t l = 0; l < cfg_.n_decoder_layers; ++l) add_block("decoder." + std::to_string(l), rng);
        add_linear("reconstruction", cfg_.d_model, in, rng);
        add_linear("classifier", in, cfg_.n_classes, rng);
    }

    void init_mtan(std::mt19937_64& rng) {
        const std::size_t d = cfg_.time_dim();
        const std::size_t dv = cfg_.d_model / cfg_.n_heads;
        for (std::size_t h = 0; h < cfg_.n_heads; ++h) {
            const auto tp = TimeEmbeddingParams::random(d, cfg_.time_init_scale, rng, static_cast<int>(h));
            params_.add(time_name(h, "omega"), Matrix::row(tp.omega));
            params_.add(time_name(h, "alpha"), Matrix::row(tp.alpha));
        }
        for (std::size_t h = 0; h < cfg_.n_heads; ++h) {
            const std::string p = "attn.h" + std::to_string(h);
            params_.add(p + ".wq", xavier(d, d, rng));
            params_.add(p + ".wk", xavier(d, d, rng));
            params_.add(p + ".wv", xavier(cfg_.n_features, dv, rng));
        }
        add_linear("attn.out", cfg_.d_model, cfg_.d_model, rng);
        add_linear("classifier", cfg_.d_model, cfg_.n_classes, rng);
    }

    void check_input(const ModelInput& in) const {
        const std::size_t n = in.values.rows();
        if (in.values.cols() != cfg_.n_features) throw DimensionError("input feature width mismatch");
        if (in.mask.size() != n) throw DimensionError("input mask length mismatch");
        const std::size_t out_rows = cfg_.learned() ? cfg_.time_grid : n;
        if (in.labels.size() != out_rows) throw DimensionError("input label count differs from output rows");
        if (std::none_of(in.mask.begin(), in.mask.end(), [](bool b) { return b; }))
            throw EmptyInputError("every observation of the sample is masked");
        if (cfg_.learned()) {
            if (in.key_times.rows() != n || in.key_times.cols() != 1)
                throw ConfigError("learned scheme requires key times for every observation");
            if (in.query_times.rows() != cfg_.time_grid || in.query_times.cols() != 1)
                throw DimensionError("query grid length differs from time_grid");
        } else {
            if (in.prior_time.rows() != n || in.prior_time.cols() != cfg_.prior_time_width())
                throw ConfigError("prior time features do not match the configured scheme");
        }
    }

    static ad::Var linear(Leaves& p, ad::Var x, const std::string& prefix) {
        return ad::add_row(ad::matmul(x, p(prefix + ".weight")), p(prefix + ".bias"));
    }

    ad::Var dropout(ad::Tape& tape, ad::Var x, std::mt19937_64* rng) const {
        if (!rng || cfg_.dropout <= 0.0) return x;
        std::bernoulli_distribution keep(1.0 - cfg_.dropout);
        Matrix m(x.rows(), x.cols());
        const double s = 1.0 / (1.0 - cfg_.dropout);
        for (auto& v : m.data()) v = keep(*rng) ? s : 0.0;
        return ad::hadamard(x, tape.constant(std::move(m)));
    }

    ad::Var self_attention_block(ad::Tape& tape, Leaves& p, ad::Var h, const Matrix& mask,
                                 const std::string& prefix, std::mt19937_64* rng) const {
        const std::size_t dk = cfg_.d_model / cfg_.n_heads;
        ad::Var q = ad::matmul(h, p(prefix + ".attn.wq"));
        ad::Var k = ad::matmul(h, p(prefix + ".attn.wk"));
        ad::Var v = ad::matmul(h, p(prefix + ".attn.wv"));
        std::vector<ad::Var> heads;
        for (std::size_t i = 0; i < cfg_.n_heads; ++i) {
            auto a = ad::attention(ad::slice_cols(q, i * dk, (i + 1) * dk),
                                   ad::slice_cols(k, i * dk, (i + 1) * dk),
                                   ad::slice_cols(v, i * dk, (i + 1) * dk), mask);
            heads.push_back(a.context);
        }
        ad::Var o = ad::add_row(ad::matmul(ad::concat_cols(heads), p(prefix + ".attn.wo")),
                                p(prefix + ".attn.bo"));
        h = ad::layer_norm_rows(ad::add(h, dropout(tape, o, rng)), p(prefix + ".norm1.gain"),
                                p(prefix + ".norm1.bias"));
        ad::Var f = linear(p, ad::relu(linear(p, h, prefix + ".ff1")), prefix + ".ff2");
        return ad::layer_norm_rows(ad::add(h, dropout(tape, f, rng)), p(prefix + ".norm2.gain"),
                                   p(prefix + ".norm2.bias"));
    }

    void trace_prior_time(ad::Tape& tape, const ModelInput& in, Leaves& p, std::mt19937_64* rng,
                          ForwardGraph& g) const {
        const std::size_t n = in.values.rows();
        ad::Var values = tape.constant(in.values);
        ad::Var time = tape.constant(in.prior_time);
        g.time_features = time;
        const ad::Var parts[] = {values, time};
        ad::Var x = ad::concat_cols(parts);
        const Matrix mask = key_mask(in.mask, n);
        ad::Var h = linear(p, x, "input");
        for (std::size_t l = 0; l < cfg_.n_encoder_layers; ++l)
            h = self_attention_block(tape, p, h, mask, "encoder." + std::to_string(l), rng);
        for (std::size_t l = 0; l < cfg_.n_decoder_layers; ++l)
            h = self_attention_block(tape, p, h, mask, "decoder." + std::to_string(l), rng);
        ad::Var rec = linear(p, h, "reconstruction");
        g.reconstruction = rec;
        g.reconstruction_target = x.value();
        g.logits = linear(p, rec, "classifier");
    }

    void trace_mtan(ad::Tape& tape, const ModelInput& in, Leaves& p, ForwardGraph& g) const {
        ad::Var keys_t = tape.constant(in.key_times);
        ad::Var query_t = tape.constant(in.query_times);
        ad::Var values = tape.constant(in.values);
        const Matrix mask = key_mask(in.mask, cfg_.time_grid);
        const TimeActivation act = time_activation();
        std::vector<ad::Var> contexts;
        for (std::size_t h = 0; h < cfg_.n_heads; ++h) {
            ad::Var omega = p(time_name(h, "omega"));
            ad::Var alpha = p(time_name(h, "alpha"));
            ad::Var ke = ad::time_embedding(keys_t, omega, alpha, act, cfg_.pulse);
            ad::Var qe = ad::time_embedding(query_t, omega, alpha, act, cfg_.pulse);
            const std::string pre = "attn.h" + std::to_string(h);
            ad::Var vh = ad::matmul(values, p(pre + ".wv"));
            auto a = ad::attention(ad::matmul(qe, p(pre + ".wq")), ad::matmul(ke, p(pre + ".wk")), vh,
                                   mask);
            g.key_embeddings.push_back(ke);
            g.query_embeddings.push_back(qe);
            g.head_values.push_back(vh);
            g.head_contexts.push_back(a.context);
            g.attention_weights.push_back(a.weights);
            contexts.push_back(a.context);
        }
        ad::Var hidden = ad::relu(linear(p, ad::concat_cols(contexts), "attn.out"));
        g.logits = linear(p, hidden, "classifier");
    }

    ModelConfig cfg_;
    ParameterStore params_;
    std::unique_ptr<ad::Tape> tape_;
    std::optional<ForwardGraph> graph_;
    std::vector<int> input_labels_;
    std::vector<double> input_weights_;
};

/// Row-wise softmax of the logits.
inline Matrix class_probabilities(const Matrix& logits) { return ad::softmax_rows(logits); }

inline std::vector<int> argmax_rows(const Matrix& m) {
    std::vector<int> out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < m.cols(); ++c)
            if (m(r, c) > m(r, best)) best = c;
        out[r] = static_cast<int>(best);
    }
    return out;
}

}  // namespace timerep
