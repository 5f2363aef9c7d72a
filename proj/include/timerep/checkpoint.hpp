#pragma once

// Checkpoint container: `<prefix>.json` holds the model configuration, the
// data context and a parameter table (name, shape, element offset); the
// parameters themselves are a flat array of little-endian float32 in
// `<prefix>.bin`, in table order.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "timerep/errors.hpp"
#include "timerep/learned_embeddings.hpp"
#include "timerep/model.hpp"

namespace timerep {

inline constexpr int kCheckpointVersion = 1;

/// Rounds every parameter to float32, the precision stored on disk.
inline void round_to_float32(ParameterStore& store) {
    for (auto& p : store.all())
        for (auto& v : p.value.data()) v = static_cast<double>(static_cast<float>(v));
}

inline nlohmann::ordered_json model_config_to_json(const ModelConfig& c) {
    nlohmann::ordered_json j;
    j["scheme"] = std::string(to_string(c.scheme));
    j["d_model"] = c.d_model;
    j["n_heads"] = c.n_heads;
    j["n_encoder_layers"] = c.n_encoder_layers;
    j["n_decoder_layers"] = c.n_decoder_layers;
    j["ff_width"] = c.ff_width;
    j["dropout"] = c.dropout;
    j["n_classes"] = c.n_classes;
    j["time_grid"] = c.time_grid;
    j["n_features"] = c.n_features;
    j["time_normalization"] = std::string(to_string(c.time_normalization));
    j["time_init_scale"] = c.time_init_scale;
    j["pulse_peak_index"] = c.pulse.peak_index;
    j["pulse_percentile"] = c.pulse.percentile;
    j["pulse_gradient"] = c.pulse.gradient == PercentileGradient::exact ? "exact" : "frozen";
    j["reconstruction_weight"] = c.reconstruction_weight;
    j["seed"] = c.seed;
    return j;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.scheme = parse_scheme(j.at("scheme").get<std::string>());
    c.d_model = j.at("d_model").get<std::size_t>();
    c.n_heads = j.at("n_heads").get<std::size_t>();
    c.n_encoder_layers = j.at("n_encoder_layers").get<std::size_t>();
    c.n_decoder_layers = j.at("n_decoder_layers").get<std::size_t>();
    c.ff_width = j.at("ff_width").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    c.n_classes = j.at("n_classes").get<std::size_t>();
    c.time_grid = j.at("time_grid").get<std::size_t>();
    c.n_features = j.at("n_features").get<std::size_t>();
    c.time_normalization = parse_time_normalization(j.at("time_normalization").get<std::string>());
    c.time_init_scale = j.at("time_init_scale").get<double>();
    c.pulse.peak_index = j.at("pulse_peak_index").get<std::size_t>();
    c.pulse.percentile = j.at("pulse_percentile").get<double>();
    c.pulse.gradient = j.at("pulse_gradient").get<std::string>() == "frozen" ? PercentileGradient::frozen
                                                                             : PercentileGradient::exact;
    c.reconstruction_weight = j.at("reconstruction_weight").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

inline nlohmann::ordered_json context_to_json(const DataContext& c) {
    nlohmann::ordered_json j;
    j["range_start"] = c.range_start;
    j["range_end"] = c.range_end;
    j["utc_offset_seconds"] = c.utc_offset_seconds;
    j["site"] = {{"latitude", c.prior.site.latitude}, {"longitude", c.prior.site.longitude}};
    j["fixed_pulse"] = {c.prior.fixed_pulse.start_hour, c.prior.fixed_pulse.peak_hour,
                        c.prior.fixed_pulse.end_hour, c.prior.fixed_pulse.floor};
    j["pulse_peak"] = c.prior.peak == PulsePeak::solar_noon ? "solar_noon" : "clock_noon";
    j["sawtooth"] = {c.prior.sawtooth.hour_shift, c.prior.sawtooth.hour_period,
                     c.prior.sawtooth.month_shift, c.prior.sawtooth.month_period};
    j["feature_mean"] = c.feature_mean;
    j["feature_std"] = c.feature_std;
    j["thresholds"] = c.thresholds;
    return j;
}

inline DataContext context_from_json(const nlohmann::json& j) {
    DataContext c;
    c.range_start = j.at("range_start").get<std::int64_t>();
    c.range_end = j.at("range_end").get<std::int64_t>();
    c.utc_offset_seconds = j.at("utc_offset_seconds").get<int>();
    c.prior.site = {j.at("site").at("latitude").get<double>(), j.at("site").at("longitude").get<double>()};
    const auto fp = j.at("fixed_pulse").get<std::vector<double>>();
    if (fp.size() != 4) throw DataError("checkpoint: fixed_pulse needs 4 values");
    c.prior.fixed_pulse = {fp[0], fp[1], fp[2], fp[3]};
    c.prior.peak = j.at("pulse_peak").get<std::string>() == "clock_noon" ? PulsePeak::clock_noon
                                                                         : PulsePeak::solar_noon;
    const auto sw = j.at("sawtooth").get<std::vector<double>>();
    if (sw.size() != 4) throw DataError("checkpoint: sawtooth needs 4 values");
    c.prior.sawtooth = {sw[0], sw[1], sw[2], sw[3]};
    c.feature_mean = j.at("feature_mean").get<std::vector<double>>();
    c.feature_std = j.at("feature_std").get<std::vector<double>>();
    c.thresholds = j.at("thresholds").get<std::vector<double>>();
    return c;
}

struct Checkpoint {
    Model model;
    DataContext context;
    std::optional<std::vector<TimeEmbeddingParams>> initial_time;  // learned schemes
    nlohmann::json info;  // free-form run details
};

namespace detail {

inline void write_f32_le(std::ostream& out, double v) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    const char bytes[4] = {static_cast<char>(bits & 0xFF), static_cast<char>((bits >> 8) & 0xFF),
                           static_cast<char>((bits >> 16) & 0xFF), static_cast<char>((bits >> 24) & 0xFF)};
    out.write(bytes, 4);
}

inline double read_f32_le(const unsigned char* p) {
    const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                               (static_cast<std::uint32_t>(p[2]) << 16) |
                               (static_cast<std::uint32_t>(p[3]) << 24);
    return static_cast<double>(std::bit_cast<float>(bits));
}

inline std::string initial_name(std::size_t head, const char* what) {
    return "initial." + Model::time_name(head, what);
}

}  // namespace detail

inline void save_checkpoint(const std::string& prefix, const Checkpoint& ck) {
    const auto dir = std::filesystem::path(prefix).parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    struct Entry {
        std::string name;
        const Matrix* value;
    };
    std::vector<Entry> entries;
    for (const auto& p : ck.model.parameters().all()) entries.push_back({p.name, &p.value});
    std::vector<Matrix> initial;
    if (ck.initial_time) {
        for (const auto& h : *ck.initial_time) {
            initial.push_back(Matrix::row(h.omega));
            initial.push_back(Matrix::row(h.alpha));
        }
        for (std::size_t h = 0; h < ck.initial_time->size(); ++h) {
            entries.push_back({detail::initial_name(h, "omega"), &initial[2 * h]});
            entries.push_back({detail::initial_name(h, "alpha"), &initial[2 * h + 1]});
        }
    }
    nlohmann::ordered_json j;
    j["format"] = "timerep-checkpoint";
    j["version"] = kCheckpointVersion;
    j["dtype"] = "float32";
    j["byte_order"] = "little";
    j["binary"] = std::filesystem::path(prefix + ".bin").filename().string();
    j["model"] = model_config_to_json(ck.model.config());
    j["data"] = context_to_json(ck.context);
    nlohmann::ordered_json table = nlohmann::ordered_json::array();
    std::size_t offset = 0;
    for (const auto& e : entries) {
        table.push_back({{"name", e.name},
                         {"shape", {e.value->rows(), e.value->cols()}},
                         {"offset", offset}});
        offset += e.value->size();
    }
    j["parameters"] = table;
    j["n_values"] = offset;
    j["info"] = ck.info.is_null() ? nlohmann::json::object() : ck.info;

    std::ofstream bin(prefix + ".bin", std::ios::binary);
    if (!bin) throw DataError("cannot write checkpoint binary '" + prefix + ".bin'");
    for (const auto& e : entries)
        for (double v : e.value->data()) detail::write_f32_le(bin, v);
    std::ofstream js(prefix + ".json");
    if (!js) throw DataError("cannot write checkpoint '" + prefix + ".json'");
    js << j.dump(2) << '\n';
}

/// Accepts the prefix or either file of the pair.
inline std::string checkpoint_prefix(std::string path) {
    for (const char* ext : {".json", ".bin"}) {
        const std::string e(ext);
        if (path.size() > e.size() && path.compare(path.size() - e.size(), e.size(), e) == 0)
            return path.substr(0, path.size() - e.size());
    }
    return path;
}

inline Checkpoint load_checkpoint(const std::string& path) {
    const std::string prefix = checkpoint_prefix(path);
    std::ifstream js(prefix + ".json");
    if (!js) throw DataError("cannot open checkpoint '" + prefix + ".json'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(js);
        if (j.at("format").get<std::string>() != "timerep-checkpoint")
            throw DataError("not a checkpoint file: " + prefix + ".json");
        if (j.at("dtype").get<std::string>() != "float32" || j.at("byte_order").get<std::string>() != "little")
            throw DataError("checkpoint: unsupported dtype or byte order");
        ModelConfig cfg = model_config_from_json(j.at("model"));
        Checkpoint ck{Model(cfg), context_from_json(j.at("data")), std::nullopt, j.value("info", nlohmann::json::object())};

        std::ifstream bin(prefix + ".bin", std::ios::binary);
        if (!bin) throw DataError("cannot open checkpoint binary '" + prefix + ".bin'");
        std::vector<unsigned char> raw((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
        const std::size_t n_values = j.at("n_values").get<std::size_t>();
        if (raw.size() != 4 * n_values) throw DataError("checkpoint binary size does not match its table");

        std::vector<TimeEmbeddingParams> initial;
        std::size_t seen = 0;
        for (const auto& e : j.at("parameters")) {
            const std::string name = e.at("name").get<std::string>();
            const auto shape = e.at("shape").get<std::vector<std::size_t>>();
            const std::size_t off = e.at("offset").get<std::size_t>();
            if (shape.size() != 2 || off + shape[0] * shape[1] > n_values)
                throw DataError("checkpoint: bad table entry for '" + name + "'");
            Matrix m(shape[0], shape[1]);
            for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = detail::read_f32_le(&raw[4 * (off + i)]);
            if (name.rfind("initial.", 0) == 0) {
                // initial.time.h<k>.omega / alpha
                constexpr std::size_t kHeadPos = std::char_traits<char>::length("initial.time.h");
                const auto dot = name.find('.', kHeadPos);
                const std::size_t head = std::stoul(name.substr(kHeadPos, dot - kHeadPos));
                if (initial.size() <= head) initial.resize(head + 1);
                initial[head].head_index = static_cast<int>(head);
                (name.ends_with("omega") ? initial[head].omega : initial[head].alpha) = m.data();
                continue;
            }
            if (!ck.model.parameters().contains(name))
                throw DimensionError("checkpoint parameter '" + name + "' unknown to the model");
            Parameter& p = ck.model.parameters().at(name);
            if (!p.value.same_shape(m)) throw DimensionError("checkpoint parameter '" + name + "' has wrong shape");
            p.value = std::move(m);
            ++seen;
        }
        if (seen != ck.model.parameters().size()) throw DimensionError("checkpoint is missing model parameters");
        if (!initial.empty()) {
            for (auto& h : initial) h.validate();
            ck.initial_time = std::move(initial);
        }
        return ck;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint '" + prefix + ".json': " + e.what());
    } catch (const std::invalid_argument& e) {
        if (dynamic_cast<const DimensionError*>(&e)) throw;
        throw DataError("checkpoint '" + prefix + ".json': " + e.what());
    }
}

/// The model whose time layers hold the initialization recorded in the checkpoint.
inline Model initial_stage_model(const Checkpoint& ck) {
    if (!ck.initial_time) throw UnsupportedError("checkpoint has no initial time parameters");
    Model m = ck.model;
    m.set_time_params(*ck.initial_time);
    return m;
}

}  // namespace timerep
