#pragma once

// Run configuration: every tunable of the pipeline, loaded from key=value
// text and overridable per flag. Unknown keys and out-of-range values are
// rejected before any work starts. One seed drives split, initialisation,
// dropout and chunk randomisation.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tsfall/baselines.hpp"
#include "tsfall/codec.hpp"
#include "tsfall/dataset.hpp"
#include "tsfall/error.hpp"
#include "tsfall/filter.hpp"
#include "tsfall/models.hpp"
#include "tsfall/stream.hpp"
#include "tsfall/training.hpp"

namespace tsfall::config {

struct RunConfig {
    std::uint64_t seed = 0;
    filter::KalmanParams kalman;
    dataset::WindowOptions window;
    dataset::AugmentConfig augment;
    double split_ratio = 0.7;
    double valid_ratio = 0.8;
    models::TcnConfig model;
    training::TrainOptions train;
    baselines::LstmConfig lstm;
    baselines::SvmOptions svm;
    baselines::TreeOptions tree;
    stream::StreamConfig stream;
    double speedup = 0.0;
    std::string registry_address = "127.0.0.1:9000";
    dataset::UmafallConfig umafall;

    RunConfig() {
        train.epochs = 30;
        train.class_weighted = true;
    }

    void validate() const {
        kalman.validate();
        if (window.length == 0 || window.step == 0) throw bad("window.length and window.step must be positive");
        if (augment.start >= augment.end) throw bad("augment.start must be < augment.end");
        if (augment.min_length < augment.end) throw bad("augment.min_length must be >= augment.end");
        if (!(split_ratio > 0 && split_ratio < 1)) throw bad("split.ratio must lie in (0, 1)");
        if (!(valid_ratio > 0 && valid_ratio < 1)) throw bad("train.valid_ratio must lie in (0, 1)");
        (void)model.validate();
        if (model.window_length != window.length) throw bad("model window length must equal window.length");
        if (train.batch_size == 0) throw bad("train.batch_size must be positive");
        if (!(train.lr >= 0)) throw bad("train.lr must be >= 0");
        if (lstm.hidden == 0) throw bad("lstm.hidden must be positive");
        if (!(svm.lambda > 0)) throw bad("svm.lambda must be positive");
        if (tree.min_leaf == 0) throw bad("tree.min_leaf must be positive");
        stream.validate();
        if (!(speedup >= 0)) throw bad("stream.speedup must be >= 0");
        if (!(umafall.target_hz > 0)) throw bad("umafall.target_hz must be positive");
    }

private:
    static Error bad(const std::string& m) { return Error("cli", Errc::BadConfig, m); }
};

namespace detail {
template <class T>
T parse_num(const std::string& key, const std::string& v) {
    T out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw Error("cli", Errc::BadConfig, key + ": cannot parse '" + v + "'");
    return out;
}
inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw Error("cli", Errc::BadConfig, key + ": expected true/false, got '" + v + "'");
}
inline std::vector<std::size_t> parse_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_num<std::size_t>(key, item));
    return out;
}
} // namespace detail

// Applies one key. Throws BadConfig for unknown keys or unparsable values.
inline void set(RunConfig& c, const std::string& key, const std::string& v) {
    using detail::parse_bool;
    using detail::parse_list;
    using detail::parse_num;
    static const std::map<std::string, void (*)(RunConfig&, const std::string&, const std::string&)> setters = {
        {"seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_num<std::uint64_t>(k, v); }},
        {"kalman.q", [](RunConfig& c, const std::string& k, const std::string& v) { c.kalman.q = parse_num<double>(k, v); }},
        {"kalman.r", [](RunConfig& c, const std::string& k, const std::string& v) { c.kalman.r = parse_num<double>(k, v); }},
        {"kalman.p0", [](RunConfig& c, const std::string& k, const std::string& v) { c.kalman.p0 = parse_num<double>(k, v); }},
        {"window.length", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.window.length = parse_num<std::size_t>(k, v);
             c.model.window_length = c.window.length;
             c.lstm.window_length = c.window.length;
             c.stream.window_length = c.window.length;
         }},
        {"window.step", [](RunConfig& c, const std::string& k, const std::string& v) { c.window.step = parse_num<std::size_t>(k, v); }},
        {"augment.start", [](RunConfig& c, const std::string& k, const std::string& v) { c.augment.start = parse_num<std::size_t>(k, v); }},
        {"augment.end", [](RunConfig& c, const std::string& k, const std::string& v) { c.augment.end = parse_num<std::size_t>(k, v); }},
        {"augment.min_length", [](RunConfig& c, const std::string& k, const std::string& v) { c.augment.min_length = parse_num<std::size_t>(k, v); }},
        {"split.ratio", [](RunConfig& c, const std::string& k, const std::string& v) { c.split_ratio = parse_num<double>(k, v); }},
        {"train.valid_ratio", [](RunConfig& c, const std::string& k, const std::string& v) { c.valid_ratio = parse_num<double>(k, v); }},
        {"model.width", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.width = parse_num<std::size_t>(k, v); }},
        {"model.kernel", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.kernel = parse_num<std::size_t>(k, v); }},
        {"model.dilations", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.dilations = parse_list(k, v); }},
        {"model.dropout", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.dropout = parse_num<double>(k, v); }},
        {"train.epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.epochs = parse_num<std::size_t>(k, v); }},
        {"train.lr", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.lr = parse_num<double>(k, v); }},
        {"train.batch_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.batch_size = parse_num<std::size_t>(k, v); }},
        {"train.patience", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.patience = parse_num<std::size_t>(k, v); }},
        {"train.early_stopping", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.early_stopping = parse_bool(k, v); }},
        {"train.class_weighted", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.class_weighted = parse_bool(k, v); }},
        {"lstm.hidden", [](RunConfig& c, const std::string& k, const std::string& v) { c.lstm.hidden = parse_num<std::size_t>(k, v); }},
        {"svm.lambda", [](RunConfig& c, const std::string& k, const std::string& v) { c.svm.lambda = parse_num<double>(k, v); }},
        {"svm.epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.svm.epochs = parse_num<std::size_t>(k, v); }},
        {"tree.max_depth", [](RunConfig& c, const std::string& k, const std::string& v) { c.tree.max_depth = parse_num<std::size_t>(k, v); }},
        {"tree.min_leaf", [](RunConfig& c, const std::string& k, const std::string& v) { c.tree.min_leaf = parse_num<std::size_t>(k, v); }},
        {"stream.threshold", [](RunConfig& c, const std::string& k, const std::string& v) { c.stream.threshold = parse_num<double>(k, v); }},
        {"stream.refractory_ms", [](RunConfig& c, const std::string& k, const std::string& v) { c.stream.refractory_ms = parse_num<std::int64_t>(k, v); }},
        {"stream.queue_capacity", [](RunConfig& c, const std::string& k, const std::string& v) { c.stream.queue_capacity = parse_num<std::size_t>(k, v); }},
        {"stream.speedup", [](RunConfig& c, const std::string& k, const std::string& v) { c.speedup = parse_num<double>(k, v); }},
        {"registry.address", [](RunConfig& c, const std::string&, const std::string& v) { c.registry_address = v; }},
        {"umafall.sensor_id", [](RunConfig& c, const std::string& k, const std::string& v) { c.umafall.sensor_id = parse_num<int>(k, v); }},
        {"umafall.target_hz", [](RunConfig& c, const std::string& k, const std::string& v) { c.umafall.target_hz = parse_num<double>(k, v); }},
    };
    auto it = setters.find(key);
    if (it == setters.end()) throw Error("cli", Errc::BadConfig, "unknown config key '" + key + "'");
    it->second(c, key, v);
}

inline void apply_overrides(RunConfig& c, const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv) set(c, k, v);
}

inline RunConfig load(const std::filesystem::path& path) {
    RunConfig c;
    apply_overrides(c, codec::read_kv_file(path, "cli"));
    return c;
}

} // namespace tsfall::config
