#pragma once

// Recording-level dataset construction: walk-record slicing, fixed-length
// step windows, resampling, the recording-level train/test split and UMAFall
// ingestion. Windows are views into per-recording frame matrices, so a batch
// never copies a frame more than once.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tsfall/codec.hpp"
#include "tsfall/error.hpp"
#include "tsfall/frame.hpp"
#include "tsfall/rng.hpp"

namespace tsfall::dataset {

inline constexpr std::size_t kWindowLength = 64;

inline ChannelSeries slice_augment(const ChannelSeries& series, std::size_t start, std::size_t end) {
    if (series.label != Label::walk)
        throw Error("dataset", Errc::LabelNotWalk, "only walking records are sliced");
    if (!(start < end && end <= series.size()))
        throw Error("dataset", Errc::BadRange,
                    "[" + std::to_string(start) + ", " + std::to_string(end) + ") of " + std::to_string(series.size()));
    ChannelSeries out;
    out.label = series.label;
    out.subject = series.subject;
    out.sample_rate_hz = series.sample_rate_hz;
    out.frames.assign(series.frames.begin() + static_cast<std::ptrdiff_t>(start),
                      series.frames.begin() + static_cast<std::ptrdiff_t>(end));
    return out;
}

struct NamedSeries {
    std::string name;
    ChannelSeries series;
};

struct AugmentConfig {
    std::size_t start = 25;
    std::size_t end = 275;
    std::size_t min_length = 300;
};

// Originals plus one slice per sufficiently long walking record.
inline std::vector<NamedSeries> augment_corpus(const std::vector<NamedSeries>& corpus, const AugmentConfig& cfg = {}) {
    std::vector<NamedSeries> out = corpus;
    for (const auto& ns : corpus) {
        if (ns.series.label != Label::walk || ns.series.size() < cfg.min_length) continue;
        out.push_back({ns.name + "_slice", slice_augment(ns.series, cfg.start, cfg.end)});
    }
    return out;
}

// Fixed-length windows over a set of recordings. Window i is a contiguous
// (length x 20) row-major block of its source's frame matrix.
class WindowBatch {
public:
    struct Source {
        std::string name;
        int label = 0;
        std::size_t frames = 0;
        std::vector<double> data; // frames x kNumChannels
    };
    struct Entry {
        std::uint32_t source;
        std::uint32_t offset;
    };

    WindowBatch() = default;
    WindowBatch(std::shared_ptr<const std::vector<Source>> sources, std::vector<Entry> entries, std::size_t length)
        : sources_(std::move(sources)), entries_(std::move(entries)), length_(length) {}

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    std::size_t length() const { return length_; }
    std::size_t channels() const { return kNumChannels; }

    std::span<const double> window(std::size_t i) const {
        const auto& e = entries_[i];
        const auto& src = (*sources_)[e.source];
        return {src.data.data() + static_cast<std::size_t>(e.offset) * kNumChannels, length_ * kNumChannels};
    }
    int label(std::size_t i) const { return (*sources_)[entries_[i].source].label; }
    std::size_t source_id(std::size_t i) const { return entries_[i].source; }
    const std::vector<Source>& sources() const { return *sources_; }
    std::size_t num_sources() const { return sources_ ? sources_->size() : 0; }
    const std::vector<Entry>& entries() const { return entries_; }

    std::vector<int> labels() const {
        std::vector<int> out(size());
        for (std::size_t i = 0; i < size(); ++i) out[i] = label(i);
        return out;
    }

    std::set<std::size_t> source_set() const {
        std::set<std::size_t> s;
        for (const auto& e : entries_) s.insert(e.source);
        return s;
    }

    // Windows whose source is in `keep`, in original order. Shares source storage.
    WindowBatch select_sources(const std::set<std::size_t>& keep) const {
        std::vector<Entry> e;
        for (const auto& x : entries_)
            if (keep.count(x.source)) e.push_back(x);
        return WindowBatch(sources_, std::move(e), length_);
    }

    WindowBatch select(std::span<const std::size_t> idx) const {
        std::vector<Entry> e;
        e.reserve(idx.size());
        for (auto i : idx) e.push_back(entries_[i]);
        return WindowBatch(sources_, std::move(e), length_);
    }

private:
    std::shared_ptr<const std::vector<Source>> sources_;
    std::vector<Entry> entries_;
    std::size_t length_ = kWindowLength;
};

inline std::vector<double> frame_matrix(const ChannelSeries& s) {
    std::vector<double> m;
    m.reserve(s.size() * kNumChannels);
    for (const auto& f : s.frames) m.insert(m.end(), f.channels.begin(), f.channels.end());
    return m;
}

struct WindowOptions {
    std::size_t length = kWindowLength;
    std::size_t step = 1;
};

struct WindowResult {
    WindowBatch batch;
    std::vector<std::string> skipped; // recordings shorter than the window
};

inline WindowResult make_windows(const std::vector<NamedSeries>& corpus, const WindowOptions& opt = {}) {
    if (opt.length == 0 || opt.step == 0) throw Error("dataset", Errc::BadRange, "window length and step must be positive");
    auto sources = std::make_shared<std::vector<WindowBatch::Source>>();
    std::vector<WindowBatch::Entry> entries;
    WindowResult out;
    for (const auto& ns : corpus) {
        if (ns.series.size() < opt.length) {
            out.skipped.push_back(ns.name);
            continue;
        }
        const auto sid = static_cast<std::uint32_t>(sources->size());
        sources->push_back({ns.name, binary_label(ns.series.label), ns.series.size(), frame_matrix(ns.series)});
        for (std::size_t off = 0; off + opt.length <= ns.series.size(); off += opt.step)
            entries.push_back({sid, static_cast<std::uint32_t>(off)});
    }
    if (entries.empty()) throw Error("dataset", Errc::AllTooShort, "no recording has " + std::to_string(opt.length) + " frames");
    out.batch = WindowBatch(std::move(sources), std::move(entries), opt.length);
    return out;
}

inline WindowResult make_windows(const std::vector<ChannelSeries>& series, const WindowOptions& opt = {}) {
    std::vector<NamedSeries> named;
    named.reserve(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) named.push_back({"series" + std::to_string(i), series[i]});
    return make_windows(named, opt);
}

struct SourceSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// Assigns whole recordings to one side, stratified by label. Within a class,
// round(ratio * n) recordings go to training.
inline SourceSplit split_sources(std::span<const int> source_labels, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0))
        throw Error("dataset", Errc::InsufficientSources, "ratio must lie in (0, 1) so both sides are nonempty");
    SourceSplit out;
    Rng rng(seed);
    for (int cls : {0, 1}) {
        std::vector<std::size_t> ids;
        for (std::size_t i = 0; i < source_labels.size(); ++i)
            if (source_labels[i] == cls) ids.push_back(i);
        if (ids.size() < 2)
            throw Error("dataset", Errc::InsufficientSources,
                        "class " + std::to_string(cls) + " has " + std::to_string(ids.size()) + " recordings, need 2");
        rng.shuffle(std::span<std::size_t>(ids));
        auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(ids.size())));
        n_train = std::clamp<std::size_t>(n_train, 1, ids.size() - 1);
        out.train.insert(out.train.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
        out.test.insert(out.test.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

inline std::pair<WindowBatch, WindowBatch> split(const WindowBatch& batch, double ratio, std::uint64_t seed) {
    std::vector<int> labels;
    for (const auto& s : batch.sources()) labels.push_back(s.label);
    auto ss = split_sources(labels, ratio, seed);
    const std::set<std::size_t> tr(ss.train.begin(), ss.train.end());
    const std::set<std::size_t> te(ss.test.begin(), ss.test.end());
    return {batch.select_sources(tr), batch.select_sources(te)};
}

// Linear interpolation onto a uniform grid. Output timestamps are
// first + round(i * 1000 / target_hz) ms, so a grid point that lands on an
// input timestamp reproduces the input sample exactly.
inline ChannelSeries resample(const ChannelSeries& series, double target_hz) {
    if (!(target_hz > 0.0) || !std::isfinite(target_hz)) throw Error("dataset", Errc::BadRange, "target_hz must be positive");
    if (series.empty()) throw Error("dataset", Errc::EmptySeries, "");
    const auto& fr = series.frames;
    const std::int64_t t0 = fr.front().timestamp_ms;
    const double duration_s = static_cast<double>(fr.back().timestamp_ms - t0) / 1000.0;
    const auto n = static_cast<std::size_t>(std::llround(duration_s * target_hz)) + 1;
    ChannelSeries out;
    out.label = series.label;
    out.subject = series.subject;
    out.sample_rate_hz = target_hz;
    out.frames.resize(n);
    std::size_t k = 0; // fr[k].timestamp <= t < fr[k+1].timestamp
    for (std::size_t i = 0; i < n; ++i) {
        const std::int64_t t = t0 + std::llround(static_cast<double>(i) * 1000.0 / target_hz);
        auto& f = out.frames[i];
        f.timestamp_ms = t;
        while (k + 1 < fr.size() && fr[k + 1].timestamp_ms <= t) ++k;
        if (k + 1 >= fr.size() || t <= fr[k].timestamp_ms) {
            f.channels = fr[k].channels;
            continue;
        }
        const auto& a = fr[k];
        const auto& b = fr[k + 1];
        const double w = static_cast<double>(t - a.timestamp_ms) / static_cast<double>(b.timestamp_ms - a.timestamp_ms);
        for (std::size_t c = 0; c < kNumChannels; ++c) f.channels[c] = a.channels[c] + w * (b.channels[c] - a.channels[c]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Corpus directories: `<name>.csv` logs with `<name>.meta` sidecars, plus an
// optional `split.manifest` of `train=<name>` / `test=<name>` lines.

inline std::vector<NamedSeries> load_corpus(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    std::error_code ec;
    for (const auto& e : std::filesystem::directory_iterator(dir, ec))
        if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    if (ec) throw Error("dataset", Errc::Io, "cannot list " + dir.string() + ": " + ec.message());
    std::sort(files.begin(), files.end());
    std::vector<NamedSeries> out;
    for (const auto& f : files) out.push_back({f.stem().string(), codec::read_log(f)});
    if (out.empty()) throw Error("dataset", Errc::EmptySeries, "no .csv logs in " + dir.string());
    return out;
}

inline void save_corpus(const std::filesystem::path& dir, const std::vector<NamedSeries>& corpus) {
    std::filesystem::create_directories(dir);
    for (const auto& ns : corpus) codec::write_log(dir / (ns.name + ".csv"), ns.series);
}

struct SplitManifest {
    std::vector<std::string> train;
    std::vector<std::string> test;
};

inline void write_split_manifest(const std::filesystem::path& dir, const SplitManifest& m, double ratio, std::uint64_t seed) {
    std::string s = "ratio=" + codec::format_rate(ratio) + "\nseed=" + std::to_string(seed) + "\n";
    for (const auto& n : m.train) s += "train=" + n + "\n";
    for (const auto& n : m.test) s += "test=" + n + "\n";
    codec::write_text_atomic(dir / "split.manifest", s, "dataset");
}

inline SplitManifest read_split_manifest(const std::filesystem::path& dir) {
    std::ifstream in(dir / "split.manifest");
    if (!in) throw Error("dataset", Errc::Io, "missing " + (dir / "split.manifest").string());
    SplitManifest m;
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("train=", 0) == 0) m.train.push_back(line.substr(6));
        else if (line.rfind("test=", 0) == 0) m.test.push_back(line.substr(5));
    }
    return m;
}

// Splits a loaded corpus by recording and returns the membership by name.
inline SplitManifest split_corpus(const std::vector<NamedSeries>& corpus, double ratio, std::uint64_t seed) {
    std::vector<int> labels;
    for (const auto& ns : corpus) labels.push_back(binary_label(ns.series.label));
    auto ss = split_sources(labels, ratio, seed);
    SplitManifest m;
    for (auto i : ss.train) m.train.push_back(corpus[i].name);
    for (auto i : ss.test) m.test.push_back(corpus[i].name);
    return m;
}

inline std::pair<std::vector<NamedSeries>, std::vector<NamedSeries>> apply_split(const std::vector<NamedSeries>& corpus,
                                                                                  const SplitManifest& m) {
    const std::set<std::string> tr(m.train.begin(), m.train.end());
    const std::set<std::string> te(m.test.begin(), m.test.end());
    std::pair<std::vector<NamedSeries>, std::vector<NamedSeries>> out;
    for (const auto& ns : corpus) {
        if (tr.count(ns.name)) out.first.push_back(ns);
        else if (te.count(ns.name)) out.second.push_back(ns);
    }
    return out;
}

// ---------------------------------------------------------------------------
// UMAFall ingestion. Each trial file holds '%'-prefixed comment lines and
// `timestamp;sample_no;x;y;z;sensor_type;sensor_id` rows. Sensor type 0 is the
// accelerometer and 1 the gyroscope. The selected sensing point's
// accelerometer and gyroscope land in the left-foot acc/gyro channels; the
// remaining channels stay zero.

struct UmafallConfig {
    int sensor_id = 4; // ankle, the sensing point nearest the foot
    double target_hz = kNominalRateHz;
};

inline Label umafall_label(const std::string& filename) {
    std::string f = filename;
    std::transform(f.begin(), f.end(), f.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (f.find("_fall_") != std::string::npos)
        return f.find("lateral") != std::string::npos ? Label::fall_left : Label::fall_forward;
    if (f.find("_adl_") != std::string::npos) return Label::walk;
    throw Error("dataset", Errc::UnknownTrialType, filename);
}

inline ChannelSeries read_umafall_trial(const std::filesystem::path& path, const UmafallConfig& cfg) {
    const Label label = umafall_label(path.filename().string());
    std::ifstream in(path);
    if (!in) throw Error("dataset", Errc::Io, "cannot open " + path.string());
    struct Sample {
        std::int64_t t;
        double x, y, z;
    };
    std::vector<Sample> acc, gyro;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '%') continue;
        std::vector<std::string_view> tok;
        std::string_view sv(line);
        std::size_t pos = 0;
        while (true) {
            auto semi = sv.find(';', pos);
            auto t = sv.substr(pos, semi == std::string_view::npos ? std::string_view::npos : semi - pos);
            while (!t.empty() && t.front() == ' ') t.remove_prefix(1);
            while (!t.empty() && t.back() == ' ') t.remove_suffix(1);
            tok.push_back(t);
            if (semi == std::string_view::npos) break;
            pos = semi + 1;
        }
        if (tok.size() < 7) throw Error("dataset", Errc::MalformedRecord, path.string() + ":" + std::to_string(lineno));
        auto ts = codec::detail::parse_int(tok[0]);
        auto x = codec::detail::parse_real(tok[2]);
        auto y = codec::detail::parse_real(tok[3]);
        auto z = codec::detail::parse_real(tok[4]);
        auto type = codec::detail::parse_int(tok[5]);
        auto id = codec::detail::parse_int(tok[6]);
        if (!ts || !x || !y || !z || !type || !id)
            throw Error("dataset", Errc::MalformedRecord, path.string() + ":" + std::to_string(lineno));
        if (*id != cfg.sensor_id) continue;
        if (*type == 0) acc.push_back({*ts, *x, *y, *z});
        else if (*type == 1) gyro.push_back({*ts, *x, *y, *z});
    }
    if (acc.empty())
        throw Error("dataset", Errc::MissingSensor, path.filename().string() + " has no accelerometer for sensor " +
                                                        std::to_string(cfg.sensor_id));
    auto by_time = [](const Sample& a, const Sample& b) { return a.t < b.t; };
    std::stable_sort(acc.begin(), acc.end(), by_time);
    std::stable_sort(gyro.begin(), gyro.end(), by_time);
    ChannelSeries raw;
    raw.label = label;
    raw.subject = path.stem().string();
    const std::int64_t t0 = acc.front().t;
    std::size_t g = 0;
    for (const auto& a : acc) {
        SensorFrame f;
        f.timestamp_ms = a.t - t0;
        f.channels[ch::l_acc_x] = a.x;
        f.channels[ch::l_acc_x + 1] = a.y;
        f.channels[ch::l_acc_x + 2] = a.z;
        while (g + 1 < gyro.size() && gyro[g + 1].t <= a.t) ++g;
        if (!gyro.empty() && gyro[g].t <= a.t) {
            f.channels[ch::l_gyro_x] = gyro[g].x;
            f.channels[ch::l_gyro_x + 1] = gyro[g].y;
            f.channels[ch::l_gyro_x + 2] = gyro[g].z;
        }
        raw.frames.push_back(f);
    }
    // Collapse duplicate timestamps so interpolation has strictly increasing knots.
    std::vector<SensorFrame> uniq;
    for (const auto& f : raw.frames)
        if (uniq.empty() || f.timestamp_ms > uniq.back().timestamp_ms) uniq.push_back(f);
    raw.frames = std::move(uniq);
    if (raw.size() >= 2) {
        raw.sample_rate_hz = 1000.0 * static_cast<double>(raw.size() - 1) /
                             static_cast<double>(raw.frames.back().timestamp_ms);
    }
    return resample(raw, cfg.target_hz);
}

inline std::vector<NamedSeries> ingest_umafall(const std::filesystem::path& dir, const UmafallConfig& cfg = {}) {
    std::vector<std::filesystem::path> files;
    std::error_code ec;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir, ec))
        if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    if (ec) throw Error("dataset", Errc::Io, "cannot list " + dir.string() + ": " + ec.message());
    std::sort(files.begin(), files.end());
    std::vector<NamedSeries> out;
    for (const auto& f : files) out.push_back({f.stem().string(), read_umafall_trial(f, cfg)});
    if (out.empty()) throw Error("dataset", Errc::EmptySeries, "no UMAFall trials under " + dir.string());
    return out;
}

} // namespace tsfall::dataset
