#pragma once

// Text wire format for sensor frames.
//
// One record per line: `timestamp_ms` followed by the 20 channels in
// kChannelNames order, comma separated, terminated by '\n'. A trailing '\r'
// is tolerated. Records that fail to decode are skipped and reported so a
// live stream survives corruption.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tsfall/error.hpp"
#include "tsfall/frame.hpp"

namespace tsfall::codec {

struct MalformedReport {
    std::size_t record_index = 0; // 1-based position among all terminated records
    std::size_t bytes = 0;        // including the terminator
    std::string reason;
};

struct FeedResult {
    std::vector<SensorFrame> frames;
    std::vector<MalformedReport> malformed;
};

namespace detail {

inline std::optional<double> parse_real(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    if (!std::isfinite(v)) return std::nullopt;
    return v + 0.0; // -0.0 becomes +0.0
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
    if (s.empty()) return std::nullopt;
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

// Decodes one record without its terminator. Returns the failure reason on error.
inline std::optional<std::string> decode_record(std::string_view line, SensorFrame& out) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::size_t field = 0;
    std::size_t pos = 0;
    while (true) {
        const std::size_t comma = line.find(',', pos);
        const std::string_view tok =
            line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
        if (field == 0) {
            auto ts = parse_int(tok);
            if (!ts) return "non-integer timestamp '" + std::string(tok) + "'";
            if (*ts < 0) return "negative timestamp";
            out.timestamp_ms = *ts;
        } else if (field <= kNumChannels) {
            auto v = parse_real(tok);
            if (!v) return "bad value in field " + std::to_string(field) + " '" + std::string(tok) + "'";
            out.channels[field - 1] = *v;
        }
        ++field;
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    if (field != kNumChannels + 1)
        return "expected " + std::to_string(kNumChannels + 1) + " fields, got " + std::to_string(field);
    return std::nullopt;
}

inline void append_real(std::string& out, double v) {
    char buf[64];
    int n = std::snprintf(buf, sizeof buf, "%.6f", v);
    std::string_view s(buf, static_cast<std::size_t>(n));
    // Trim to the shortest form that keeps one fractional digit.
    while (s.size() > 2 && s.back() == '0' && s[s.size() - 2] != '.') s.remove_suffix(1);
    if (s == "-0.0") s = "0.0";
    out.append(s);
}

} // namespace detail

// Reassembles arbitrary byte fragments into records. Single owner; one per stream.
class FrameAccumulator {
public:
    FeedResult feed_bytes(std::string_view chunk) {
        FeedResult out;
        std::size_t start = 0;
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            if (chunk[i] != '\n') continue;
            std::string_view rec;
            if (pending_.empty()) {
                rec = std::string_view(chunk.data() + start, i - start);
                finish_record(rec, out);
            } else {
                pending_.append(chunk.data() + start, i - start);
                finish_record(pending_, out);
                pending_.clear();
            }
            start = i + 1;
        }
        pending_.append(chunk.data() + start, chunk.size() - start);
        consumed_ += chunk.size();
        return out;
    }

    FeedResult feed_bytes(std::span<const std::uint8_t> chunk) {
        return feed_bytes(std::string_view(reinterpret_cast<const char*>(chunk.data()), chunk.size()));
    }

    const std::string& pending() const { return pending_; }
    std::size_t emitted_count() const { return emitted_; }
    std::size_t emitted_bytes() const { return emitted_bytes_; }
    std::size_t malformed_bytes() const { return malformed_bytes_; }
    std::size_t consumed_bytes() const { return consumed_; }

private:
    void finish_record(std::string_view rec, FeedResult& out) {
        ++records_;
        SensorFrame f;
        auto err = detail::decode_record(rec, f);
        if (!err && last_ts_ && f.timestamp_ms < *last_ts_) err = "timestamp went backwards";
        if (err) {
            malformed_bytes_ += rec.size() + 1;
            out.malformed.push_back({records_, rec.size() + 1, std::move(*err)});
            return;
        }
        last_ts_ = f.timestamp_ms;
        emitted_bytes_ += rec.size() + 1;
        ++emitted_;
        out.frames.push_back(f);
    }

    std::string pending_;
    std::size_t emitted_ = 0;
    std::size_t emitted_bytes_ = 0;
    std::size_t malformed_bytes_ = 0;
    std::size_t consumed_ = 0;
    std::size_t records_ = 0;
    std::optional<std::int64_t> last_ts_;
};

// Canonical rendering: at most 6 fractional digits, trailing zeros trimmed,
// negative zero written as zero.
inline std::string encode_frame(const SensorFrame& f) {
    std::string out;
    out.reserve(160);
    out += std::to_string(f.timestamp_ms);
    for (double v : f.channels) {
        out += ',';
        detail::append_real(out, v);
    }
    out += '\n';
    return out;
}

inline std::string log_header() {
    std::string h = "timestamp_ms";
    for (auto n : kChannelNames) {
        h += ',';
        h += n;
    }
    return h;
}

inline std::filesystem::path meta_path(const std::filesystem::path& log) {
    auto p = log;
    p.replace_extension(".meta");
    return p;
}

inline std::map<std::string, std::string> read_kv_file(const std::filesystem::path& path, std::string_view module) {
    std::ifstream in(path);
    if (!in) throw Error(module, Errc::Io, "cannot open " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(module, Errc::MalformedRecord, path.string() + ":" + std::to_string(lineno) + ": expected key=value");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& content, std::string_view module) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(module, Errc::Io, "cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error(module, Errc::Io, "write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(module, Errc::Io, "rename to " + path.string() + ": " + ec.message());
}

inline std::string format_rate(double hz) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", hz);
    return buf;
}

// Writes the log and its `.meta` sidecar.
inline void write_log(const std::filesystem::path& path, const ChannelSeries& series) {
    std::string body = log_header() + "\n";
    for (const auto& f : series.frames) body += encode_frame(f);
    write_text_atomic(path, body, "codec");
    std::string meta = "label=" + std::string(label_name(series.label)) + "\nsubject=" + series.subject +
                       "\nsample_rate_hz=" + format_rate(series.sample_rate_hz) + "\n";
    write_text_atomic(meta_path(path), meta, "codec");
}

// Decodes a whole log file. Unlike the live accumulator, a bad record here is fatal.
inline std::vector<SensorFrame> read_frames(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("codec", Errc::Io, "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw Error("codec", Errc::EmptySeries, path.string() + " is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != log_header()) throw Error("codec", Errc::HeaderMismatch, path.string() + ": unexpected header '" + line + "'");
    std::vector<SensorFrame> frames;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        SensorFrame f;
        if (auto err = detail::decode_record(line, f))
            throw Error("codec", Errc::MalformedRecord, path.string() + ":" + std::to_string(lineno) + ": " + *err);
        if (!frames.empty() && f.timestamp_ms < frames.back().timestamp_ms)
            throw Error("codec", Errc::MalformedRecord, path.string() + ":" + std::to_string(lineno) + ": timestamp went backwards");
        frames.push_back(f);
    }
    if (frames.empty()) throw Error("codec", Errc::EmptySeries, path.string() + " has no records");
    return frames;
}

inline ChannelSeries read_log(const std::filesystem::path& path) {
    ChannelSeries s;
    s.frames = read_frames(path);
    auto kv = read_kv_file(meta_path(path), "codec");
    auto it = kv.find("label");
    if (it == kv.end()) throw Error("codec", Errc::MalformedRecord, meta_path(path).string() + ": missing label");
    s.label = parse_label(it->second);
    if (auto sub = kv.find("subject"); sub != kv.end()) s.subject = sub->second;
    if (auto r = kv.find("sample_rate_hz"); r != kv.end()) {
        auto v = detail::parse_real(r->second);
        if (!v || *v <= 0) throw Error("codec", Errc::MalformedRecord, meta_path(path).string() + ": bad sample_rate_hz");
        s.sample_rate_hz = *v;
    }
    return s;
}

} // namespace tsfall::codec
