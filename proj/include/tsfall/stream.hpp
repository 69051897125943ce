#pragma once

// Real-time replay and inference. A receiver thread pulls byte chunks from a
// source, reassembles frames and hands them to the inference stage through a
// bounded FIFO that blocks the producer when full. The inference stage keeps
// a per-stream Kalman state and a 64-frame ring, predicts once per frame after
// the ring fills and raises debounced alarms.

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <exception>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "tsfall/codec.hpp"
#include "tsfall/error.hpp"
#include "tsfall/filter.hpp"
#include "tsfall/frame.hpp"
#include "tsfall/rng.hpp"
#include "tsfall/training.hpp"

namespace tsfall::stream {

using Clock = std::chrono::steady_clock;

template <class V>
class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t capacity) : cap_(std::max<std::size_t>(capacity, 1)) {}

    // Blocks while full. Returns false if the queue was closed.
    bool push(V v) {
        std::unique_lock lk(mu_);
        not_full_.wait(lk, [&] { return q_.size() < cap_ || closed_; });
        if (closed_) return false;
        q_.push_back(std::move(v));
        high_water_ = std::max(high_water_, q_.size());
        not_empty_.notify_one();
        return true;
    }

    // Blocks while empty; nullopt once closed and drained.
    std::optional<V> pop() {
        std::unique_lock lk(mu_);
        not_empty_.wait(lk, [&] { return !q_.empty() || closed_; });
        if (q_.empty()) return std::nullopt;
        V v = std::move(q_.front());
        q_.pop_front();
        not_full_.notify_one();
        return v;
    }

    void close() {
        std::lock_guard lk(mu_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

    std::size_t capacity() const { return cap_; }
    std::size_t high_water() const {
        std::lock_guard lk(mu_);
        return high_water_;
    }

private:
    mutable std::mutex mu_;
    std::condition_variable not_full_, not_empty_;
    std::deque<V> q_;
    std::size_t cap_;
    std::size_t high_water_ = 0;
    bool closed_ = false;
};

// Fixed-capacity frame ring; window() is the last `capacity` frames, oldest first.
class RingWindow {
public:
    explicit RingWindow(std::size_t capacity = dataset::kWindowLength)
        : cap_(capacity), buf_(capacity * kNumChannels) {}

    void push(const std::array<double, kNumChannels>& ch) {
        std::copy(ch.begin(), ch.end(), buf_.begin() + static_cast<std::ptrdiff_t>(head_ * kNumChannels));
        head_ = (head_ + 1) % cap_;
        filled_ = std::min(filled_ + 1, cap_);
    }
    bool full() const { return filled_ == cap_; }
    std::size_t filled() const { return filled_; }
    std::size_t capacity() const { return cap_; }
    std::size_t head() const { return head_; }

    std::vector<double> window() const {
        std::vector<double> out;
        out.reserve(filled_ * kNumChannels);
        const std::size_t start = full() ? head_ : 0;
        for (std::size_t k = 0; k < filled_; ++k) {
            const std::size_t slot = (start + k) % cap_;
            out.insert(out.end(), buf_.begin() + static_cast<std::ptrdiff_t>(slot * kNumChannels),
                       buf_.begin() + static_cast<std::ptrdiff_t>((slot + 1) * kNumChannels));
        }
        return out;
    }

private:
    std::size_t cap_;
    std::vector<double> buf_;
    std::size_t head_ = 0;
    std::size_t filled_ = 0;
};

// Pull-based byte source. next_chunk() returns nullopt at end of stream.
class ByteSource {
public:
    virtual ~ByteSource() = default;
    virtual std::optional<std::string> next_chunk() = 0;
};

// Replays a log as its encoded records, cut into randomly sized chunks and
// paced by frame timestamps divided by `speedup` (0 disables pacing).
class ReplaySource : public ByteSource {
public:
    ReplaySource(const std::vector<SensorFrame>& frames, double speedup, std::uint64_t seed, std::size_t max_chunk = 96)
        : speedup_(speedup), rng_(seed), max_chunk_(std::max<std::size_t>(max_chunk, 1)) {
        if (!(speedup >= 0.0)) throw Error("stream", Errc::BadConfig, "speedup must be >= 0");
        for (const auto& f : frames) {
            bytes_ += codec::encode_frame(f);
            record_end_.push_back(bytes_.size());
            record_ts_.push_back(f.timestamp_ms);
        }
    }

    std::optional<std::string> next_chunk() override {
        if (pos_ >= bytes_.size()) return std::nullopt;
        if (!started_) {
            start_ = Clock::now();
            started_ = true;
        }
        const std::size_t len = std::min<std::size_t>(1 + rng_.below(max_chunk_), bytes_.size() - pos_);
        const std::size_t end = pos_ + len;
        if (speedup_ > 0.0) {
            // Every byte of the chunk belongs to a record that is already due.
            while (rec_ < record_end_.size() && record_end_[rec_] < end) ++rec_;
            const std::size_t r = std::min(rec_, record_end_.size() - 1);
            const double due_ms = static_cast<double>(record_ts_[r] - record_ts_.front()) / speedup_;
            std::this_thread::sleep_until(start_ + std::chrono::microseconds(static_cast<std::int64_t>(due_ms * 1000.0)));
        }
        std::string out = bytes_.substr(pos_, len);
        pos_ = end;
        return out;
    }

    std::size_t total_bytes() const { return bytes_.size(); }

private:
    std::string bytes_;
    std::vector<std::size_t> record_end_;
    std::vector<std::int64_t> record_ts_;
    double speedup_;
    Rng rng_;
    std::size_t max_chunk_;
    std::size_t pos_ = 0;
    std::size_t rec_ = 0;
    bool started_ = false;
    Clock::time_point start_;
};

inline ReplaySource replay_source(const std::filesystem::path& path, double speedup, std::uint64_t seed) {
    return ReplaySource(codec::read_frames(path), speedup, seed);
}

struct StreamConfig {
    filter::KalmanParams kalman;
    double threshold = 0.5;
    std::int64_t refractory_ms = 2000;
    std::size_t window_length = dataset::kWindowLength;
    std::size_t queue_capacity = 256;
    // Optional artificial per-frame delay in the inference stage (tests only).
    std::chrono::microseconds inference_delay{0};

    void validate() const {
        kalman.validate();
        if (!(threshold > 0.0 && threshold < 1.0)) throw Error("stream", Errc::BadConfig, "threshold must lie in (0, 1)");
        if (refractory_ms < 0) throw Error("stream", Errc::BadConfig, "refractory window must be >= 0");
        if (window_length == 0 || queue_capacity == 0) throw Error("stream", Errc::BadConfig, "window and queue sizes must be positive");
    }
};

struct AlarmEvent {
    std::size_t frame_index = 0;
    std::int64_t timestamp_ms = 0;
    double probability = 0.0;
    std::int64_t latency_us = 0;
};

struct Prediction {
    std::size_t frame_index = 0;
    std::int64_t timestamp_ms = 0;
    double probability = 0.0;
};

struct StreamSummary {
    std::size_t frames = 0;
    std::size_t predictions = 0;
    std::size_t alarms = 0;
    std::size_t malformed = 0;
    std::size_t queue_high_water = 0;
    std::int64_t latency_p50_us = 0, latency_p90_us = 0, latency_p99_us = 0, latency_max_us = 0;
};

struct StreamResult {
    std::vector<AlarmEvent> events;
    std::vector<Prediction> predictions;
    StreamSummary summary;
};

inline std::int64_t percentile(std::vector<std::int64_t> v, double q) {
    if (v.empty()) return 0;
    std::sort(v.begin(), v.end());
    const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
    return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

// Alarm debounce over stream timestamps.
class AlarmGate {
public:
    AlarmGate(double threshold, std::int64_t refractory_ms) : threshold_(threshold), refractory_ms_(refractory_ms) {}
    bool offer(std::int64_t ts, double p) {
        if (p < threshold_) return false;
        if (fired_ && ts - last_ < refractory_ms_) return false;
        fired_ = true;
        last_ = ts;
        return true;
    }

private:
    double threshold_;
    std::int64_t refractory_ms_;
    bool fired_ = false;
    std::int64_t last_ = 0;
};

template <class Model>
StreamResult run_stream(ByteSource& source, const Model& model, const StreamConfig& cfg) {
    cfg.validate();
    struct Item {
        SensorFrame frame;
        Clock::time_point arrival;
    };
    BoundedQueue<Item> queue(cfg.queue_capacity);
    std::exception_ptr rx_error;
    std::size_t malformed = 0;

    std::thread receiver([&] {
        try {
            codec::FrameAccumulator acc;
            while (auto chunk = source.next_chunk()) {
                auto r = acc.feed_bytes(std::string_view(*chunk));
                malformed += r.malformed.size();
                const auto now = Clock::now();
                for (auto& f : r.frames)
                    if (!queue.push({f, now})) return;
            }
        } catch (...) {
            rx_error = std::current_exception();
        }
        queue.close();
    });

    StreamResult out;
    std::vector<std::int64_t> latencies;
    try {
        filter::FrameDenoiser denoise(cfg.kalman);
        RingWindow ring(cfg.window_length);
        AlarmGate gate(cfg.threshold, cfg.refractory_ms);
        std::size_t index = 0;
        while (auto item = queue.pop()) {
            if (cfg.inference_delay.count() > 0) std::this_thread::sleep_for(cfg.inference_delay);
            const auto clean = denoise.push(item->frame);
            ring.push(clean.channels);
            if (ring.full()) {
                const auto w = ring.window();
                const auto pred = training::predict_window(model, w, cfg.window_length);
                const auto lat = std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - item->arrival).count();
                latencies.push_back(lat);
                out.predictions.push_back({index, clean.timestamp_ms, pred.probability});
                if (gate.offer(clean.timestamp_ms, pred.probability))
                    out.events.push_back({index, clean.timestamp_ms, pred.probability, lat});
            }
            ++index;
        }
        out.summary.frames = index;
    } catch (...) {
        queue.close();
        receiver.join();
        throw;
    }
    receiver.join();
    if (rx_error) {
        try {
            std::rethrow_exception(rx_error);
        } catch (const std::exception& e) {
            throw Error("stream", Errc::SourceError, e.what());
        }
    }
    out.summary.predictions = out.predictions.size();
    out.summary.alarms = out.events.size();
    out.summary.malformed = malformed;
    out.summary.queue_high_water = queue.high_water();
    out.summary.latency_p50_us = percentile(latencies, 0.50);
    out.summary.latency_p90_us = percentile(latencies, 0.90);
    out.summary.latency_p99_us = percentile(latencies, 0.99);
    out.summary.latency_max_us = percentile(latencies, 1.0);
    return out;
}

inline std::string format_events(const std::vector<AlarmEvent>& events, bool with_latency = true) {
    std::string s;
    char buf[128];
    for (const auto& e : events) {
        if (with_latency)
            std::snprintf(buf, sizeof buf, "%zu,%lld,%.9f,%lld\n", e.frame_index, static_cast<long long>(e.timestamp_ms),
                          e.probability, static_cast<long long>(e.latency_us));
        else
            std::snprintf(buf, sizeof buf, "%zu,%lld,%.9f\n", e.frame_index, static_cast<long long>(e.timestamp_ms),
                          e.probability);
        s += buf;
    }
    return s;
}

} // namespace tsfall::stream
