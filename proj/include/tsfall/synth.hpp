#pragma once

// Synthetic recordings for tests, demos and the bundled sample corpus.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "tsfall/dataset.hpp"
#include "tsfall/frame.hpp"
#include "tsfall/rng.hpp"

namespace tsfall::synth {

inline std::int64_t frame_time_ms(std::size_t i, double rate_hz) {
    return std::llround(static_cast<double>(i) * 1000.0 / rate_hz);
}

// Rounds to the 6-decimal grid the codec writes, so generated series
// round-trip through log files unchanged.
inline double q6(double v) { return std::round(v * 1e6) / 1e6 + 0.0; }

inline void quantize(ChannelSeries& s) {
    for (auto& f : s.frames)
        for (auto& v : f.channels) v = q6(v);
}

// One foot during level walking at `cadence_hz` strides per second.
inline void gait_foot(std::array<double, kNumChannels>& c, std::size_t base, double phase, double amp, Rng& rng,
                      double noise) {
    const double s = std::sin(phase), s2 = std::sin(2 * phase);
    const double stance = s > 0 ? 1.0 : 0.0;
    c[base + 0] = 1.2 * stance * (0.6 + 0.4 * s) + noise * 0.05 * rng.normal(); // plantar pressure, V
    c[base + 1] = 3.0 * amp * s2 + noise * rng.normal();                        // roll
    c[base + 2] = 25.0 * amp * s + noise * rng.normal();                        // pitch
    c[base + 3] = 2.0 * amp * std::cos(phase) + noise * rng.normal();           // yaw
    c[base + 4] = 0.4 * amp * std::cos(phase) + noise * 0.02 * rng.normal();    // acc x
    c[base + 5] = 0.1 * amp * s2 + noise * 0.02 * rng.normal();                 // acc y
    c[base + 6] = 1.0 + 0.3 * amp * s + noise * 0.02 * rng.normal();            // acc z
    c[base + 7] = 20.0 * amp * s2 + noise * 2.0 * rng.normal();                 // gyro x
    c[base + 8] = 150.0 * amp * std::cos(phase) + noise * 2.0 * rng.normal();   // gyro y
    c[base + 9] = 15.0 * amp * s + noise * 2.0 * rng.normal();                  // gyro z
}

inline ChannelSeries walk_recording(std::size_t frames, std::uint64_t seed, double rate_hz = kNominalRateHz) {
    Rng rng(seed);
    ChannelSeries s;
    s.label = Label::walk;
    s.sample_rate_hz = rate_hz;
    const double cadence = rng.uniform(0.8, 1.1);
    const double amp = rng.uniform(0.8, 1.2);
    const double phi0 = rng.uniform(0.0, 2 * std::numbers::pi);
    for (std::size_t i = 0; i < frames; ++i) {
        SensorFrame f;
        f.timestamp_ms = frame_time_ms(i, rate_hz);
        const double ph = phi0 + 2 * std::numbers::pi * cadence * static_cast<double>(i) / rate_hz;
        gait_foot(f.channels, 0, ph, amp, rng, 1.0);
        gait_foot(f.channels, 10, ph + std::numbers::pi, amp, rng, 1.0);
        s.frames.push_back(f);
    }
    quantize(s);
    return s;
}

// A few strides, an impact, then lying still with the body rotated
// forward (pitch) or to the left (roll) and no plantar load.
inline ChannelSeries fall_recording(std::size_t frames, Label kind, std::uint64_t seed, double rate_hz = kNominalRateHz) {
    Rng rng(seed);
    ChannelSeries s;
    s.label = kind;
    s.sample_rate_hz = rate_hz;
    const double cadence = rng.uniform(0.8, 1.1);
    const double amp = rng.uniform(0.8, 1.2);
    const double phi0 = rng.uniform(0.0, 2 * std::numbers::pi);
    const auto impact = static_cast<std::size_t>(rng.uniform(12.0, 24.0));
    const double tilt = rng.uniform(60.0, 85.0);
    for (std::size_t i = 0; i < frames; ++i) {
        SensorFrame f;
        f.timestamp_ms = frame_time_ms(i, rate_hz);
        if (i < impact) {
            const double ph = phi0 + 2 * std::numbers::pi * cadence * static_cast<double>(i) / rate_hz;
            gait_foot(f.channels, 0, ph, amp, rng, 1.0);
            gait_foot(f.channels, 10, ph + std::numbers::pi, amp, rng, 1.0);
        } else {
            const double since = static_cast<double>(i - impact);
            const double settle = 1.0 - std::exp(-since / 2.0);
            const double shock = std::exp(-since / 1.5);
            for (std::size_t base : {std::size_t{0}, std::size_t{10}}) {
                auto* c = f.channels.data() + base;
                c[0] = 0.02 * std::abs(rng.normal());
                const double roll = kind == Label::fall_left ? tilt * settle : 0.0;
                const double pitch = kind == Label::fall_forward ? -tilt * settle : 0.0;
                c[1] = roll + rng.normal();
                c[2] = pitch + rng.normal();
                c[3] = 5.0 * settle + rng.normal();
                const double rr = roll * std::numbers::pi / 180.0, pr = pitch * std::numbers::pi / 180.0;
                c[4] = std::sin(pr) + 2.5 * shock * rng.normal() + 0.02 * rng.normal();
                c[5] = std::sin(rr) + 2.5 * shock * rng.normal() + 0.02 * rng.normal();
                c[6] = std::cos(pr) * std::cos(rr) + 3.0 * shock + 0.02 * rng.normal();
                c[7] = (kind == Label::fall_left ? 200.0 : 20.0) * shock + 2.0 * rng.normal();
                c[8] = (kind == Label::fall_forward ? -200.0 : 20.0) * shock + 2.0 * rng.normal();
                c[9] = 30.0 * shock + 2.0 * rng.normal();
            }
        }
        s.frames.push_back(f);
    }
    quantize(s);
    return s;
}

// 11 walks, 10 forward falls and 5 left falls, like the original collection.
inline std::vector<dataset::NamedSeries> sample_corpus(std::uint64_t seed = 2024) {
    std::vector<dataset::NamedSeries> out;
    Rng rng(seed);
    for (int i = 0; i < 11; ++i) {
        auto s = walk_recording(300 + rng.below(60), rng.next());
        s.subject = "s" + std::to_string(i % 4);
        out.push_back({"walk_" + std::string(i < 10 ? "0" : "") + std::to_string(i), std::move(s)});
    }
    for (int i = 0; i < 10; ++i) {
        auto s = fall_recording(90 + rng.below(40), Label::fall_forward, rng.next());
        s.subject = "s" + std::to_string(i % 4);
        out.push_back({"fall_forward_0" + std::to_string(i), std::move(s)});
    }
    for (int i = 0; i < 5; ++i) {
        auto s = fall_recording(90 + rng.below(40), Label::fall_left, rng.next());
        s.subject = "s" + std::to_string(i % 4);
        out.push_back({"fall_left_0" + std::to_string(i), std::move(s)});
    }
    return out;
}

// Separable task: each recording holds channel 0 at a level drawn from
// [0, 0.3] (class 0) or [0.7, 1.0] (class 1) with noise of at most +-0.15,
// so every window's channel-0 mean sits on the correct side of 0.5. Other
// channels are label-independent noise.
inline ChannelSeries separable_recording(int label, std::size_t frames, std::uint64_t seed) {
    Rng rng(seed);
    ChannelSeries s;
    s.label = label ? Label::fall_forward : Label::walk;
    const double level = label ? rng.uniform(0.7, 1.0) : rng.uniform(0.0, 0.3);
    for (std::size_t i = 0; i < frames; ++i) {
        SensorFrame f;
        f.timestamp_ms = frame_time_ms(i, kNominalRateHz);
        f.channels[0] = level + rng.uniform(-0.15, 0.15);
        for (std::size_t c = 1; c < kNumChannels; ++c) f.channels[c] = rng.normal();
        s.frames.push_back(f);
    }
    quantize(s);
    return s;
}

inline std::vector<dataset::NamedSeries> separable_corpus(std::size_t per_class, std::size_t frames, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<dataset::NamedSeries> out;
    for (std::size_t i = 0; i < per_class; ++i)
        for (int y : {0, 1}) out.push_back({"sep" + std::to_string(y) + "_" + std::to_string(i), separable_recording(y, frames, rng.next())});
    return out;
}

// Windows whose label is defined by the window itself: 1 iff the channel-0
// mean exceeds 0.5.
inline bool separable_rule(std::span<const double> window, std::size_t length) {
    double m = 0.0;
    for (std::size_t t = 0; t < length; ++t) m += window[t * kNumChannels];
    return m / static_cast<double>(length) > 0.5;
}

} // namespace tsfall::synth
