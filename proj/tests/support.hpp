#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tsfall/frame.hpp"
#include "tsfall/rng.hpp"

namespace tsfall::test {

// Scratch directory removed on scope exit.
class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("tsfall-" + std::to_string(rd()) + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

// ||a - n|| / (||a|| + ||n||), 0 when both vanish.
inline double rel_error(std::span<const double> a, std::span<const double> n) {
    double d = 0, na = 0, nn = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d += (a[i] - n[i]) * (a[i] - n[i]);
        na += a[i] * a[i];
        nn += n[i] * n[i];
    }
    const double den = std::sqrt(na) + std::sqrt(nn);
    return den < 1e-300 ? 0.0 : std::sqrt(d) / den;
}

// Central differences of f with respect to every entry of v.
template <class F>
std::vector<double> numeric_grad(std::vector<double>& v, F&& f, double eps = 1e-5) {
    std::vector<double> g(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double keep = v[i];
        v[i] = keep + eps;
        const double up = f();
        v[i] = keep - eps;
        const double down = f();
        v[i] = keep;
        g[i] = (up - down) / (2 * eps);
    }
    return g;
}

inline void fill_normal(std::vector<double>& v, Rng& rng, double scale = 1.0) {
    for (auto& x : v) x = scale * rng.normal();
}

inline ChannelSeries constant_series(std::size_t n, double c, Label label = Label::walk) {
    ChannelSeries s;
    s.label = label;
    for (std::size_t i = 0; i < n; ++i) {
        SensorFrame f;
        f.timestamp_ms = static_cast<std::int64_t>(i) * 55;
        f.channels.fill(c);
        s.frames.push_back(f);
    }
    return s;
}

// Channel c of frame i holds i + c / 100.
inline ChannelSeries ramp_series(std::size_t n, Label label = Label::walk, double hz = kNominalRateHz) {
    ChannelSeries s;
    s.label = label;
    s.sample_rate_hz = hz;
    for (std::size_t i = 0; i < n; ++i) {
        SensorFrame f;
        f.timestamp_ms = std::llround(static_cast<double>(i) * 1000.0 / hz);
        for (std::size_t c = 0; c < kNumChannels; ++c) f.channels[c] = static_cast<double>(i) + static_cast<double>(c) / 100.0;
        s.frames.push_back(f);
    }
    return s;
}

} // namespace tsfall::test
