#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "tsfall/dataset.hpp"
#include "tsfall/frame.hpp"

namespace tsfall::baselines {

inline constexpr std::size_t kStatsPerChannel = 5;
inline constexpr std::size_t kFeatureLength = kNumChannels * kStatsPerChannel;

// Per channel: mean, population standard deviation, min, max, last value.
inline std::vector<double> window_features(std::span<const double> window, std::size_t length) {
    std::vector<double> f(kFeatureLength);
    for (std::size_t c = 0; c < kNumChannels; ++c) {
        double sum = 0.0, lo = window[c], hi = window[c];
        for (std::size_t t = 0; t < length; ++t) {
            const double v = window[t * kNumChannels + c];
            sum += v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double mean = sum / static_cast<double>(length);
        double ss = 0.0;
        for (std::size_t t = 0; t < length; ++t) {
            const double d = window[t * kNumChannels + c] - mean;
            ss += d * d;
        }
        double* o = f.data() + c * kStatsPerChannel;
        o[0] = mean;
        o[1] = std::sqrt(ss / static_cast<double>(length));
        o[2] = lo;
        o[3] = hi;
        o[4] = window[(length - 1) * kNumChannels + c];
    }
    return f;
}

// Row-major (n x dim) feature matrix.
struct FeatureMatrix {
    std::size_t rows = 0, dim = 0;
    std::vector<double> data;

    std::span<const double> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
};

inline FeatureMatrix batch_features(const dataset::WindowBatch& batch) {
    FeatureMatrix m{batch.size(), kFeatureLength, {}};
    m.data.reserve(m.rows * m.dim);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        auto f = window_features(batch.window(i), batch.length());
        m.data.insert(m.data.end(), f.begin(), f.end());
    }
    return m;
}

} // namespace tsfall::baselines
