#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "tsfall/error.hpp"
#include "tsfall/frame.hpp"

namespace tsfall::filter {

// Scalar random-walk model: transition a, observation h, no control input
// and no additive process term in the prediction.
struct KalmanParams {
    double a = 1.0;
    double h = 1.0;
    double q = 1e-3;
    double r = 1e-1;
    double p0 = 1.0;

    void validate() const {
        if (!(q > 0) || !(r > 0) || !(p0 >= 0) || !std::isfinite(a) || !std::isfinite(h) || !std::isfinite(q) ||
            !std::isfinite(r) || !std::isfinite(p0))
            throw Error("filter", Errc::BadParams, "require q>0, r>0, p0>=0 and finite a, h");
    }
};

struct KalmanState {
    double x_est = 0.0;
    double p_est = 0.0;
};

// The first estimate is the first measurement itself.
inline KalmanState initial_state(double first, const KalmanParams& p) { return {first, p.p0}; }

struct StepResult {
    KalmanState state;
    double value;
};

inline StepResult kalman_step(const KalmanState& s, const KalmanParams& p, double z) {
    if (!std::isfinite(z)) throw Error("filter", Errc::NonFiniteMeasurement, "");
    const double x_prior = p.a * s.x_est;
    const double p_prior = p.a * p.a * s.p_est + p.q;
    const double gain = p_prior * p.h / (p.h * p.h * p_prior + p.r);
    KalmanState next;
    next.x_est = x_prior + gain * (z - p.h * x_prior);
    next.p_est = (1.0 - gain * p.h) * p_prior;
    return {next, next.x_est};
}

// Stateful per-channel filter for live streams. The first push initialises
// every channel to its measurement and passes the frame through unchanged.
class FrameDenoiser {
public:
    explicit FrameDenoiser(KalmanParams params) : params_(params) { params_.validate(); }

    SensorFrame push(const SensorFrame& in) {
        SensorFrame out = in;
        if (!started_) {
            for (std::size_t c = 0; c < kNumChannels; ++c) {
                if (!std::isfinite(in.channels[c])) throw Error("filter", Errc::NonFiniteMeasurement, "");
                state_[c] = initial_state(in.channels[c], params_);
            }
            started_ = true;
            return out;
        }
        for (std::size_t c = 0; c < kNumChannels; ++c) {
            auto r = kalman_step(state_[c], params_, in.channels[c]);
            state_[c] = r.state;
            out.channels[c] = r.value;
        }
        return out;
    }

    const KalmanState& state(std::size_t channel) const { return state_[channel]; }

private:
    KalmanParams params_;
    std::array<KalmanState, kNumChannels> state_{};
    bool started_ = false;
};

// Filters one scalar sequence, seeded with its own first sample.
inline std::vector<double> denoise_sequence(std::span<const double> z, const KalmanParams& p) {
    std::vector<double> out;
    if (z.empty()) return out;
    out.reserve(z.size());
    if (!std::isfinite(z[0])) throw Error("filter", Errc::NonFiniteMeasurement, "");
    KalmanState s = initial_state(z[0], p);
    out.push_back(z[0]);
    for (std::size_t i = 1; i < z.size(); ++i) {
        auto r = kalman_step(s, p, z[i]);
        s = r.state;
        out.push_back(r.value);
    }
    return out;
}

// Each channel gets an independent filter; timestamps and labels are untouched.
inline ChannelSeries denoise_series(const ChannelSeries& series, const KalmanParams& params) {
    params.validate();
    if (series.empty()) throw Error("filter", Errc::EmptySeries, "");
    ChannelSeries out = series;
    FrameDenoiser d(params);
    for (std::size_t i = 0; i < series.size(); ++i) out.frames[i] = d.push(series.frames[i]);
    return out;
}

} // namespace tsfall::filter
