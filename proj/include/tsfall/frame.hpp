#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tsfall/error.hpp"

namespace tsfall {

inline constexpr std::size_t kNumChannels = 20;

// Left foot first, then the right-foot counterparts in the same order.
// Voltage in V, attitude in degrees, acceleration in g, angular rate in deg/s.
inline constexpr std::array<std::string_view, kNumChannels> kChannelNames = {
    "l_voltage_ao", "l_attitude_roll", "l_attitude_pitch", "l_attitude_yaw",
    "l_acc_x",      "l_acc_y",         "l_acc_z",          "l_gyro_x",
    "l_gyro_y",     "l_gyro_z",        "r_voltage_ao",     "r_attitude_roll",
    "r_attitude_pitch", "r_attitude_yaw", "r_acc_x",       "r_acc_y",
    "r_acc_z",      "r_gyro_x",        "r_gyro_y",         "r_gyro_z",
};

namespace ch {
inline constexpr std::size_t l_voltage_ao = 0;
inline constexpr std::size_t l_acc_x = 4;
inline constexpr std::size_t l_gyro_x = 7;
inline constexpr std::size_t r_voltage_ao = 10;
inline constexpr std::size_t r_acc_x = 14;
inline constexpr std::size_t r_gyro_z = 19;
} // namespace ch

struct SensorFrame {
    std::int64_t timestamp_ms = 0;
    std::array<double, kNumChannels> channels{};

    friend bool operator==(const SensorFrame&, const SensorFrame&) = default;
};

enum class Label { walk, fall_forward, fall_left };

inline std::string_view label_name(Label l) {
    switch (l) {
    case Label::walk: return "walk";
    case Label::fall_forward: return "fall_forward";
    case Label::fall_left: return "fall_left";
    }
    return "walk";
}

inline Label parse_label(std::string_view s) {
    if (s == "walk") return Label::walk;
    if (s == "fall_forward") return Label::fall_forward;
    if (s == "fall_left") return Label::fall_left;
    throw Error("codec", Errc::MalformedRecord, "unknown label '" + std::string(s) + "'");
}

// Falls of either direction collapse to the positive class.
inline int binary_label(Label l) { return l == Label::walk ? 0 : 1; }

inline constexpr double kNominalRateHz = 18.0;

struct ChannelSeries {
    std::vector<SensorFrame> frames;
    Label label = Label::walk;
    std::string subject;
    double sample_rate_hz = kNominalRateHz;

    std::size_t size() const { return frames.size(); }
    bool empty() const { return frames.empty(); }

    friend bool operator==(const ChannelSeries&, const ChannelSeries&) = default;
};

} // namespace tsfall
