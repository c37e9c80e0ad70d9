#pragma once

#include <numbers>

namespace eitgate {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// All frequencies are stored as angular frequencies in rad/s and all times in
// seconds. These helpers convert the /2pi values used in configs and reports.
constexpr double mhz(double f) { return kTwoPi * 1e6 * f; }
constexpr double khz(double f) { return kTwoPi * 1e3 * f; }
constexpr double ghz(double f) { return kTwoPi * 1e9 * f; }
constexpr double to_mhz(double omega) { return omega / (kTwoPi * 1e6); }
constexpr double to_khz(double omega) { return omega / (kTwoPi * 1e3); }
constexpr double to_ghz(double omega) { return omega / (kTwoPi * 1e9); }

constexpr double us(double t) { return t * 1e-6; }
constexpr double ns(double t) { return t * 1e-9; }
constexpr double to_us(double t) { return t * 1e6; }

}  // namespace eitgate
