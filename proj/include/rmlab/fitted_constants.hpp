#pragma once

// Generated by `rmlab calibrate --header`.

#include <cstdint>

namespace rmlab::fitted {

inline constexpr std::uint64_t calibration_seed = 20240601;
inline constexpr double esseen = 0.6033733956252194;
inline constexpr double halasz_profile = 2.5;
inline constexpr double halasz_integral = 3.2521871134164675;
inline constexpr double berry_esseen = 0.759016876696008;
inline constexpr double regular_profile = 0.08703370550190326;

}  // namespace rmlab::fitted
