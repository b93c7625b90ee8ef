#pragma once

namespace rmlab {

inline constexpr const char* version = "1.0.0";

}  // namespace rmlab
