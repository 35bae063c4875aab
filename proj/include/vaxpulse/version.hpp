#pragma once

namespace vaxpulse {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace vaxpulse
