#pragma once

namespace visback {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace visback
