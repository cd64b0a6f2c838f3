#pragma once

namespace apt {

inline constexpr const char* kToolName = "apt";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace apt
