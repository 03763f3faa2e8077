#pragma once

namespace ssmpc {

inline constexpr const char* kVersion = "ssmpc 0.1.0";

}  // namespace ssmpc
