#pragma once

namespace genefield {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace genefield
