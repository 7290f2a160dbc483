#pragma once

namespace kawasaki {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace kawasaki
