#pragma once

namespace gpr {

inline constexpr const char* VERSION = "0.1.0";

}  // namespace gpr
