#pragma once

namespace mirpairs {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mirpairs
