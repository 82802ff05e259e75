#pragma once

namespace bifactor {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace bifactor
