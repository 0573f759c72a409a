#pragma once

namespace scdonor {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace scdonor
