#pragma once

namespace tqa {

inline constexpr const char* kEngineVersion = "0.1.0";

} // namespace tqa
