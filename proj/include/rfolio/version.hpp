#pragma once

namespace rfolio {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rfolio
