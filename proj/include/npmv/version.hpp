#pragma once

namespace npmv {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace npmv
