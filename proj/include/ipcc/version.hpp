#pragma once

namespace ipcc {
inline constexpr const char* kVersion = "0.1.0";
}
