#pragma once

#include <string_view>

namespace vbforge {

inline constexpr std::string_view k_tool_version = "vbforge 1.0.0";

} // namespace vbforge
