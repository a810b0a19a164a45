#pragma once

namespace curvegraph {

inline constexpr const char* version = "0.1.0";

}  // namespace curvegraph
