#pragma once

#include <limits>

namespace v2g {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

} // namespace v2g
