#pragma once

#include <iostream>
#include <string_view>

namespace groupcdl {

inline void warn(std::string_view msg) { std::cerr << "warning: " << msg << '\n'; }

}  // namespace groupcdl
