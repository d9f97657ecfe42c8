#pragma once

namespace wsl {

inline constexpr const char* version_string = "1.0.0";

}
