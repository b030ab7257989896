#pragma once

namespace tmce {

inline constexpr const char* version_string = "0.1.0";

}
