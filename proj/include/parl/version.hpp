#pragma once

#define PARL_VERSION_MAJOR 0
#define PARL_VERSION_MINOR 1
#define PARL_VERSION_PATCH 0
#define PARL_VERSION_STRING "0.1.0"

namespace parl {

inline constexpr const char* kVersion = PARL_VERSION_STRING;

}  // namespace parl
