#pragma once

namespace spinclt {

inline constexpr const char* kVersion = "0.1.0";

// Default master seed used by every tool entry point unless overridden.
inline constexpr unsigned long long kDefaultMasterSeed = 0xC1A0ULL;

}  // namespace spinclt
