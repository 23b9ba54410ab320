#pragma once

#include <cstdint>
#include <string>

namespace kcmlab {

inline constexpr const char* kVersion = "0.1.0";

/// First line of every CSV the tools write.
inline std::string csv_banner(std::uint64_t seed) {
  return std::string("# kcm-lab v") + kVersion + " seed=" + std::to_string(seed);
}

}  // namespace kcmlab
