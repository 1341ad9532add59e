#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fairaudit {

/// FNV-1a 64-bit hash, used for config/dataset fingerprints and RNG stream tags.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

inline void require_data(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

}  // namespace fairaudit
