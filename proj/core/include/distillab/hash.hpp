#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace distillab {

// 64-bit FNV-1a; used for content hashes in manifests and parameter-freeze
// checks. Not cryptographic.
inline uint64_t fnv1a(std::span<const unsigned char> bytes,
                      uint64_t seed = 0xcbf29ce484222325ULL) {
  uint64_t h = seed;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a(const std::string& s) {
  return fnv1a(std::span<const unsigned char>(
      reinterpret_cast<const unsigned char*>(s.data()), s.size()));
}

inline std::string hex_string(uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = digits[value & 0xf];
    value >>= 4;
  }
  return out;
}

}  // namespace distillab
