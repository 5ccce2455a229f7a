#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace stegolstm {

/// 64-bit FNV-1a. Used as an integrity tag tying keys and models to a
/// vocabulary, not as a cryptographic digest.
class Fnv1a64 {
 public:
  void update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
  }

  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::string to_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace stegolstm
