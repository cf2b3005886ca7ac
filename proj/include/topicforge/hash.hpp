#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace topicforge {

// 64-bit FNV-1a; used for vocabulary and corpus fingerprints.
class Fnv1a {
 public:
  void update(std::string_view bytes) noexcept {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
  }
  std::uint64_t digest() const noexcept { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string fnv1a_hex(std::string_view bytes);

}  // namespace topicforge
