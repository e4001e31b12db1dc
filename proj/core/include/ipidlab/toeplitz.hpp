#pragma once

#include <array>
#include <cstdint>

#include "ipidlab/bitvec.hpp"

namespace ipidlab {

class Rng;

// 320-bit Toeplitz hashing key. Output bit i (0 <= i <= 31) of the hash of
// input I is XOR over j of I_j * K_{i+j}, so an input may have at most
// 320 - 31 = 289 bits. window32(j) caches bits K_j..K_j+31 as a u32 whose
// MSB-first reading starts at K_j; the hash of I is then simply the XOR of
// window32(j) over the set bits j of I.
class ToeplitzKey {
 public:
  static constexpr std::size_t kBits = 320;
  static constexpr std::size_t kMaxInputBits = 289;

  explicit ToeplitzKey(const BitVec& bits);
  static ToeplitzKey random(Rng& rng);

  const BitVec& bits() const { return bits_; }
  bool bit(std::size_t i) const { return bits_.bit(i); }
  std::uint32_t window32(std::size_t j) const { return windows_[j]; }

 private:
  BitVec bits_;
  std::array<std::uint32_t, kMaxInputBits> windows_{};
};

// T(K, I) as a 32-bit word; bit i of the hash is value bit 31-i, matching
// num()/vectorize(). Throws std::invalid_argument when input.size() > 289.
std::uint32_t toeplitz_hash(const ToeplitzKey& key, const BitVec& input);

}  // namespace ipidlab
