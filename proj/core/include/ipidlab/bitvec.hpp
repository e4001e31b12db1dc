#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ipidlab {

class Rng;
struct Ipv4;

// Bit string with MSB-first indexing: bit 0 is the leftmost/most significant
// position. A 32-bit vector a_0..a_31 has numeric value sum a_i * 2^(31-i),
// so 127.0.0.1 as a vector reads 01111111 00000000 00000000 00000001.
//
// Storage keeps bit i at words()[i/64], bit (63 - i%64); padding bits past
// size() are always zero.
class BitVec {
 public:
  BitVec() = default;
  explicit BitVec(std::size_t nbits) : nbits_(nbits), words_((nbits + 63) / 64, 0) {}

  static BitVec from_u32(std::uint32_t value);  // 32 bits, MSB first
  static BitVec from_ipv4(Ipv4 address);
  static BitVec random(std::size_t nbits, Rng& rng);
  // Parses the "<bits>:<lowercase hex>" form produced by to_hex().
  static BitVec from_hex(const std::string& text);

  std::size_t size() const { return nbits_; }
  bool empty() const { return nbits_ == 0; }

  bool bit(std::size_t i) const {
    return (words_[i >> 6] >> (63 - (i & 63))) & 1u;
  }
  void set_bit(std::size_t i, bool v) {
    const std::uint64_t mask = std::uint64_t(1) << (63 - (i & 63));
    if (v)
      words_[i >> 6] |= mask;
    else
      words_[i >> 6] &= ~mask;
  }

  // Same-length XOR; throws std::invalid_argument on size mismatch.
  BitVec operator^(const BitVec& other) const;

  // count bits starting at first; [first, first+count) must be in range.
  BitVec slice(std::size_t first, std::size_t count) const;
  BitVec concat(const BitVec& tail) const;
  // this followed by (nbits - size()) zero bits; nbits >= size().
  BitVec zero_extended(std::size_t nbits) const;

  // Numeric value of the whole vector (MSB first); size() must be <= 64.
  std::uint64_t num() const;

  // "<bits>:<hex>" with lowercase hex, MSB-first nibbles, unused low bits of the
  // final nibble zero. A 320-bit key serializes as "320:" + 80 hex digits.
  std::string to_hex() const;

  const std::vector<std::uint64_t>& words() const { return words_; }

  friend bool operator==(const BitVec& a, const BitVec& b) {
    return a.nbits_ == b.nbits_ && a.words_ == b.words_;
  }

 private:
  std::size_t nbits_ = 0;
  std::vector<std::uint64_t> words_;
};

// The 32-bit numeric view and its inverse (bit i of the vector = value bit 31-i).
std::uint32_t num(const BitVec& v);          // requires size() == 32
BitVec vectorize(std::uint32_t value);       // 32-bit vector

}  // namespace ipidlab
