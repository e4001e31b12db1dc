#include "ipidlab/bitvec.hpp"

#include <cstdio>
#include <stdexcept>

#include "ipidlab/ipv4.hpp"
#include "ipidlab/rng.hpp"

namespace ipidlab {

BitVec BitVec::from_u32(std::uint32_t value) {
  BitVec v(32);
  v.words_[0] = std::uint64_t(value) << 32;
  return v;
}

BitVec BitVec::from_ipv4(Ipv4 address) { return from_u32(address.value); }

BitVec BitVec::random(std::size_t nbits, Rng& rng) {
  BitVec v(nbits);
  for (auto& w : v.words_) w = rng.next_u64();
  // clear padding past the last valid bit
  const std::size_t tail = nbits & 63;
  if (tail != 0) v.words_.back() &= ~std::uint64_t(0) << (64 - tail);
  return v;
}

BitVec BitVec::from_hex(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("missing bit-length prefix: " + text);
  std::size_t nbits = 0;
  try {
    nbits = std::stoul(text.substr(0, colon));
  } catch (const std::exception&) {
    throw std::invalid_argument("bad bit-length prefix: " + text);
  }
  const std::string hex = text.substr(colon + 1);
  if (hex.size() != (nbits + 3) / 4)
    throw std::invalid_argument("hex length does not match bit length: " + text);
  BitVec v(nbits);
  for (std::size_t d = 0; d < hex.size(); ++d) {
    const char c = hex[d];
    unsigned nib;
    if (c >= '0' && c <= '9')
      nib = unsigned(c - '0');
    else if (c >= 'a' && c <= 'f')
      nib = unsigned(c - 'a') + 10;
    else
      throw std::invalid_argument("bad hex digit (lowercase required): " + text);
    for (unsigned b = 0; b < 4; ++b) {
      const std::size_t i = d * 4 + b;
      const bool bitval = (nib >> (3 - b)) & 1u;
      if (i >= nbits) {
        if (bitval)
          throw std::invalid_argument("nonzero padding bits in final nibble: " + text);
        continue;
      }
      if (bitval) v.set_bit(i, true);
    }
  }
  return v;
}

BitVec BitVec::operator^(const BitVec& other) const {
  if (nbits_ != other.nbits_)
    throw std::invalid_argument("BitVec XOR length mismatch");
  BitVec out(nbits_);
  for (std::size_t w = 0; w < words_.size(); ++w)
    out.words_[w] = words_[w] ^ other.words_[w];
  return out;
}

BitVec BitVec::slice(std::size_t first, std::size_t count) const {
  if (first + count > nbits_) throw std::out_of_range("BitVec slice out of range");
  BitVec out(count);
  for (std::size_t i = 0; i < count; ++i)
    if (bit(first + i)) out.set_bit(i, true);
  return out;
}

BitVec BitVec::concat(const BitVec& tail) const {
  BitVec out(nbits_ + tail.nbits_);
  for (std::size_t i = 0; i < nbits_; ++i)
    if (bit(i)) out.set_bit(i, true);
  for (std::size_t i = 0; i < tail.nbits_; ++i)
    if (tail.bit(i)) out.set_bit(nbits_ + i, true);
  return out;
}

BitVec BitVec::zero_extended(std::size_t nbits) const {
  if (nbits < nbits_) throw std::invalid_argument("zero_extended shrinks vector");
  BitVec out(nbits);
  for (std::size_t w = 0; w < words_.size(); ++w) out.words_[w] = words_[w];
  return out;
}

std::uint64_t BitVec::num() const {
  if (nbits_ > 64) throw std::invalid_argument("num() needs size() <= 64");
  if (nbits_ == 0) return 0;
  return nbits_ == 64 ? words_[0] : words_[0] >> (64 - nbits_);
}

std::string BitVec::to_hex() const {
  std::string out = std::to_string(nbits_) + ":";
  const std::size_t digits = (nbits_ + 3) / 4;
  for (std::size_t d = 0; d < digits; ++d) {
    unsigned nib = 0;
    for (unsigned b = 0; b < 4; ++b) {
      const std::size_t i = d * 4 + b;
      if (i < nbits_ && bit(i)) nib |= 1u << (3 - b);
    }
    out += "0123456789abcdef"[nib];
  }
  return out;
}

std::uint32_t num(const BitVec& v) {
  if (v.size() != 32) throw std::invalid_argument("num(BitVec) needs 32 bits");
  return static_cast<std::uint32_t>(v.num());
}

BitVec vectorize(std::uint32_t value) { return BitVec::from_u32(value); }

}  // namespace ipidlab
