#pragma once

#include <cstdint>

// Jenkins lookup3 word hashing, in the two shapes Linux shipped it: the
// current one (full lookup3 initialization folding word count and initval
// into all three lanes) and the older one that kept lookup2-style
// initialization, with 0xdeadbeef in place of the golden ratio.

namespace ipidlab {

constexpr std::uint32_t rol32(std::uint32_t x, int k) {
  return (x << (k & 31)) | (x >> ((32 - k) & 31));
}

namespace detail {
// lookup3 final mix; the last word of state, c, is the hash value.
constexpr std::uint32_t jfinal(std::uint32_t a, std::uint32_t b, std::uint32_t c) {
  c ^= b; c -= rol32(b, 14);
  a ^= c; a -= rol32(c, 11);
  b ^= a; b -= rol32(a, 25);
  c ^= b; c -= rol32(b, 16);
  a ^= c; a -= rol32(c, 4);
  b ^= a; b -= rol32(a, 14);
  c ^= b; c -= rol32(b, 24);
  return c;
}
}  // namespace detail

constexpr std::uint32_t kJhashInitval = 0xdeadbeefu;

// Standard lookup3 hashword over exactly three words: all lanes start at
// 0xdeadbeef + 4*length + initval, words are added in, then the final mix.
constexpr std::uint32_t jenkins_lookup3(std::uint32_t w0, std::uint32_t w1,
                                        std::uint32_t w2, std::uint32_t initval) {
  const std::uint32_t off = kJhashInitval + (3u << 2) + initval;
  return detail::jfinal(w0 + off, w1 + off, w2 + off);
}

// Older variant: a and b take only the 0xdeadbeef constant, initval rides in
// alone on the c lane.
constexpr std::uint32_t jenkins_lookup3_a1(std::uint32_t w0, std::uint32_t w1,
                                           std::uint32_t w2, std::uint32_t initval) {
  return detail::jfinal(w0 + kJhashInitval, w1 + kJhashInitval, w2 + initval);
}

}  // namespace ipidlab
