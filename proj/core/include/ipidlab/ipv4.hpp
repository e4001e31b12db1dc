#pragma once

#include <cstdint>
#include <string>

namespace ipidlab {

class Rng;

// IPv4 address in its natural big-endian reading: 127.0.0.1 <-> 0x7f000001.
// Bit i (MSB-first, i = 0 the leftmost bit of the dotted form) is value bit 31-i.
struct Ipv4 {
  std::uint32_t value = 0;

  constexpr Ipv4() = default;
  constexpr explicit Ipv4(std::uint32_t v) : value(v) {}
  constexpr Ipv4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d)
      : value((std::uint32_t(a) << 24) | (std::uint32_t(b) << 16) |
              (std::uint32_t(c) << 8) | std::uint32_t(d)) {}

  constexpr bool bit(unsigned i) const { return (value >> (31u - i)) & 1u; }
  constexpr std::uint16_t class_b() const {
    return static_cast<std::uint16_t>(value >> 16);
  }
  constexpr std::uint16_t low_half() const {
    return static_cast<std::uint16_t>(value & 0xffffu);
  }

  friend constexpr bool operator==(Ipv4 a, Ipv4 b) { return a.value == b.value; }
  friend constexpr bool operator!=(Ipv4 a, Ipv4 b) { return a.value != b.value; }
  friend constexpr bool operator<(Ipv4 a, Ipv4 b) { return a.value < b.value; }
};

std::string to_string(Ipv4 a);
// Throws std::invalid_argument on anything that is not a dotted quad.
Ipv4 parse_ipv4(const std::string& text);

// Uniform address avoiding reserved/multicast space (0/8, 10/8, 127/8,
// 169.254/16, 172.16/12, 192.168/16, 224/3). Both values of the leading bit
// stay reachable.
Ipv4 random_public_ipv4(Rng& rng);

}  // namespace ipidlab
