#include "ipidlab/ipv4.hpp"

#include <cstdio>
#include <stdexcept>

#include "ipidlab/rng.hpp"

namespace ipidlab {

std::string to_string(Ipv4 a) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%u.%u.%u.%u", (a.value >> 24) & 0xff,
                (a.value >> 16) & 0xff, (a.value >> 8) & 0xff, a.value & 0xff);
  return buf;
}

Ipv4 parse_ipv4(const std::string& text) {
  unsigned o[4];
  char tail = 0;
  const int got =
      std::sscanf(text.c_str(), "%u.%u.%u.%u%c", &o[0], &o[1], &o[2], &o[3], &tail);
  if (got != 4) throw std::invalid_argument("bad IPv4 literal: " + text);
  for (unsigned v : o) {
    if (v > 255) throw std::invalid_argument("bad IPv4 octet in: " + text);
  }
  return Ipv4(static_cast<std::uint8_t>(o[0]), static_cast<std::uint8_t>(o[1]),
              static_cast<std::uint8_t>(o[2]), static_cast<std::uint8_t>(o[3]));
}

namespace {

bool reserved(std::uint32_t v) {
  const unsigned a = v >> 24;
  if (a == 0 || a == 10 || a == 127) return true;
  if (a >= 224) return true;                          // multicast + class E
  if ((v >> 16) == 0xa9fe) return true;               // 169.254/16
  if ((v >> 20) == 0xac1) return true;                // 172.16/12
  if ((v >> 16) == 0xc0a8) return true;               // 192.168/16
  return false;
}

}  // namespace

Ipv4 random_public_ipv4(Rng& rng) {
  for (;;) {
    const std::uint32_t v = rng.next_u32();
    if (!reserved(v)) return Ipv4(v);
  }
}

}  // namespace ipidlab
