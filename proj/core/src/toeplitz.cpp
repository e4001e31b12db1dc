#include "ipidlab/toeplitz.hpp"

#include <bit>
#include <stdexcept>

#include "ipidlab/rng.hpp"

namespace ipidlab {

ToeplitzKey::ToeplitzKey(const BitVec& bits) : bits_(bits) {
  if (bits.size() != kBits)
    throw std::invalid_argument("ToeplitzKey needs exactly 320 bits");
  // windows_[j] = num of key bits j..j+31
  const auto& w = bits.words();  // 5 words, MSB-first within each
  for (std::size_t j = 0; j < kMaxInputBits; ++j) {
    const std::size_t word = j >> 6, off = j & 63;
    std::uint64_t chunk = w[word] << off;
    if (off != 0 && word + 1 < w.size()) chunk |= w[word + 1] >> (64 - off);
    windows_[j] = static_cast<std::uint32_t>(chunk >> 32);
  }
}

ToeplitzKey ToeplitzKey::random(Rng& rng) {
  return ToeplitzKey(BitVec::random(kBits, rng));
}

std::uint32_t toeplitz_hash(const ToeplitzKey& key, const BitVec& input) {
  if (input.size() > ToeplitzKey::kMaxInputBits)
    throw std::invalid_argument("toeplitz input exceeds 289 bits");
  std::uint32_t acc = 0;
  const auto& words = input.words();
  for (std::size_t w = 0; w < words.size(); ++w) {
    std::uint64_t chunk = words[w];
    while (chunk != 0) {
      const int lead = std::countl_zero(chunk);
      acc ^= key.window32(w * 64 + static_cast<std::size_t>(lead));
      chunk &= ~(std::uint64_t(0x8000000000000000u) >> lead);
    }
  }
  return acc;
}

}  // namespace ipidlab
