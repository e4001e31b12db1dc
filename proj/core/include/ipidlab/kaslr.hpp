#pragma once

#include <cstdint>
#include <string>

namespace ipidlab {

class Rng;

enum class Arch { kX64, kArm64 };

// Randomized kernel image placement: both architectures slide the image by a
// 2MB-aligned random displacement above a fixed default base.
struct KaslrLayout {
  Arch arch = Arch::kX64;
  std::uint64_t kernel_base = 0;
  std::uint64_t init_net_offset = 0;

  std::uint64_t net_ptr() const { return kernel_base + init_net_offset; }
};

constexpr std::uint64_t kX64DefaultBase = 0xffffffff81000000ull;
constexpr std::uint64_t kArm64DefaultBase = 0xffffff8008080000ull;
constexpr int kX64Slots = 512;       // 9 random bits of displacement
constexpr int kArm64SlotBits = 16;   // 16 random bits of displacement

KaslrLayout sample_kaslr_layout(Arch arch, bool kaslr_enabled, Rng& rng,
                                std::uint64_t init_net_offset);

// The 32-bit namespace mix the generator folds into the protocol word:
// a right-shift of the net-structure address truncated to 32 bits.
std::uint32_t net_hash_mix(std::uint64_t net_ptr, int rho);

// Inverts net_hash_mix over the architecture's feasible bases: enumerates the
// 2MB-aligned slots, returns the unique base whose net pointer reproduces
// g_net. Throws when no aligned base matches (inconsistent inputs).
std::uint64_t reconstruct_kernel_base(std::uint32_t g_net, int rho, Arch arch,
                                      std::uint64_t init_net_offset);

const char* arch_name(Arch arch);
Arch parse_arch(const std::string& name);

}  // namespace ipidlab
