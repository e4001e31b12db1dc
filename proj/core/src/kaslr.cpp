#include "ipidlab/kaslr.hpp"

#include <stdexcept>

#include "ipidlab/rng.hpp"

namespace ipidlab {

KaslrLayout sample_kaslr_layout(Arch arch, bool kaslr_enabled, Rng& rng,
                                std::uint64_t init_net_offset) {
  KaslrLayout layout;
  layout.arch = arch;
  layout.init_net_offset = init_net_offset;
  std::uint64_t slot = 0;
  if (kaslr_enabled)
    slot = arch == Arch::kX64 ? rng.below(kX64Slots) : rng.bits(kArm64SlotBits);
  const std::uint64_t base = arch == Arch::kX64 ? kX64DefaultBase : kArm64DefaultBase;
  layout.kernel_base = base + (slot << 21);
  return layout;
}

std::uint32_t net_hash_mix(std::uint64_t net_ptr, int rho) {
  if (rho < 0 || rho > 63) throw std::invalid_argument("shift out of range");
  return static_cast<std::uint32_t>(net_ptr >> rho);
}

std::uint64_t reconstruct_kernel_base(std::uint32_t g_net, int rho, Arch arch,
                                      std::uint64_t init_net_offset) {
  const std::uint64_t base = arch == Arch::kX64 ? kX64DefaultBase : kArm64DefaultBase;
  const std::uint64_t slots = arch == Arch::kX64 ? kX64Slots : (1ull << kArm64SlotBits);
  for (std::uint64_t slot = 0; slot < slots; ++slot) {
    const std::uint64_t candidate = base + (slot << 21);
    if (net_hash_mix(candidate + init_net_offset, rho) == g_net) return candidate;
  }
  throw std::invalid_argument("g(net) matches no 2MB-aligned kernel base");
}

const char* arch_name(Arch arch) { return arch == Arch::kX64 ? "x64" : "arm64"; }

Arch parse_arch(const std::string& name) {
  if (name == "x64" || name == "x86_64" || name == "amd64") return Arch::kX64;
  if (name == "arm64" || name == "aarch64") return Arch::kArm64;
  throw std::invalid_argument("unknown arch: " + name);
}

}  // namespace ipidlab
