#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ipidlab/ipv4.hpp"
#include "ipidlab/kaslr.hpp"
#include "ipidlab/rng.hpp"

namespace ipidlab {

// Generator flavors in order of kernel evolution: constant zero, the keyed
// bucket-counter scheme with the old hash, the same with the corrected hash,
// and the corrected hash with the net-namespace pointer mixed in.
enum class LinuxFlavor { kA0, kA1, kA2, kA3 };

const char* linux_flavor_name(LinuxFlavor flavor);
LinuxFlavor parse_linux_flavor(const std::string& name);

// log2 of the keyspace an off-path observer must search: 32 key bits, plus
// the unknown namespace-mix word for A3 (9 displacement bits on x64 under
// the default shift, 16 on ARM64).
int keyspace_log2(LinuxFlavor flavor, Arch arch);

struct LinuxDeviceConfig {
  LinuxFlavor flavor = LinuxFlavor::kA2;
  int tick_hz = 300;          // f: 100, 250 and 300 are the common builds
  int bucket_count = 2048;    // M
  std::uint8_t protocol = 17; // UDP
  Ipv4 src = Ipv4{0xc6336417u};  // 198.51.100.23
  Arch arch = Arch::kX64;
  int rho = 6;                // net-pointer right shift (6, 7 or 12 in the wild)
  bool kaslr = true;
  std::uint64_t init_net_offset = 0x1553c80;  // sample build's init_net
  std::uint64_t seed = 1;
};

class LinuxDevice {
 public:
  explicit LinuxDevice(const LinuxDeviceConfig& config);

  // One datagram to dst at time t_now (ticks). The bucket counter advances by
  // 1 + random(t_now - tau[i]) and the new value is the IPID. Throws if the
  // clock runs backwards.
  std::uint16_t generate(Ipv4 dst, std::uint64_t t_now_ticks);

  std::uint32_t bucket_index(Ipv4 dst) const;
  std::uint64_t ticks_at(double seconds) const;

  const LinuxDeviceConfig& config() const { return config_; }
  std::uint32_t key() const { return key_; }
  std::uint32_t g_net() const { return g_net_; }  // 0 unless A3
  const KaslrLayout& layout() const { return layout_; }

  // Oracle access for ground-truth tests.
  std::uint16_t counter(std::uint32_t index) const { return beta_.at(index); }

  std::string save_descriptor() const;
  static LinuxDevice load_descriptor(const std::string& text);

 private:
  LinuxDeviceConfig config_;
  std::uint32_t key_ = 0;
  std::uint32_t g_net_ = 0;
  KaslrLayout layout_;
  std::vector<std::uint16_t> beta_;
  std::vector<std::uint64_t> tau_;
  std::uint64_t last_tick_ = 0;
  Rng hop_rng_;
};

}  // namespace ipidlab
