#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ipidlab/ipv4.hpp"
#include "ipidlab/toeplitz.hpp"

namespace ipidlab {

class Rng;

// PreRs5 truncates the per-destination value to 15 bits; Rs5 keeps 16. Nothing
// else differs, and the extraction code masks RS5 output down to 15 bits anyway.
enum class WindowsFlavor { kPreRs5, kRs5 };

// Toeplitz is the real generator; StrongMix swaps the keyed linear hash for a
// non-linear 64-bit mixer with the same offset+bucket-counter structure. It
// exists to show which observable properties survive when the hash gives away
// nothing (see the fingerprint helpers in the attack header).
enum class WindowsHashKind { kToeplitz, kStrongMix };

struct WindowsDeviceConfig {
  WindowsFlavor flavor = WindowsFlavor::kPreRs5;
  WindowsHashKind hash = WindowsHashKind::kToeplitz;
  std::uint32_t bucket_count = 8192;  // power of two in practice
  Ipv4 src = Ipv4(203, 0, 113, 7);
  std::uint64_t seed = 1;
  // Test fixture: zero all bucket counters instead of the seeded-random fill.
  bool zero_counters = false;
};

// Stateful IP ID source: one keyed offset per destination plus a bucket counter
// chosen by a keyed hash of the destination's upper half. All key material is
// drawn once at construction, like a kernel does at boot.
class WindowsDevice {
 public:
  explicit WindowsDevice(const WindowsDeviceConfig& config);

  // Emits the IPID for one outgoing packet and advances the bucket counter.
  std::uint16_t generate(Ipv4 dst);

  std::uint32_t bucket_index(Ipv4 dst) const;
  // Foreign traffic hook: advance one bucket without emitting anything.
  void bump_bucket(std::uint32_t index) { counters_[index] += 1; }

  const WindowsDeviceConfig& config() const { return config_; }
  Ipv4 src() const { return config_.src; }
  WindowsFlavor flavor() const { return config_.flavor; }
  std::uint32_t bucket_count() const { return config_.bucket_count; }

  // Ground-truth accessors for tests and planted-key verification.
  const ToeplitzKey& key() const { return key_; }
  std::uint32_t k1() const { return k1_; }
  std::uint32_t k2() const { return k2_; }
  std::uint32_t counter(std::uint32_t index) const { return counters_[index]; }
  // K_18..K_62 of the hashing key, K_62 in bit 0.
  std::uint64_t planted_key_tail45() const;

  // Descriptor round trip. Counters are not serialized; they are reconstructed
  // from the seed on load, so save/load/generate replays identically.
  std::string save_descriptor() const;
  static WindowsDevice load_descriptor(const std::string& json_text);

 private:
  std::uint32_t offset32(Ipv4 dst) const;

  WindowsDeviceConfig config_;
  ToeplitzKey key_;
  std::uint32_t k1_ = 0, k2_ = 0;
  std::uint32_t toeplitz_src_ = 0;        // T(K, 0^32 || src)
  std::uint32_t toeplitz_src_only_ = 0;   // T(K, src)
  std::uint64_t mix_seed1_ = 0, mix_seed2_ = 0;  // StrongMix key material
  std::vector<std::uint32_t> counters_;
};

}  // namespace ipidlab
