#include "ipidlab/windows_device.hpp"

#include <cstdio>
#include <stdexcept>

#include "ipidlab/rng.hpp"
#include "json.hpp"

namespace ipidlab {

namespace {

// Stream tags for deriving independent key/counter material from one seed.
constexpr std::uint64_t kTagKeys = 0x57c1;
constexpr std::uint64_t kTagCounters = 0x57c2;

std::uint64_t mix64(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = seed + a * 0x9e3779b97f4a7c15ull + b * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::string hex32(std::uint32_t v) {
  char buf[11];
  std::snprintf(buf, sizeof(buf), "0x%08x", v);
  return buf;
}

std::uint32_t parse_hex32(const std::string& s) {
  return static_cast<std::uint32_t>(std::stoul(s, nullptr, 16));
}

struct KeyMaterial {
  BitVec key_bits;
  std::uint32_t k1, k2;
  std::uint64_t mix1, mix2;
};

KeyMaterial derive_material(std::uint64_t seed) {
  Rng keys = Rng(seed).fork(kTagKeys);
  KeyMaterial m{BitVec::random(ToeplitzKey::kBits, keys), 0, 0, 0, 0};
  m.k1 = keys.next_u32();
  m.k2 = keys.next_u32();
  m.mix1 = keys.next_u64();
  m.mix2 = keys.next_u64();
  return m;
}

}  // namespace

WindowsDevice::WindowsDevice(const WindowsDeviceConfig& config)
    : config_(config),
      key_(ToeplitzKey(derive_material(config.seed).key_bits)),
      counters_(config.bucket_count == 0 ? 1 : config.bucket_count, 0) {
  if (config.bucket_count == 0)
    throw std::invalid_argument("bucket_count must be positive");
  const KeyMaterial m = derive_material(config_.seed);
  k1_ = m.k1;
  k2_ = m.k2;
  mix_seed1_ = m.mix1;
  mix_seed2_ = m.mix2;

  toeplitz_src_ = toeplitz_hash(
      key_, BitVec(32).concat(BitVec::from_ipv4(config_.src)));  // 0^32 || src
  toeplitz_src_only_ = toeplitz_hash(key_, BitVec::from_ipv4(config_.src));

  if (!config_.zero_counters) {
    Rng counters = Rng(config_.seed).fork(kTagCounters);
    for (auto& c : counters_) c = counters.next_u32();
  }
}

std::uint32_t WindowsDevice::bucket_index(Ipv4 dst) const {
  if (config_.hash == WindowsHashKind::kStrongMix) {
    return static_cast<std::uint32_t>(
        mix64(mix_seed2_, config_.src.value, dst.value >> 16) %
        config_.bucket_count);
  }
  std::uint32_t t_hi = 0;  // T(K, first half of dst), a 16-bit input
  for (unsigned j = 0; j < 16; ++j)
    if (dst.bit(j)) t_hi ^= key_.window32(j);
  return (k2_ ^ t_hi ^ toeplitz_src_only_) % config_.bucket_count;
}

std::uint32_t WindowsDevice::offset32(Ipv4 dst) const {
  if (config_.hash == WindowsHashKind::kStrongMix) {
    return static_cast<std::uint32_t>(mix64(mix_seed1_, config_.src.value, dst.value));
  }
  std::uint32_t t_dst = 0;  // T(K, dst); the trailing 0^32 of dst||src||0^32 is free
  for (unsigned j = 0; j < 32; ++j)
    if (dst.bit(j)) t_dst ^= key_.window32(j);
  return k1_ ^ t_dst ^ toeplitz_src_;
}

std::uint16_t WindowsDevice::generate(Ipv4 dst) {
  const std::uint32_t i = bucket_index(dst);
  const std::uint32_t v = counters_[i] + offset32(dst);
  counters_[i] += 1;
  return config_.flavor == WindowsFlavor::kPreRs5
             ? static_cast<std::uint16_t>(v & 0x7fff)
             : static_cast<std::uint16_t>(v & 0xffff);
}

std::uint64_t WindowsDevice::planted_key_tail45() const {
  std::uint64_t tail = 0;
  for (unsigned i = 18; i <= 62; ++i)
    tail = (tail << 1) | (key_.bit(i) ? 1u : 0u);
  return tail;
}

std::string WindowsDevice::save_descriptor() const {
  nlohmann::ordered_json j;
  j["os"] = "windows";
  j["flavor"] = config_.flavor == WindowsFlavor::kPreRs5 ? "pre_rs5" : "rs5";
  j["hash"] = config_.hash == WindowsHashKind::kToeplitz ? "toeplitz" : "strongmix";
  j["m"] = config_.bucket_count;
  j["src_ip"] = to_string(config_.src);
  j["seed"] = config_.seed;
  j["k"] = key_.bits().to_hex();
  j["k1"] = hex32(k1_);
  j["k2"] = hex32(k2_);
  j["zero_counters"] = config_.zero_counters;
  return j.dump(2);
}

WindowsDevice WindowsDevice::load_descriptor(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  if (j.at("os").get<std::string>() != "windows")
    throw std::invalid_argument("descriptor os is not windows");
  WindowsDeviceConfig cfg;
  cfg.flavor = j.at("flavor").get<std::string>() == "rs5" ? WindowsFlavor::kRs5
                                                          : WindowsFlavor::kPreRs5;
  cfg.hash = j.value("hash", "toeplitz") == "strongmix" ? WindowsHashKind::kStrongMix
                                                        : WindowsHashKind::kToeplitz;
  cfg.bucket_count = j.at("m").get<std::uint32_t>();
  cfg.src = parse_ipv4(j.at("src_ip").get<std::string>());
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.zero_counters = j.value("zero_counters", false);

  WindowsDevice dev(cfg);
  // Honor explicit key material (it normally matches the seed derivation, but
  // the descriptor is authoritative).
  dev.key_ = ToeplitzKey(BitVec::from_hex(j.at("k").get<std::string>()));
  dev.k1_ = parse_hex32(j.at("k1").get<std::string>());
  dev.k2_ = parse_hex32(j.at("k2").get<std::string>());
  dev.toeplitz_src_ =
      toeplitz_hash(dev.key_, BitVec(32).concat(BitVec::from_ipv4(cfg.src)));
  dev.toeplitz_src_only_ = toeplitz_hash(dev.key_, BitVec::from_ipv4(cfg.src));
  return dev;
}

}  // namespace ipidlab
