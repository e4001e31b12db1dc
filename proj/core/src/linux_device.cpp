#include "ipidlab/linux_device.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "json.hpp"

#include "ipidlab/jhash.hpp"

namespace ipidlab {
namespace {

using json = nlohmann::ordered_json;

constexpr std::uint64_t kTagMaterial = 0x11a1;
constexpr std::uint64_t kTagCounters = 0x11a2;
constexpr std::uint64_t kTagHops = 0x11a3;

}  // namespace

const char* linux_flavor_name(LinuxFlavor flavor) {
  switch (flavor) {
    case LinuxFlavor::kA0: return "a0";
    case LinuxFlavor::kA1: return "a1";
    case LinuxFlavor::kA2: return "a2";
    case LinuxFlavor::kA3: return "a3";
  }
  return "?";
}

LinuxFlavor parse_linux_flavor(const std::string& name) {
  if (name == "a0") return LinuxFlavor::kA0;
  if (name == "a1") return LinuxFlavor::kA1;
  if (name == "a2") return LinuxFlavor::kA2;
  if (name == "a3") return LinuxFlavor::kA3;
  throw std::invalid_argument("unknown linux variant: " + name);
}

int keyspace_log2(LinuxFlavor flavor, Arch arch) {
  if (flavor != LinuxFlavor::kA3) return 32;
  return arch == Arch::kX64 ? 41 : 48;
}

LinuxDevice::LinuxDevice(const LinuxDeviceConfig& config)
    : config_(config), hop_rng_(Rng(config.seed).fork(kTagHops)) {
  if (config.bucket_count < 1) throw std::invalid_argument("bucket count must be positive");
  if (config.tick_hz < 1) throw std::invalid_argument("tick frequency must be positive");

  Rng material = Rng(config.seed).fork(kTagMaterial);
  key_ = material.next_u32();
  layout_ = sample_kaslr_layout(config.arch, config.kaslr, material,
                                config.init_net_offset);
  if (config.flavor == LinuxFlavor::kA3)
    g_net_ = net_hash_mix(layout_.net_ptr(), config.rho);

  // The counter array starts as boot-time random data; last-use stamps at 0.
  Rng counters = Rng(config.seed).fork(kTagCounters);
  beta_.resize(config.bucket_count);
  for (auto& b : beta_) b = static_cast<std::uint16_t>(counters.bits(16));
  tau_.assign(config.bucket_count, 0);
}

std::uint32_t LinuxDevice::bucket_index(Ipv4 dst) const {
  const auto proto = static_cast<std::uint32_t>(config_.protocol);
  std::uint32_t h = 0;
  switch (config_.flavor) {
    case LinuxFlavor::kA0:
      return 0;
    case LinuxFlavor::kA1:
      h = jenkins_lookup3_a1(dst.value, config_.src.value, proto, key_);
      break;
    case LinuxFlavor::kA2:
      h = jenkins_lookup3(dst.value, config_.src.value, proto, key_);
      break;
    case LinuxFlavor::kA3:
      h = jenkins_lookup3(dst.value, config_.src.value, proto ^ g_net_, key_);
      break;
  }
  return h % static_cast<std::uint32_t>(config_.bucket_count);
}

std::uint16_t LinuxDevice::generate(Ipv4 dst, std::uint64_t t_now_ticks) {
  if (t_now_ticks < last_tick_) throw std::runtime_error("tick clock ran backwards");
  last_tick_ = t_now_ticks;
  if (config_.flavor == LinuxFlavor::kA0) return 0;

  const std::uint32_t i = bucket_index(dst);
  const std::uint64_t idle = t_now_ticks - tau_[i];
  const std::uint64_t hop = 1 + hop_rng_.below(idle);
  beta_[i] = static_cast<std::uint16_t>(beta_[i] + hop);
  tau_[i] = t_now_ticks;
  return beta_[i];
}

std::uint64_t LinuxDevice::ticks_at(double seconds) const {
  if (seconds < 0) throw std::invalid_argument("time before session start");
  return static_cast<std::uint64_t>(std::floor(seconds * config_.tick_hz));
}

std::string LinuxDevice::save_descriptor() const {
  json out;
  out["os"] = "linux";
  out["variant"] = linux_flavor_name(config_.flavor);
  out["f"] = config_.tick_hz;
  out["m"] = config_.bucket_count;
  out["protocol"] = config_.protocol;
  out["src_ip"] = to_string(config_.src);
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%08x", key_);
  out["key_hex"] = buf;
  out["arch"] = arch_name(config_.arch);
  out["rho"] = config_.rho;
  out["kaslr"] = config_.kaslr;
  std::snprintf(buf, sizeof buf, "0x%llx",
                static_cast<unsigned long long>(layout_.kernel_base));
  out["kernel_base_hex"] = buf;
  out["init_net_offset"] = config_.init_net_offset;
  out["seed"] = config_.seed;
  return out.dump(2);
}

LinuxDevice LinuxDevice::load_descriptor(const std::string& text) {
  const json in = json::parse(text);
  if (in.at("os").get<std::string>() != "linux")
    throw std::invalid_argument("descriptor is not a linux device");
  LinuxDeviceConfig config;
  config.flavor = parse_linux_flavor(in.at("variant").get<std::string>());
  config.tick_hz = in.at("f").get<int>();
  config.bucket_count = in.at("m").get<int>();
  config.protocol = in.at("protocol").get<std::uint8_t>();
  config.src = parse_ipv4(in.at("src_ip").get<std::string>());
  config.arch = parse_arch(in.at("arch").get<std::string>());
  config.rho = in.at("rho").get<int>();
  config.kaslr = in.at("kaslr").get<bool>();
  config.init_net_offset = in.at("init_net_offset").get<std::uint64_t>();
  config.seed = in.at("seed").get<std::uint64_t>();

  LinuxDevice device(config);
  // Explicit key material in the file wins over the seed derivation, so
  // hand-written descriptors behave as written.
  device.key_ = static_cast<std::uint32_t>(
      std::stoul(in.at("key_hex").get<std::string>(), nullptr, 16));
  device.layout_.kernel_base =
      std::stoull(in.at("kernel_base_hex").get<std::string>(), nullptr, 16);
  device.layout_.init_net_offset = config.init_net_offset;
  if (config.flavor == LinuxFlavor::kA3)
    device.g_net_ = net_hash_mix(device.layout_.net_ptr(), config.rho);
  return device;
}

}  // namespace ipidlab
