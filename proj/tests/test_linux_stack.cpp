#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ipidlab/jhash.hpp"
#include "ipidlab/kaslr.hpp"
#include "ipidlab/linux_device.hpp"
#include "ipidlab/rng.hpp"
#include "ipidlab/windows_device.hpp"

using namespace ipidlab;

namespace {

LinuxDeviceConfig config_for(LinuxFlavor flavor, std::uint64_t seed = 7) {
  LinuxDeviceConfig cfg;
  cfg.flavor = flavor;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("every emitted ipid is the destination bucket counter") {
  for (LinuxFlavor flavor : {LinuxFlavor::kA1, LinuxFlavor::kA2, LinuxFlavor::kA3}) {
    LinuxDevice dev(config_for(flavor));
    Rng rng(31);
    std::uint64_t t = 0;
    for (int n = 0; n < 2000; ++n) {
      const Ipv4 dst = random_public_ipv4(rng);
      t += rng.below(4);
      const std::uint16_t ipid = dev.generate(dst, t);
      CHECK(ipid == dev.counter(dev.bucket_index(dst)));
    }
  }
}

TEST_CASE("counter hops never exceed the idle time") {
  LinuxDevice dev(config_for(LinuxFlavor::kA2));
  Rng rng(32);
  std::map<std::uint32_t, std::uint64_t> last_used;  // mirrors the device's tau
  std::uint64_t t = 0;
  for (int n = 0; n < 3000; ++n) {
    const Ipv4 dst = random_public_ipv4(rng);
    t += rng.below(6);  // keeps every idle window far below the 2^16 wrap
    const std::uint32_t i = dev.bucket_index(dst);
    const std::uint16_t before = dev.counter(i);
    const std::uint16_t after = dev.generate(dst, t);
    const std::uint32_t hop = static_cast<std::uint16_t>(after - before);
    const std::uint64_t idle = t - last_used[i];
    CHECK(hop >= 1);
    CHECK(hop <= std::max<std::uint64_t>(idle, 1));
    last_used[i] = t;
  }
}

TEST_CASE("back to back packets in one tick advance by exactly one") {
  LinuxDevice dev(config_for(LinuxFlavor::kA2));
  const Ipv4 dst{0x08080808u};
  const std::uint16_t first = dev.generate(dst, 100);
  for (int k = 1; k <= 20; ++k)
    CHECK(dev.generate(dst, 100) == static_cast<std::uint16_t>(first + k));
}

TEST_CASE("the null variant emits zero forever") {
  LinuxDevice dev(config_for(LinuxFlavor::kA0));
  Rng rng(33);
  for (int n = 0; n < 100; ++n)
    CHECK(dev.generate(random_public_ipv4(rng), static_cast<std::uint64_t>(n)) == 0);
  CHECK(dev.bucket_index(Ipv4{0x01020304u}) == 0);
}

TEST_CASE("the clock may stall but never run backwards") {
  LinuxDevice dev(config_for(LinuxFlavor::kA2));
  dev.generate(Ipv4{0x08080808u}, 10);
  CHECK_NOTHROW(dev.generate(Ipv4{0x08080404u}, 10));
  CHECK_THROWS_AS(dev.generate(Ipv4{0x08080808u}, 9), std::runtime_error);

  LinuxDevice null_dev(config_for(LinuxFlavor::kA0));
  null_dev.generate(Ipv4{0x08080808u}, 10);
  CHECK_THROWS(null_dev.generate(Ipv4{0x08080808u}, 3));
}

TEST_CASE("seconds map to whole ticks by truncation") {
  LinuxDeviceConfig cfg = config_for(LinuxFlavor::kA2);
  cfg.tick_hz = 300;
  LinuxDevice dev(cfg);
  CHECK(dev.ticks_at(0.0) == 0);
  CHECK(dev.ticks_at(0.999) == 299);
  CHECK(dev.ticks_at(1.0) == 300);
  CHECK(dev.ticks_at(3.75) == 1125);
  CHECK_THROWS(dev.ticks_at(-0.001));

  cfg.tick_hz = 250;
  LinuxDevice slow(cfg);
  CHECK(slow.ticks_at(0.01) == 2);  // 2.5 truncates down
}

TEST_CASE("bucket choice reproduces the keyed word hash") {
  Rng rng(34);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    LinuxDevice a1(config_for(LinuxFlavor::kA1, seed));
    LinuxDevice a2(config_for(LinuxFlavor::kA2, seed));
    LinuxDevice a3(config_for(LinuxFlavor::kA3, seed));
    const auto m = static_cast<std::uint32_t>(a1.config().bucket_count);
    for (int n = 0; n < 400; ++n) {
      const Ipv4 dst = random_public_ipv4(rng);
      const std::uint32_t src = a1.config().src.value;
      const std::uint32_t proto = a1.config().protocol;
      CHECK(a1.bucket_index(dst) ==
            jenkins_lookup3_a1(dst.value, src, proto, a1.key()) % m);
      CHECK(a2.bucket_index(dst) ==
            jenkins_lookup3(dst.value, src, proto, a2.key()) % m);
      CHECK(a3.bucket_index(dst) ==
            jenkins_lookup3(dst.value, src, proto ^ a3.g_net(), a3.key()) % m);
    }
    CHECK(a1.g_net() == 0);
    CHECK(a2.g_net() == 0);
    CHECK(a3.g_net() != 0);
  }
}

TEST_CASE("destinations spread evenly over the buckets") {
  LinuxDevice dev(config_for(LinuxFlavor::kA2, 41));
  const int m = dev.config().bucket_count;
  const int n = 1 << 18;
  std::vector<int> hits(m, 0);
  Rng rng(35);
  for (int k = 0; k < n; ++k) ++hits[dev.bucket_index(random_public_ipv4(rng))];

  const double expected = static_cast<double>(n) / m;
  double chi2 = 0;
  for (int h : hits) chi2 += (h - expected) * (h - expected) / expected;
  // mean m-1 = 2047, sd about 64; five sigma on a pinned seed
  CHECK(chi2 > 2047 - 5 * 64);
  CHECK(chi2 < 2047 + 5 * 64);
}

TEST_CASE("the keyspace an observer must search") {
  for (Arch arch : {Arch::kX64, Arch::kArm64}) {
    CHECK(keyspace_log2(LinuxFlavor::kA0, arch) == 32);
    CHECK(keyspace_log2(LinuxFlavor::kA1, arch) == 32);
    CHECK(keyspace_log2(LinuxFlavor::kA2, arch) == 32);
  }
  CHECK(keyspace_log2(LinuxFlavor::kA3, Arch::kX64) == 41);   // 32 + 9 slot bits
  CHECK(keyspace_log2(LinuxFlavor::kA3, Arch::kArm64) == 48); // 32 + 16 slot bits
}

TEST_CASE("descriptor round trips and replays the packet stream") {
  for (LinuxFlavor flavor : {LinuxFlavor::kA1, LinuxFlavor::kA2, LinuxFlavor::kA3}) {
    LinuxDeviceConfig cfg = config_for(flavor, 91);
    cfg.tick_hz = 250;
    cfg.arch = Arch::kArm64;
    cfg.rho = 7;
    LinuxDevice original(cfg);
    LinuxDevice copy = LinuxDevice::load_descriptor(original.save_descriptor());

    CHECK(copy.key() == original.key());
    CHECK(copy.g_net() == original.g_net());
    CHECK(copy.layout().kernel_base == original.layout().kernel_base);
    CHECK(copy.config().tick_hz == 250);

    Rng rng(36);
    std::uint64_t t = 0;
    for (int n = 0; n < 500; ++n) {
      const Ipv4 dst = random_public_ipv4(rng);
      t += rng.below(3);
      CHECK(original.generate(dst, t) == copy.generate(dst, t));
    }
  }

  WindowsDeviceConfig wcfg;
  WindowsDevice windows_device(wcfg);
  CHECK_THROWS(LinuxDevice::load_descriptor(windows_device.save_descriptor()));
  CHECK_THROWS(LinuxDevice::load_descriptor("{}"));
}

TEST_CASE("explicit key material in a descriptor wins over the seed") {
  LinuxDevice dev(config_for(LinuxFlavor::kA3, 92));
  std::string text = dev.save_descriptor();

  // splice in a hand-picked key and kernel base
  const auto patch = [&](const std::string& field, const std::string& value) {
    const auto at = text.find("\"" + field + "\"");
    REQUIRE(at != std::string::npos);
    const auto colon = text.find(':', at);
    const auto comma = text.find_first_of(",\n", colon);
    text = text.substr(0, colon + 1) + " \"" + value + "\"" + text.substr(comma);
  };
  patch("key_hex", "0xdeadbeef");
  patch("kernel_base_hex", "0xffffffff81e00000");

  LinuxDevice custom = LinuxDevice::load_descriptor(text);
  CHECK(custom.key() == 0xdeadbeefu);
  CHECK(custom.layout().kernel_base == 0xffffffff81e00000ull);
  CHECK(custom.g_net() ==
        net_hash_mix(0xffffffff81e00000ull + custom.config().init_net_offset,
                     custom.config().rho));
}

TEST_CASE("kernel image placement is 2MB aligned inside the window") {
  Rng rng(37);
  std::set<std::uint64_t> seen;
  for (int n = 0; n < 300; ++n) {
    const KaslrLayout x = sample_kaslr_layout(Arch::kX64, true, rng, 0x1553c80);
    const std::uint64_t disp = x.kernel_base - kX64DefaultBase;
    CHECK(disp % (1ull << 21) == 0);
    CHECK((disp >> 21) < 512);
    seen.insert(x.kernel_base);

    const KaslrLayout a = sample_kaslr_layout(Arch::kArm64, true, rng, 0x1553c80);
    const std::uint64_t adisp = a.kernel_base - kArm64DefaultBase;
    CHECK(adisp % (1ull << 21) == 0);
    CHECK((adisp >> 21) < (1ull << 16));
  }
  CHECK(seen.size() > 100);  // actually randomized, not stuck on one slot

  Rng off(38);
  CHECK(sample_kaslr_layout(Arch::kX64, false, off, 7).kernel_base == kX64DefaultBase);
  CHECK(sample_kaslr_layout(Arch::kArm64, false, off, 7).kernel_base ==
        kArm64DefaultBase);
  CHECK(sample_kaslr_layout(Arch::kX64, false, off, 7).net_ptr() ==
        kX64DefaultBase + 7);
}

TEST_CASE("the namespace mix is a truncated shifted pointer") {
  CHECK(net_hash_mix(0xffffffff82553c80ull, 6) ==
        static_cast<std::uint32_t>(0xffffffff82553c80ull >> 6));
  CHECK(net_hash_mix(0xffffffff82553c80ull, 0) == 0x82553c80u);
  CHECK(net_hash_mix(0x8000000000000000ull, 63) == 1u);
  CHECK_THROWS(net_hash_mix(1, -1));
  CHECK_THROWS(net_hash_mix(1, 64));
}

TEST_CASE("the kernel base is recovered from the namespace mix") {
  const std::uint64_t off = 0x1553c80;

  for (int rho : {6, 7, 12}) {
    for (std::uint64_t slot = 0; slot < 512; ++slot) {
      const std::uint64_t base = kX64DefaultBase + (slot << 21);
      const std::uint32_t g = net_hash_mix(base + off, rho);
      CHECK(reconstruct_kernel_base(g, rho, Arch::kX64, off) == base);
    }
  }

  Rng rng(39);
  for (int n = 0; n < 1000; ++n) {
    const std::uint64_t slot = rng.bits(16);
    const std::uint64_t base = kArm64DefaultBase + (slot << 21);
    const std::uint32_t g = net_hash_mix(base + off, 6);
    CHECK(reconstruct_kernel_base(g, 6, Arch::kArm64, off) == base);
  }

  // a pointer between slots matches nothing
  const std::uint32_t stray = net_hash_mix(kX64DefaultBase + (1ull << 20) + off, 6);
  CHECK_THROWS(reconstruct_kernel_base(stray, 6, Arch::kX64, off));
}
