// Acceptance suite: one self-contained check per numbered criterion from the
// project requirements, each printing a PASS/FAIL line with the measured
// figures and the pinned tolerance. Statistical checks use a 3-sigma band
// around the expected rate; fixed reference numbers use the stated relative
// tolerance. Exit status is the number of failing criteria.
//
//   acceptance                 run everything (minutes; criteria 2 and 8 dominate)
//   acceptance --criterion N   run one criterion
//   acceptance --full-space    only the full 2^32 Linux key scan (tens of minutes)

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <exception>
#include <set>
#include <string>
#include <vector>

#include "ipidlab/bitmatrix.hpp"
#include "ipidlab/bitvec.hpp"
#include "ipidlab/ipv4.hpp"
#include "ipidlab/kaslr.hpp"
#include "ipidlab/linux_attack.hpp"
#include "ipidlab/linux_device.hpp"
#include "ipidlab/netsim.hpp"
#include "ipidlab/rng.hpp"
#include "ipidlab/toeplitz.hpp"
#include "ipidlab/windows_attack.hpp"
#include "ipidlab/windows_device.hpp"

using namespace ipidlab;

namespace {

struct Stopwatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

std::string fmt(const char* f, ...) {
  char buf[768];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

struct Band {
  double lo = 0, hi = 0;
  bool holds(double x) const { return x >= lo && x <= hi; }
};

Band three_sigma(double p, double n) {
  const double s = std::sqrt(p * (1.0 - p) / n);
  return {p - 3.0 * s, p + 3.0 * s};
}

bool within(double got, double want, double rel) {
  return std::fabs(got / want - 1.0) <= rel;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

bool has_key(const WindowsAttackOutcome& out, std::uint64_t key) {
  for (const auto& k : out.keys)
    if (k.key18_62 == key) return true;
  return false;
}

// ---------------------------------------------------------------------------
// 1. Windows round trip: J=6/G=12/Q=3 plans against fresh devices, loss-free
//    and in-order. The planted 45-bit key must always be among the survivors,
//    exactly one survivor ~99.38% of the time, and each extraction cheap.

Outcome windows_round_trip() {
  constexpr int kDevices = 1000;
  constexpr double kUniqueRate = 0.9938;
  constexpr double kTimeLimit = 2.0;

  Rng plan_rng(0x57a9e001);
  int contained = 0, unique = 0;
  double slowest = 0;
  for (int trial = 0; trial < kDevices; ++trial) {
    const MeasurementPlan plan = random_plan(6, 12, 3, plan_rng);
    const PlanMatrices pre = preprocess_plan(plan);
    WindowsDeviceConfig cfg;
    cfg.seed = 0x10000001ull + trial;
    WindowsDevice device(cfg);
    const PacketTrace trace = simulate_windows_session(device, plan);
    const auto phase1 = windows_phase1_ipids(trace, plan);
    const auto pairs = windows_pair_ipids(trace, plan);
    Stopwatch attack;
    const WindowsAttackOutcome out = extract_windows_key(phase1, pairs, plan, pre);
    slowest = std::max(slowest, attack.seconds());
    contained += has_key(out, device.planted_key_tail45());
    unique += out.keys.size() == 1;
  }

  const Band band = three_sigma(kUniqueRate, kDevices);
  const double rate = double(unique) / kDevices;
  const bool pass =
      contained == kDevices && band.holds(rate) && slowest <= kTimeLimit;
  return {pass, fmt("planted %d/%d, unique rate %.4f want [%.4f, %.4f], "
                    "slowest attack %.3f s (limit %.0f s)",
                    contained, kDevices, rate, band.lo, band.hi, slowest,
                    kTimeLimit)};
}

// ---------------------------------------------------------------------------
// 2. False-survivor channel: a second key differing from the planted one only
//    in K_18 survives with probability 2^-8 + 2^-9 ~ 0.00586 (one chance for
//    the flipped-counter-base candidate, half that for the straight one).

Outcome twin_key_rate() {
  constexpr int kTrials = 100000;
  constexpr double kTwinRate = 0.00586;

  Rng plan_rng(0x57a9e002);
  int twins = 0, missing = 0;
  for (int trial = 0; trial < kTrials; ++trial) {
    const MeasurementPlan plan = random_plan(6, 12, 3, plan_rng);
    const PlanMatrices pre = preprocess_plan(plan);
    WindowsDeviceConfig cfg;
    cfg.seed = 0x20000001ull + trial;
    WindowsDevice device(cfg);
    const PacketTrace trace = simulate_windows_session(device, plan);
    const WindowsAttackOutcome out = extract_windows_key(
        windows_phase1_ipids(trace, plan), windows_pair_ipids(trace, plan),
        plan, pre);
    const std::uint64_t planted = device.planted_key_tail45();
    if (!has_key(out, planted)) {
      ++missing;
      continue;
    }
    twins += has_key(out, planted ^ (1ull << 44));
  }

  const Band band = three_sigma(kTwinRate, kTrials);
  const double rate = double(twins) / kTrials;
  const bool pass = missing == 0 && band.holds(rate);
  return {pass, fmt("twin rate %.5f want [%.5f, %.5f] over %d trials, "
                    "planted missing %d",
                    rate, band.lo, band.hi, kTrials, missing)};
}

// ---------------------------------------------------------------------------
// 3. Unknown send order and dropped packets. A fully reversed first block
//    defeats the in-order extraction and is recovered by the J! order search;
//    the order-search cost scales by exactly J!(6)/J!(5) = 6 in candidates and
//    about that in wall clock. One dropped packet is recovered with a single
//    gap hypothesis, and the gap enumeration at limit 4 over five slots has
//    exactly C(9,5) = 126 layouts.

double min_extract_seconds(const std::vector<std::uint16_t>& phase1,
                           const std::vector<std::array<std::uint16_t, 2>>& pairs,
                           const MeasurementPlan& plan, const PlanMatrices& pre,
                           const Phase1Options& opt) {
  double best = 1e100;
  for (int rep = 0; rep < 3; ++rep) {
    Stopwatch sw;
    (void)extract_windows_key(phase1, pairs, plan, pre, opt);
    best = std::min(best, sw.seconds());
  }
  return best;
}

Outcome order_and_gap_search() {
  Rng rng(0x57a9e003);
  Phase1Options in_order;
  Phase1Options orders;
  orders.permutations = true;

  // (a) reversed send order
  const MeasurementPlan plan6 = random_plan(6, 12, 3, rng);
  const PlanMatrices pre6 = preprocess_plan(plan6);
  WindowsDeviceConfig cfg;
  cfg.seed = 0x30000001ull;
  WindowsDevice reversed_dev(cfg);
  WindowsSessionOptions reversed_opt;
  reversed_opt.permutation = {5, 4, 3, 2, 1, 0};
  const PacketTrace rtrace =
      simulate_windows_session(reversed_dev, plan6, reversed_opt);
  const auto rphase1 = windows_phase1_ipids(rtrace, plan6);
  const auto rpairs = windows_pair_ipids(rtrace, plan6);
  const auto blind = extract_windows_key(rphase1, rpairs, plan6, pre6, in_order);
  const auto searched = extract_windows_key(rphase1, rpairs, plan6, pre6, orders);
  const std::uint64_t planted6 = reversed_dev.planted_key_tail45();
  const bool reversed_ok = !has_key(blind, planted6) &&
                           has_key(searched, planted6) &&
                           searched.stats.configs == 720;

  // (b) order-search work ratio J=5 -> J=6 on clean in-order sessions
  const MeasurementPlan plan5 = random_plan(5, 12, 3, rng);
  const PlanMatrices pre5 = preprocess_plan(plan5);
  cfg.seed = 0x30000002ull;
  WindowsDevice dev5(cfg);
  const PacketTrace trace5 = simulate_windows_session(dev5, plan5);
  cfg.seed = 0x30000003ull;
  WindowsDevice dev6(cfg);
  const PacketTrace trace6 = simulate_windows_session(dev6, plan6);

  Phase1Stats st5, st6;
  const auto p1_5 = windows_phase1_ipids(trace5, plan5);
  const auto pr_5 = windows_pair_ipids(trace5, plan5);
  const auto p1_6 = windows_phase1_ipids(trace6, plan6);
  const auto pr_6 = windows_pair_ipids(trace6, plan6);
  st5 = extract_windows_key(p1_5, pr_5, plan5, pre5, orders).stats;
  st6 = extract_windows_key(p1_6, pr_6, plan6, pre6, orders).stats;
  const double t5 = min_extract_seconds(p1_5, pr_5, plan5, pre5, orders);
  const double t6 = min_extract_seconds(p1_6, pr_6, plan6, pre6, orders);
  const double wall_ratio = t6 / t5;
  const bool ratio_ok = st5.configs == 120 && st6.configs == 720 &&
                        st6.candidates_checked == 6 * st5.candidates_checked &&
                        wall_ratio >= 3.0 && wall_ratio <= 12.0;

  // (c) one dropped packet
  cfg.seed = 0x30000004ull;
  WindowsDevice dropped_dev(cfg);
  WindowsSessionOptions drop_opt;
  drop_opt.drops = {2};
  const PacketTrace dtrace =
      simulate_windows_session(dropped_dev, plan6, drop_opt);
  const auto dphase1 = windows_phase1_ipids(dtrace, plan6);
  const auto dpairs = windows_pair_ipids(dtrace, plan6);
  Phase1Options gap1;
  gap1.max_gap = 1;
  const bool drop_ok =
      !has_key(extract_windows_key(dphase1, dpairs, plan6, pre6, in_order),
               dropped_dev.planted_key_tail45()) &&
      has_key(extract_windows_key(dphase1, dpairs, plan6, pre6, gap1),
              dropped_dev.planted_key_tail45());

  // (d) gap layout count at limit 4
  Phase1Options gap4;
  gap4.max_gap = 4;
  const auto wide = extract_windows_key(p1_6, pr_6, plan6, pre6, gap4);
  const bool gaps_ok = wide.stats.configs == 126;

  const bool pass = reversed_ok && ratio_ok && drop_ok && gaps_ok;
  return {pass, fmt("reversed %s (%llu orders), work ratio x%llu wall x%.1f "
                    "want [3, 12], drop+gap %s, gap layouts %llu want 126",
                    reversed_ok ? "recovered" : "FAILED",
                    (unsigned long long)searched.stats.configs,
                    (unsigned long long)(st5.candidates_checked
                                             ? st6.candidates_checked /
                                                   st5.candidates_checked
                                             : 0),
                    wall_ratio, drop_ok ? "recovered" : "FAILED",
                    (unsigned long long)wide.stats.configs)};
}

// ---------------------------------------------------------------------------
// 4. Foreign traffic veto: one unrelated datagram hitting the bucket of a
//    measured pair between that pair's two packets shifts the difference by
//    one, so every hypothesis fails and the extraction returns no key at all
//    rather than a wrong one.

Outcome interference_veto() {
  constexpr int kTrials = 10000;
  Rng rng(0x57a9e004);
  int empty = 0;
  for (int trial = 0; trial < kTrials; ++trial) {
    const MeasurementPlan plan = random_plan(6, 12, 3, rng);
    const PlanMatrices pre = preprocess_plan(plan);
    WindowsDeviceConfig cfg;
    cfg.seed = 0x40000001ull + trial;
    const WindowsDevice probe(cfg);
    const int g = static_cast<int>(rng.below(12));
    const std::uint32_t bucket = probe.bucket_index(plan.pairs[g][0]);
    const double when = 0.001 * (6 + 2 * g + 0.5);
    const PacketTrace trace = inject_interference(cfg, plan, {}, bucket, when);
    const WindowsAttackOutcome out = extract_windows_key(
        windows_phase1_ipids(trace, plan), windows_pair_ipids(trace, plan),
        plan, pre);
    empty += out.keys.empty();
  }
  const bool pass = empty == kTrials;
  return {pass, fmt("empty key set in %d/%d disturbed measurements", empty,
                    kTrials)};
}

// ---------------------------------------------------------------------------
// 5. Address-set screening: among random in-class six-address sets that pass
//    the three cheap screens (leading bit differs somewhere, trailing bit
//    differs somewhere, some difference has odd parity), the 75x30 key system
//    is still rank-deficient at a rate near 1.03e-3. Rank is computed here
//    with a local elimination and cross-checked against the library.

int rank_of_six(const std::array<std::uint16_t, 6>& lows) {
  std::uint32_t rows[75];
  int n = 0;
  for (int j = 1; j < 6; ++j) {
    const std::uint16_t diff = lows[j] ^ lows[0];
    for (int e = 0; e < 15; ++e) {
      std::uint32_t row = 0;
      for (int mp = 0; mp < 16; ++mp)
        if ((diff >> (15 - mp)) & 1u) row |= 1u << (e + mp);
      rows[n++] = row;
    }
  }
  int rank = 0;
  for (int col = 0; col < 30 && rank < n; ++col) {
    int pivot = -1;
    for (int r = rank; r < n; ++r)
      if ((rows[r] >> col) & 1u) {
        pivot = r;
        break;
      }
    if (pivot < 0) continue;
    std::swap(rows[rank], rows[pivot]);
    for (int r = 0; r < n; ++r)
      if (r != rank && ((rows[r] >> col) & 1u)) rows[r] ^= rows[rank];
    ++rank;
  }
  return rank;
}

Outcome screening_rank_rate() {
  constexpr int kSets = 100000;
  constexpr double kDeficientRate = 1.03e-3;

  Rng rng(0x57a9e005);
  int deficient = 0, tested = 0;
  long long sampled = 0;
  while (tested < kSets) {
    ++sampled;
    std::array<std::uint16_t, 6> lows{};
    bool distinct = true;
    for (int i = 0; i < 6 && distinct; ++i) {
      lows[i] = static_cast<std::uint16_t>(rng.bits(16));
      for (int k = 0; k < i; ++k) distinct &= lows[k] != lows[i];
    }
    if (!distinct) continue;

    std::uint16_t any_diff = 0;
    bool odd_parity = false;
    for (int j = 1; j < 6; ++j) {
      const std::uint16_t d = lows[j] ^ lows[0];
      any_diff |= d;
      odd_parity |= (std::popcount(unsigned(d)) & 1) != 0;
    }
    if (!((any_diff >> 15) & 1u) || !(any_diff & 1u) || !odd_parity) continue;

    ++tested;
    const int rank = rank_of_six(lows);
    std::vector<Ipv4> ips;
    for (const std::uint16_t low : lows)
      ips.push_back(Ipv4((0xc612u << 16) | low));
    if (gaussian_pseudo_inverse(build_coefficient_matrix(ips)).rank != rank)
      return {false, "local rank oracle disagrees with the library"};
    deficient += rank < 30;
  }

  const Band band = three_sigma(kDeficientRate, kSets);
  const double rate = double(deficient) / kSets;
  const bool pass = band.holds(rate);
  return {pass, fmt("rank<30 in %d/%d screened sets (%.2e, want [%.2e, %.2e]); "
                    "%lld sampled",
                    deficient, kSets, rate, band.lo, band.hi, sampled)};
}

// ---------------------------------------------------------------------------
// 6/7. Linux key searches share the measurement pipeline: Chrome-style bursts
// against 400 addresses, burst split, per-burst candidate collection, and the
// two-burst intersection.

std::vector<Ipv4> sorted_random_dsts(int n, Rng& rng) {
  std::set<std::uint32_t> seen;
  while (static_cast<int>(seen.size()) < n)
    seen.insert(static_cast<std::uint32_t>(rng.bits(32)));
  std::vector<Ipv4> out;
  out.reserve(n);
  for (const std::uint32_t v : seen) out.push_back(Ipv4(v));
  return out;
}

struct CollectedPairs {
  std::vector<CollisionPair> pairs;
  bool retest = false;
};

CollectedPairs collect_linux_pairs(LinuxDevice& device, int l,
                                   std::uint64_t net_seed, Rng& dst_rng) {
  const auto dsts = sorted_random_dsts(l, dst_rng);
  const BurstSchedule schedule = BurstSchedule::chrome();
  NetworkModel model;
  model.seed = net_seed;  // defaults elsewhere: 0.1 s jitter, 1% loss
  const PacketTrace trace =
      simulate_linux_session(device, dsts, schedule, model);
  const BurstSplit split = split_bursts(trace, schedule, dsts.size());
  if (split.retest) return {{}, true};
  const int f = device.config().tick_hz;
  const auto a =
      collect_candidates(split.bursts[split.primary], f, schedule.burst_duration);
  const auto b = collect_candidates(split.bursts[split.secondary], f,
                                    schedule.burst_duration);
  return {intersect_bursts(a, b), false};
}

Outcome linux_subrange_search() {
  constexpr double kTimeLimit = 10.0;
  Rng rng(0x57a9e006);
  std::string detail;
  bool pass = true;
  int which = 0;
  for (const LinuxFlavor flavor : {LinuxFlavor::kA1, LinuxFlavor::kA2}) {
    LinuxDeviceConfig dcfg;
    dcfg.flavor = flavor;
    dcfg.seed = 0x60000001ull + which;
    LinuxDevice device(dcfg);
    const CollectedPairs got =
        collect_linux_pairs(device, 400, 0x600000a1ull + which, rng);
    ++which;
    if (got.retest) {
      pass = false;
      detail += fmt("%s: retest signalled; ", linux_flavor_name(flavor));
      continue;
    }
    KeySearchConfig scfg;
    scfg.flavor = flavor;
    scfg.range_begin = device.key() & ~0xffffffull;
    scfg.range_end = scfg.range_begin + (1ull << 24);
    const SearchResult res = exhaustive_search(got.pairs, scfg);
    const bool ok = res.status == SearchStatus::kOk &&
                    res.accepted.size() == 1 &&
                    res.accepted[0].key32 == device.key() &&
                    res.elapsed_seconds <= kTimeLimit;
    pass &= ok;
    detail += fmt("%s: %s, %zu pairs, %.1f s (limit %.0f); ",
                  linux_flavor_name(flavor), ok ? "key recovered" : "FAILED",
                  got.pairs.size(), res.elapsed_seconds, kTimeLimit);
  }
  return {pass, detail};
}

// The gated long variant: the same A2 pipeline over all 2^32 keys.
Outcome linux_full_space() {
  constexpr double kTimeLimit = 1800.0;
  Rng rng(0x57a9e106);
  LinuxDeviceConfig dcfg;
  dcfg.seed = 0x61000001ull;
  LinuxDevice device(dcfg);
  const CollectedPairs got = collect_linux_pairs(device, 400, 0x610000a1ull, rng);
  if (got.retest) return {false, "retest signalled"};
  KeySearchConfig scfg;
  const SearchResult res = exhaustive_search(got.pairs, scfg);
  const bool pass = res.status == SearchStatus::kOk &&
                    res.accepted.size() == 1 &&
                    res.accepted[0].key32 == device.key() &&
                    res.elapsed_seconds <= kTimeLimit;
  return {pass, fmt("%s over 2^32 keys, %zu pairs, %llu scanned, %.0f s "
                    "(limit %.0f)",
                    pass ? "key recovered uniquely" : "FAILED",
                    got.pairs.size(), (unsigned long long)res.keys_scanned,
                    res.elapsed_seconds, kTimeLimit)};
}

// ---------------------------------------------------------------------------
// 7. Namespace-mixing flavor: the searched word is displacement-slot||key, so
//    a sub-range straddling a slot boundary must recover both halves, and the
//    kernel base must reconstruct exactly from the accepted mix word. The
//    reconstruction is then swept across every x64 slot and a thousand
//    random arm64 placements.

Outcome slot_search_and_base_recovery() {
  Rng rng(0x57a9e007);

  LinuxDeviceConfig dcfg;
  dcfg.flavor = LinuxFlavor::kA3;
  std::uint64_t seed = 0x70000001ull;
  for (;; ++seed) {
    dcfg.seed = seed;
    const LinuxDevice probe(dcfg);
    const std::uint32_t slot = static_cast<std::uint32_t>(
        (probe.layout().kernel_base - kX64DefaultBase) >> 21);
    if (slot > 0 && probe.key() < (1u << 23)) break;
  }
  dcfg.seed = seed;
  LinuxDevice device(dcfg);
  const std::uint32_t slot = static_cast<std::uint32_t>(
      (device.layout().kernel_base - kX64DefaultBase) >> 21);
  const std::uint64_t planted = (std::uint64_t(slot) << 32) | device.key();

  const CollectedPairs got = collect_linux_pairs(device, 400, 0x700000a1ull, rng);
  if (got.retest) return {false, "retest signalled"};

  KeySearchConfig scfg;
  scfg.flavor = LinuxFlavor::kA3;
  scfg.w_log2 = 41;
  scfg.range_begin = (std::uint64_t(slot) << 32) - (1ull << 23);
  scfg.range_end = scfg.range_begin + (1ull << 24);
  const SearchResult res = exhaustive_search(got.pairs, scfg);
  const bool search_ok =
      res.status == SearchStatus::kOk && res.accepted.size() == 1 &&
      res.accepted[0].key == planted &&
      res.accepted[0].key32 == device.key() &&
      res.accepted[0].g_net == device.g_net() &&
      reconstruct_kernel_base(res.accepted[0].g_net, dcfg.rho, Arch::kX64,
                              dcfg.init_net_offset) ==
          device.layout().kernel_base;

  int base_misses = 0;
  for (const int rho : {6, 7, 12})
    for (int s = 0; s < kX64Slots; ++s) {
      const std::uint64_t base = kX64DefaultBase + (std::uint64_t(s) << 21);
      base_misses += reconstruct_kernel_base(
                         net_hash_mix(base + dcfg.init_net_offset, rho), rho,
                         Arch::kX64, dcfg.init_net_offset) != base;
    }
  Rng arm_rng(0x57a9e107);
  for (int i = 0; i < 1000; ++i) {
    const KaslrLayout layout =
        sample_kaslr_layout(Arch::kArm64, true, arm_rng, dcfg.init_net_offset);
    base_misses += reconstruct_kernel_base(net_hash_mix(layout.net_ptr(), 6), 6,
                                           Arch::kArm64,
                                           dcfg.init_net_offset) !=
                   layout.kernel_base;
  }

  const bool pass = search_ok && base_misses == 0;
  return {pass, fmt("boundary-straddling search %s (slot %u, key32 0x%08x), "
                    "base reconstruction misses %d over 3x512 x64 + 1000 arm64",
                    search_ok ? "recovered slot+key" : "FAILED", slot,
                    device.key(), base_misses)};
}

// ---------------------------------------------------------------------------
// 8. Collision-pair yield: over full synthetic sessions at 1% loss, the mean
//    and spread of the two-burst intersection size must land within 2% of the
//    model figures for the three common tick rates.

Outcome pair_yield_distribution() {
  constexpr int kRuns = 100000;
  constexpr double kTol = 0.02;
  struct Target {
    int f;
    double mean, sd;
  };
  const Target targets[] = {
      {100, 50.59, 7.39}, {250, 65.47, 8.60}, {300, 70.45, 8.79}};

  bool pass = true;
  std::string detail;
  for (const Target& t : targets) {
    const FpFnEstimate est =
        simulate_fp_fn(400, 11, t.f, 0.01, kRuns, 0xf00d0000ull + t.f);
    const bool ok =
        within(est.mean_pairs, t.mean, kTol) && within(est.sd_pairs, t.sd, kTol);
    pass &= ok;
    detail += fmt("f=%d E=%.2f/%.2f sd=%.2f/%.2f%s; ", t.f, est.mean_pairs,
                  t.mean, est.sd_pairs, t.sd, ok ? "" : " FAILED");
  }
  return {pass, detail + fmt("(2%% tolerance, %d sessions each)", kRuns)};
}

// ---------------------------------------------------------------------------
// 9. Parameter model: the round/threshold chooser must land on L=400, nu=11
//    for the common 2^48 case with analytic tails near the reference point,
//    and the Monte-Carlo fit must place the nu optimum at the same spot.

Outcome parameter_model() {
  const ParameterChoice choice = optimal_parameters(300, 2048, 48);
  const bool shape_ok = choice.l == 400 && choice.nu == 11;
  const auto within_3x = [](double got, double want) {
    return got >= want / 3.0 && got <= want * 3.0;
  };
  const bool tails_ok =
      within_3x(choice.fp, 6.2e-10) && within_3x(choice.fn, 4.2e-8);
  const FpFnEstimate est = simulate_fp_fn(400, 11, 300, 0.01, 30000, 0x57a9e009);
  const bool optimum_ok = est.best_nu == 11;
  const bool pass = shape_ok && tails_ok && optimum_ok;
  return {pass, fmt("chose L=%d nu=%d, fp %.2e (ref 6.2e-10), fn %.2e "
                    "(ref 4.2e-8, both within 3x), fitted nu optimum %d",
                    choice.l, choice.nu, choice.fp, choice.fn, est.best_nu)};
}

// ---------------------------------------------------------------------------
// 10. Search-time model at the calibrated per-key-pair cost.

Outcome search_time_model() {
  constexpr double kSecondsPerKeyPair = 6.8645e-13;
  const double slow = estimate_attack_time(kSecondsPerKeyPair, 41, 65.47);
  const double fast = estimate_attack_time(kSecondsPerKeyPair, 32, 50.59);
  const bool pass = within(slow, 99.0, 0.02) && within(fast, 0.15, 0.02);
  return {pass, fmt("2^41 x 65.47 pairs -> %.2f s (ref 99), 2^32 x 50.59 -> "
                    "%.4f s (ref 0.15), 2%% tolerance",
                    slow, fast)};
}

// ---------------------------------------------------------------------------
// 11. Building-block properties: keyed-hash zero-extension and splitting
//     identities, the in-burst IPID window (every same-bucket pair inside,
//     unrelated pairs uniform), the 32-bit numeric view round trip, and the
//     partitioned key scan stitching back to the single-range scan.

Outcome algebra_and_window() {
  Rng rng(0x57a9e00b);

  int identity_misses = 0;
  for (int i = 0; i < 1000; ++i) {
    const ToeplitzKey key = ToeplitzKey::random(rng);
    const std::size_t len = 1 + rng.below(200);
    const BitVec input = BitVec::random(len, rng);
    const std::size_t pad = rng.below(89);
    identity_misses += toeplitz_hash(key, input.zero_extended(len + pad)) !=
                       toeplitz_hash(key, input);
    const std::size_t cut = rng.below(len + 1);
    const BitVec tail_zeroed =
        BitVec(cut).concat(input.slice(cut, len - cut));
    identity_misses += toeplitz_hash(key, input) !=
                       (toeplitz_hash(key, input.slice(0, cut)) ^
                        toeplitz_hash(key, tail_zeroed));
  }

  // Window property at f=300: bound f * 0.6 + 10 = 190, so an unrelated pair
  // lands inside by chance with probability 189 / 2^16 < 0.003.
  constexpr int kWindow = 190;
  constexpr double kFalseRate = 189.0 / 65536.0;
  long long true_total = 0, true_inside = 0;
  long long false_total = 0, false_inside = 0;
  for (int s = 0; s < 13; ++s) {
    LinuxDeviceConfig dcfg;
    dcfg.seed = 0xb0000001ull + s;
    LinuxDevice device(dcfg);
    const auto dsts = sorted_random_dsts(400, rng);
    BurstSchedule schedule;
    schedule.offsets = {0.0};
    NetworkModel model;
    model.jitter_sigma = 0;
    model.loss_rate = 0;
    model.seed = s + 1;
    const PacketTrace trace =
        simulate_linux_session(device, dsts, schedule, model);
    std::vector<std::uint32_t> bucket(trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i)
      bucket[i] = device.bucket_index(trace[i].dst);
    for (std::size_t a = 0; a < trace.size(); ++a)
      for (std::size_t b = a + 1; b < trace.size(); ++b) {
        const auto d =
            static_cast<std::uint16_t>(trace[b].ipid - trace[a].ipid);
        const bool inside = d > 0 && d < kWindow;
        if (bucket[a] == bucket[b]) {
          ++true_total;
          true_inside += inside;
        } else {
          ++false_total;
          false_inside += inside;
        }
      }
  }
  const Band band = three_sigma(kFalseRate, double(false_total));
  const double false_rate = double(false_inside) / double(false_total);
  const bool window_ok = true_inside == true_total &&
                         band.holds(false_rate) && false_rate < 0.003;

  int numeric_misses = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto v = static_cast<std::uint32_t>(rng.bits(32));
    numeric_misses += num(vectorize(v)) != v;
    const BitVec b = BitVec::random(32, rng);
    numeric_misses += !(vectorize(num(b)) == b);
  }

  // Partition contract on a small keyspace with a permissive threshold, so
  // the stitched result is a non-trivial list.
  LinuxDeviceConfig dcfg;
  dcfg.seed = 0xb00d0001ull;
  LinuxDevice device(dcfg);
  const CollectedPairs got = collect_linux_pairs(device, 400, 0xb00d00a1ull, rng);
  bool merge_ok = !got.retest;
  if (merge_ok) {
    KeySearchConfig scfg;
    scfg.w_log2 = 20;
    scfg.nu = 2;
    const auto full = search_range(got.pairs, scfg, 0, 1ull << 20);
    const std::uint64_t cuts[] = {0,         1,
                                  65535,     65536,
                                  1ull << 18, (1ull << 18) + 3,
                                  (1ull << 19) + 12345, 1ull << 20};
    std::vector<AcceptedKey> stitched;
    for (std::size_t i = 0; i + 1 < std::size(cuts); ++i) {
      const auto part = search_range(got.pairs, scfg, cuts[i], cuts[i + 1]);
      stitched.insert(stitched.end(), part.begin(), part.end());
    }
    merge_ok = full.size() == stitched.size() && !full.empty();
    for (std::size_t i = 0; merge_ok && i < full.size(); ++i)
      merge_ok = full[i].key == stitched[i].key &&
                 full[i].key32 == stitched[i].key32 &&
                 full[i].g_net == stitched[i].g_net &&
                 full[i].matched == stitched[i].matched;
  }

  const bool pass =
      identity_misses == 0 && window_ok && numeric_misses == 0 && merge_ok;
  return {pass,
          fmt("hash identity misses %d/2000, window: true %lld/%lld inside, "
              "false rate %.5f want [%.5f, %.5f], numeric misses %d/2000, "
              "partitioned scan %s",
              identity_misses, true_inside, true_total, false_rate, band.lo,
              band.hi, numeric_misses, merge_ok ? "matches" : "DIFFERS")};
}

// ---------------------------------------------------------------------------

struct Criterion {
  int id;
  const char* name;
  Outcome (*fn)();
};

const Criterion kCriteria[] = {
    {1, "windows key round trip", windows_round_trip},
    {2, "K18 twin survivor rate", twin_key_rate},
    {3, "send order and gap search", order_and_gap_search},
    {4, "foreign bucket activity veto", interference_veto},
    {5, "screened set rank deficiency", screening_rank_rate},
    {6, "linux sub-range key search", linux_subrange_search},
    {7, "slot search and base recovery", slot_search_and_base_recovery},
    {8, "collision pair yield", pair_yield_distribution},
    {9, "parameter model optimum", parameter_model},
    {10, "search time model", search_time_model},
    {11, "hash algebra and burst window", algebra_and_window},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  bool full_space = false;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else if (arg == "--full-space") {
      full_space = true;
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N] [--full-space]\n",
                   argv[0]);
      return 2;
    }
  }

  if (full_space) {
    Stopwatch sw;
    Outcome o;
    try {
      o = linux_full_space();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion  6 (full keyspace): %s  %s  [%.1f s]\n",
                o.pass ? "PASS" : "FAIL", o.detail.c_str(), sw.seconds());
    return o.pass ? 0 : 1;
  }

  int failures = 0, ran = 0;
  for (const Criterion& c : kCriteria) {
    if (only != 0 && c.id != only) continue;
    ++ran;
    Stopwatch sw;
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %2d: %s  %s — %s  [%.1f s]\n", c.id,
                o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(),
                sw.seconds());
    std::fflush(stdout);
    failures += !o.pass;
  }
  if (ran == 0) {
    std::fprintf(stderr, "no such criterion: %d\n", only);
    return 2;
  }
  return failures;
}
