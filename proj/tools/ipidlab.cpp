// ipidlab command line front end.
//
// Subcommands:
//   gen-device   make a device descriptor (the "victim")
//   measure      run a simulated measurement session against a descriptor
//   attack       run key extraction / key search over a recorded trace
//   estimate     analytic parameter and run-time estimates
//   bench        measure host-specific cost constants
//
// Machine-readable JSON goes to stdout; progress and human summaries go to
// stderr. Exit codes: 0 success, 1 usage/input error, 2 measurement needs a
// retest (interference, counter-like source, too few pairs, no key), 3 result
// is ambiguous (several surviving keys or device ids).

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ipidlab/ipv4.hpp"
#include "ipidlab/jhash.hpp"
#include "ipidlab/kaslr.hpp"
#include "ipidlab/linux_attack.hpp"
#include "ipidlab/linux_device.hpp"
#include "ipidlab/netsim.hpp"
#include "ipidlab/rng.hpp"
#include "ipidlab/toeplitz.hpp"
#include "ipidlab/trace_io.hpp"
#include "ipidlab/windows_attack.hpp"
#include "ipidlab/windows_device.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace ipidlab;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRetest = 2;
constexpr int kExitAmbiguous = 3;

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_u64(const std::string& text) {
  std::size_t used = 0;
  const std::uint64_t v = std::stoull(text, &used, 0);  // accepts 0x... and decimal
  if (used != text.size()) throw std::invalid_argument("bad number: " + text);
  return v;
}

int max_threads() {
  if (const char* env = std::getenv("IPIDLAB_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

void emit(const json& report) { std::printf("%s\n", report.dump(2).c_str()); }

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

// ---------------------------------------------------------------------------
// gen-device

struct GenDeviceArgs {
  std::string os;
  std::string out_path;
  std::uint64_t seed = 1;
  // windows
  std::string flavor = "rs5";
  std::string hash = "toeplitz";
  unsigned buckets_windows = 8192;
  bool zero_counters = false;
  // linux
  std::string variant = "a2";
  int f = 300;
  unsigned buckets_linux = 2048;
  unsigned protocol = 17;
  std::string arch;  // required for a3
  int rho = 6;
  bool no_kaslr = false;
  std::string init_net_offset = "0x1553c80";
  // shared; empty means the per-OS library default
  std::string src;
};

int run_gen_device(const GenDeviceArgs& a) {
  json report;
  if (a.os == "windows") {
    WindowsDeviceConfig cfg;
    cfg.flavor = (a.flavor == "rs5") ? WindowsFlavor::kRs5 : WindowsFlavor::kPreRs5;
    if (a.flavor != "rs5" && a.flavor != "prers5" && a.flavor != "pre_rs5")
      throw CLI::ValidationError("--flavor", "expected rs5 or prers5");
    cfg.hash = (a.hash == "strongmix") ? WindowsHashKind::kStrongMix
                                       : WindowsHashKind::kToeplitz;
    if (a.hash != "toeplitz" && a.hash != "strongmix")
      throw CLI::ValidationError("--hash", "expected toeplitz or strongmix");
    cfg.bucket_count = a.buckets_windows;
    if (!a.src.empty()) cfg.src = parse_ipv4(a.src);
    cfg.seed = a.seed;
    cfg.zero_counters = a.zero_counters;
    WindowsDevice dev(cfg);
    write_text_file(a.out_path, dev.save_descriptor());
    report["descriptor"] = a.out_path;
    report["os"] = "windows";
    report["flavor"] = a.flavor == "rs5" ? "rs5" : "prers5";
    report["hash"] = a.hash;
    report["key_tail45_hex"] = hex64(dev.planted_key_tail45());
    std::fprintf(stderr, "windows device written to %s (key tail %s)\n",
                 a.out_path.c_str(), hex64(dev.planted_key_tail45()).c_str());
  } else {
    LinuxDeviceConfig cfg;
    cfg.flavor = parse_linux_flavor(a.variant);
    if (cfg.flavor == LinuxFlavor::kA3 && a.arch.empty())
      throw CLI::RequiredError("--arch (required for variant a3)");
    cfg.tick_hz = a.f;
    cfg.bucket_count = static_cast<int>(a.buckets_linux);
    cfg.protocol = static_cast<std::uint8_t>(a.protocol);
    if (!a.src.empty()) cfg.src = parse_ipv4(a.src);
    cfg.arch = a.arch.empty() ? Arch::kX64 : parse_arch(a.arch);
    cfg.rho = a.rho;
    cfg.kaslr = !a.no_kaslr;
    cfg.init_net_offset = parse_u64(a.init_net_offset);
    cfg.seed = a.seed;
    LinuxDevice dev(cfg);
    write_text_file(a.out_path, dev.save_descriptor());
    report["descriptor"] = a.out_path;
    report["os"] = "linux";
    report["variant"] = linux_flavor_name(cfg.flavor);
    report["f"] = cfg.tick_hz;
    char kb[16];
    std::snprintf(kb, sizeof kb, "0x%08x", dev.key());
    report["key_hex"] = kb;
    report["w_log2"] = keyspace_log2(cfg.flavor, cfg.arch);
    if (cfg.flavor == LinuxFlavor::kA3) {
      std::snprintf(kb, sizeof kb, "0x%08x", dev.g_net());
      report["g_net_hex"] = kb;
      report["kernel_base_hex"] = hex64(dev.layout().kernel_base);
    }
    std::fprintf(stderr, "linux %s device written to %s (f=%d, |W|=2^%d)\n",
                 linux_flavor_name(cfg.flavor), a.out_path.c_str(), cfg.tick_hz,
                 keyspace_log2(cfg.flavor, cfg.arch));
  }
  emit(report);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// measure

struct MeasureArgs {
  std::string descriptor;
  std::string out_path;
  std::uint64_t seed = 1;
  // windows plan
  std::string plan_path;
  std::string plan_out;
  int j = 0, g = 0, q = -1;
  std::string permutation;  // "random" or comma list
  std::vector<int> drops;
  std::vector<int> swapped;
  std::vector<std::string> interference;  // "bucket:when"
  double spacing = 0.001;
  // linux session
  int dst_count = 400;
  std::string dst_file;
  std::string schedule = "chrome";
  double burst_duration = 0.6;
  double jitter = 0.0;
  double loss = 0.0;
  std::string chunk_drop;  // "burst:fraction"
  bool rewrite_ipids = false;
};

BurstSchedule make_schedule(const std::string& name, double duration) {
  BurstSchedule s = (name == "pair") ? BurstSchedule::analysis_pair()
                                     : BurstSchedule::chrome();
  if (name != "pair" && name != "chrome")
    throw CLI::ValidationError("--schedule", "expected chrome or pair");
  s.burst_duration = duration;
  return s;
}

int run_measure(const MeasureArgs& a) {
  const std::string text = read_text_file(a.descriptor);
  const auto probe = json::parse(text);
  const std::string os = probe.at("os").get<std::string>();
  json report;
  report["trace"] = a.out_path;
  report["os"] = os;

  if (os == "windows") {
    WindowsDevice dev = WindowsDevice::load_descriptor(text);
    MeasurementPlan plan;
    if (!a.plan_path.empty()) {
      plan = MeasurementPlan::from_json(read_text_file(a.plan_path));
    } else {
      if (a.j < 4 || a.g < 2)
        throw CLI::RequiredError("--plan or (--j and --g)");
      Rng rng = Rng(a.seed).fork(0x91a7);
      const int q = a.q >= 0 ? a.q : std::max(1, (a.g + 1) / 4);
      plan = random_plan(a.j, a.g, q, rng);
      if (a.plan_out.empty())
        throw CLI::RequiredError("--plan-out (required with a generated plan)");
    }
    if (!a.plan_out.empty()) write_text_file(a.plan_out, plan.to_json());

    WindowsSessionOptions opt;
    opt.spacing = a.spacing;
    opt.drops = a.drops;
    opt.swapped_pairs = a.swapped;
    if (a.permutation == "random") {
      Rng rng = Rng(a.seed).fork(0x5e3d);
      opt.permutation.resize(plan.j_count());
      for (int i = 0; i < plan.j_count(); ++i)
        opt.permutation[i] = static_cast<std::uint8_t>(i);
      for (int i = plan.j_count() - 1; i > 0; --i)
        std::swap(opt.permutation[i],
                  opt.permutation[rng.below_u32(static_cast<std::uint32_t>(i + 1))]);
    } else if (!a.permutation.empty()) {
      for (int slot : parse_int_list(a.permutation))
        opt.permutation.push_back(static_cast<std::uint8_t>(slot));
    }
    for (const std::string& ev : a.interference) {
      const auto colon = ev.find(':');
      if (colon == std::string::npos)
        throw CLI::ValidationError("--interfere", "expected bucket:seconds");
      opt.interference.push_back(
          {static_cast<std::uint32_t>(parse_u64(ev.substr(0, colon))),
           std::stod(ev.substr(colon + 1))});
    }

    const PacketTrace trace = simulate_windows_session(dev, plan, opt);
    save_trace(a.out_path, trace);
    report["records"] = trace.size();
    if (!a.plan_out.empty()) report["plan"] = a.plan_out;
    else report["plan"] = a.plan_path;
    std::fprintf(stderr, "windows session: %zu packets (J=%d, G=%d)\n",
                 trace.size(), plan.j_count(), plan.g_count());
  } else {
    LinuxDevice dev = LinuxDevice::load_descriptor(text);
    std::vector<Ipv4> dsts;
    if (!a.dst_file.empty()) {
      std::stringstream ss(read_text_file(a.dst_file));
      std::string line;
      while (std::getline(ss, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
          line.pop_back();
        if (!line.empty()) dsts.push_back(parse_ipv4(line));
      }
      std::sort(dsts.begin(), dsts.end());
      dsts.erase(std::unique(dsts.begin(), dsts.end(),
                             [](Ipv4 x, Ipv4 y) { return x.value == y.value; }),
                 dsts.end());
    } else {
      Rng rng = Rng(a.seed).fork(0xd57);
      std::set<std::uint32_t> seen;
      while (static_cast<int>(seen.size()) < a.dst_count)
        seen.insert(random_public_ipv4(rng).value);
      for (std::uint32_t v : seen) dsts.push_back(Ipv4{v});
    }

    const BurstSchedule schedule = make_schedule(a.schedule, a.burst_duration);
    NetworkModel model;
    model.jitter_sigma = a.jitter;
    model.loss_rate = a.loss;
    model.seed = Rng(a.seed).fork(0x11e7).next_u64();
    LinuxSessionOptions opt;
    opt.ipid_rewrite = a.rewrite_ipids;
    if (!a.chunk_drop.empty()) {
      const auto colon = a.chunk_drop.find(':');
      if (colon == std::string::npos)
        throw CLI::ValidationError("--chunk-drop", "expected burst:fraction");
      opt.chunk_drop = {std::stoi(a.chunk_drop.substr(0, colon)),
                        std::stod(a.chunk_drop.substr(colon + 1))};
    }
    const PacketTrace trace = simulate_linux_session(dev, dsts, schedule, model, opt);
    save_trace(a.out_path, trace);
    report["records"] = trace.size();
    report["destinations"] = dsts.size();
    report["bursts"] = schedule.offsets.size();
    std::fprintf(stderr, "linux session: %zu packets over %zu bursts to %zu hosts\n",
                 trace.size(), schedule.offsets.size(), dsts.size());
  }
  emit(report);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// attack: windows

struct AttackArgs {
  std::string os;
  std::string trace_path;
  // windows
  std::string plan_path;
  bool permutations = false;
  int max_gap = 0;
  bool both_pair_orders = false;
  int pair_max_gap = 0;
  int tail_width = 41;
  std::string store_path;
  bool fast_track = false;
  // linux
  std::string variant = "a2";
  std::string schedule = "chrome";
  double burst_duration = 0.6;
  int expected_l = 0;
  int f = 300;
  double delta_l = 0.6;
  int nu = 11;
  int m = 2048;
  int w = 0;
  std::string src = "198.51.100.23";
  unsigned protocol = 17;
  std::string arch = "x64";
  int rho = 6;
  std::string init_net_offset = "0x1553c80";
  std::string range_begin = "0";
  std::string range_end = "0";
  bool nested = false;
  std::string cache_path;
  int threads = 1;
  bool both_directions = false;
};

int run_attack_windows(const AttackArgs& a) {
  if (a.plan_path.empty()) throw CLI::RequiredError("--plan");
  const PacketTrace trace = load_trace(a.trace_path);
  const MeasurementPlan plan = MeasurementPlan::from_json(read_text_file(a.plan_path));

  json report;
  report["os"] = "windows";
  const ScreeningReport screen = validate_ip_set(plan);
  if (!screen.ok) {
    report["status"] = "bad_plan";
    report["failures"] = screen.failures;
    emit(report);
    std::fprintf(stderr, "plan failed screening; choose another address set\n");
    return kExitRetest;
  }

  const auto phase1 = windows_phase1_ipids(trace, plan);
  const auto pairs = windows_pair_ipids(trace, plan);

  if (a.fast_track && !a.store_path.empty()) {
    std::vector<KeyExtraction> stored;
    std::stringstream ss(read_text_file(a.store_path));
    std::string line;
    while (std::getline(ss, line))
      if (!line.empty()) stored.push_back(extraction_from_json(line));
    const auto matches = fast_track_matches(stored, phase1, pairs, plan);
    if (!matches.empty()) {
      report["status"] = matches.size() == 1 ? "ok" : "ambiguous";
      report["fast_track"] = true;
      json list = json::array();
      for (std::size_t idx : matches) {
        json rec;
        rec["store_index"] = idx;
        rec["key_tail45_hex"] = hex64(stored[idx].key18_62);
        list.push_back(rec);
      }
      report["matches"] = list;
      emit(report);
      std::fprintf(stderr, "fast track: %zu stored key(s) consistent\n",
                   matches.size());
      return matches.size() == 1 ? kExitOk : kExitAmbiguous;
    }
    std::fprintf(stderr, "fast track: no stored key fits, running full attack\n");
  }

  const PlanMatrices pre = preprocess_plan(plan);
  Phase1Options p1;
  p1.permutations = a.permutations;
  p1.max_gap = a.max_gap;
  Phase2Options p2;
  p2.both_pair_orders = a.both_pair_orders;
  p2.pair_max_gap = a.pair_max_gap;

  const auto t0 = std::chrono::steady_clock::now();
  const WindowsAttackOutcome outcome =
      extract_windows_key(phase1, pairs, plan, pre, p1, p2);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  report["elapsed_seconds"] = elapsed;
  report["phase1_candidates_checked"] = outcome.stats.candidates_checked;
  report["phase1_configs"] = outcome.stats.configs;

  if (outcome.counter_like) {
    report["status"] = "counter_like_source";
    emit(report);
    std::fprintf(stderr, "IPIDs look like a global counter, not a keyed hash\n");
    return kExitRetest;
  }
  if (outcome.keys.empty()) {
    report["status"] = "no_key";
    emit(report);
    std::fprintf(stderr, "no key survived both phases; retest\n");
    return kExitRetest;
  }

  json keys = json::array();
  for (const KeyExtraction& e : outcome.keys)
    keys.push_back(json::parse(extraction_to_json(e)));
  report["keys"] = keys;
  report["common_tail_bits"] = common_tail_bits(outcome.keys);

  const DeviceIdResult id = derive_device_id(outcome.keys, a.tail_width);
  json idj;
  idj["tail_width"] = id.tail_width;
  json ids = json::array();
  for (std::uint64_t v : id.ids) ids.push_back(hex64(v));
  idj["ids"] = ids;
  report["device_id"] = idj;
  report["status"] = id.status == DeviceIdResult::Status::kUnique ? "ok" : "ambiguous";
  emit(report);

  if (!a.store_path.empty()) {
    std::string blob;
    for (const KeyExtraction& e : outcome.keys)
      blob += extraction_to_json(e) + "\n";
    std::string existing;
    try {
      existing = read_text_file(a.store_path);
    } catch (const std::exception&) {
    }
    write_text_file(a.store_path, existing + blob);
  }

  std::fprintf(stderr, "%zu key(s) extracted in %.3fs, device id width %d: ",
               outcome.keys.size(), elapsed, id.tail_width);
  for (std::uint64_t v : id.ids) std::fprintf(stderr, "%s ", hex64(v).c_str());
  std::fprintf(stderr, "\n");
  return id.status == DeviceIdResult::Status::kUnique ? kExitOk : kExitAmbiguous;
}

// ---------------------------------------------------------------------------
// attack: linux

SearchResult threaded_search(const std::vector<CollisionPair>& pairs,
                             const KeySearchConfig& config, int threads) {
  SearchResult result;
  if (static_cast<int>(pairs.size()) < config.nu) {
    result.status = SearchStatus::kTooFewPairs;
    return result;
  }
  std::uint64_t begin = config.range_begin;
  std::uint64_t end = config.range_end;
  if (end == 0) end = (config.w_log2 >= 64) ? 0 : (1ull << config.w_log2);
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<std::vector<AcceptedKey>> parts(threads);
  std::vector<std::thread> pool;
  const std::uint64_t span = end - begin;
  for (int t = 0; t < threads; ++t) {
    const std::uint64_t lo = begin + span / threads * t;
    const std::uint64_t hi =
        (t + 1 == threads) ? end : begin + span / threads * (t + 1);
    pool.emplace_back([&, t, lo, hi] { parts[t] = search_range(pairs, config, lo, hi); });
  }
  for (auto& th : pool) th.join();
  for (auto& part : parts)
    result.accepted.insert(result.accepted.end(), part.begin(), part.end());

  result.keys_scanned = span;
  result.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  result.status = result.accepted.empty()  ? SearchStatus::kNoKey
                  : result.accepted.size() == 1 ? SearchStatus::kOk
                                                : SearchStatus::kAmbiguous;
  return result;
}

int run_attack_linux(const AttackArgs& a) {
  const PacketTrace trace = load_trace(a.trace_path);
  const BurstSchedule schedule = make_schedule(a.schedule, a.burst_duration);

  std::set<std::uint32_t> hosts;
  for (const TraceRecord& rec : trace) hosts.insert(rec.dst.value);
  const std::size_t expected =
      a.expected_l > 0 ? static_cast<std::size_t>(a.expected_l) : hosts.size();

  json report;
  report["os"] = "linux";
  const BurstSplit split = split_bursts(trace, schedule, expected);
  if (split.retest) {
    report["status"] = "retest";
    report["reason"] = split.reason;
    emit(report);
    std::fprintf(stderr, "burst split failed: %s\n", split.reason.c_str());
    return kExitRetest;
  }

  const auto& first = split.bursts[split.primary];
  const auto& second = split.bursts[split.secondary];
  const auto cand_a = collect_candidates(first, a.f, a.delta_l, a.both_directions);
  const auto cand_b = collect_candidates(second, a.f, a.delta_l, a.both_directions);
  const auto pairs = intersect_bursts(cand_a, cand_b);

  json bursts;
  bursts["primary"] = split.primary;
  bursts["secondary"] = split.secondary;
  bursts["primary_records"] = first.records.size();
  bursts["secondary_records"] = second.records.size();
  report["bursts"] = bursts;
  report["candidates_first"] = cand_a.size();
  report["candidates_second"] = cand_b.size();
  report["pairs"] = pairs.size();

  KeySearchConfig config;
  config.flavor = parse_linux_flavor(a.variant);
  config.arch = parse_arch(a.arch);
  config.w_log2 = a.w > 0 ? a.w : keyspace_log2(config.flavor, config.arch);
  config.nu = a.nu;
  config.f = a.f;
  config.delta_l = a.delta_l;
  config.m = a.m;
  config.src = parse_ipv4(a.src);
  config.protocol = static_cast<std::uint8_t>(a.protocol);
  config.rho = a.rho;
  config.init_net_offset = parse_u64(a.init_net_offset);
  config.range_begin = parse_u64(a.range_begin);
  config.range_end = parse_u64(a.range_end);
  report["nu"] = config.nu;
  report["w_log2"] = config.w_log2;

  int threads = std::min(a.threads, max_threads());
  if (threads < 1) threads = 1;

  SearchResult result;
  std::vector<std::uint64_t> cache;
  if (!a.cache_path.empty()) {
    try {
      std::stringstream ss(read_text_file(a.cache_path));
      std::string line;
      while (std::getline(ss, line))
        if (!line.empty()) cache.push_back(parse_u64(line));
    } catch (const std::exception&) {
    }
    const std::size_t before = cache.size();
    result = cached_search(pairs, config, cache);
    report["cache_hit"] = cache.size() == before && !result.accepted.empty();
    std::string blob;
    for (std::uint64_t k : cache) blob += hex64(k) + "\n";
    write_text_file(a.cache_path, blob);
  } else if (a.nested) {
    result = nested_search(pairs, config);
  } else if (threads > 1) {
    result = threaded_search(pairs, config, threads);
  } else {
    result = exhaustive_search(pairs, config);
  }

  report["keys_scanned"] = result.keys_scanned;
  report["elapsed_seconds"] = result.elapsed_seconds;

  json accepted = json::array();
  for (const AcceptedKey& k : result.accepted) {
    json rec;
    rec["key_hex"] = hex64(k.key);
    char b[16];
    std::snprintf(b, sizeof b, "0x%08x", k.key32);
    rec["key32_hex"] = b;
    rec["matched"] = k.matched;
    if (config.flavor == LinuxFlavor::kA3) {
      std::snprintf(b, sizeof b, "0x%08x", k.g_net);
      rec["g_net_hex"] = b;
      try {
        rec["kernel_base_hex"] = hex64(reconstruct_kernel_base(
            k.g_net, config.rho, config.arch, config.init_net_offset));
      } catch (const std::exception& e) {
        rec["kernel_base_error"] = e.what();
      }
    }
    accepted.push_back(rec);
  }
  report["accepted"] = accepted;

  switch (result.status) {
    case SearchStatus::kTooFewPairs:
      report["status"] = "too_few_pairs";
      emit(report);
      std::fprintf(stderr, "only %zu surviving pairs (need %d); retest\n",
                   pairs.size(), config.nu);
      return kExitRetest;
    case SearchStatus::kNoKey:
      report["status"] = "no_key";
      emit(report);
      std::fprintf(stderr, "no key reached %d matches over %llu keys\n", config.nu,
                   static_cast<unsigned long long>(result.keys_scanned));
      return kExitRetest;
    case SearchStatus::kAmbiguous:
      report["status"] = "ambiguous";
      emit(report);
      std::fprintf(stderr, "%zu keys survived; need more data\n",
                   result.accepted.size());
      return kExitAmbiguous;
    case SearchStatus::kOk:
      break;
  }
  report["status"] = "ok";
  emit(report);
  std::fprintf(stderr, "key %s (%d/%zu pairs) in %.2fs\n",
               hex64(result.accepted[0].key).c_str(), result.accepted[0].matched,
               pairs.size(), result.elapsed_seconds);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateArgs {
  std::string os;
  // windows
  int addresses = 30;
  double time_budget = 1.0;
  double alpha = 0.001;
  // linux parameter mode
  int f = 300;
  int m = 2048;
  int w = 48;
  double delta_t = 4.0;
  double loss = 0.0;
  double target = 1e-6;
  // linux time mode
  bool time_mode = false;
  double r = 6.8645e-13;
  double expected_pairs = 0.0;
  // linux simulate mode
  bool simulate = false;
  int l = 400;
  int nu = 11;
  int runs = 400;
  std::uint64_t seed = 7;
};

int run_estimate(const EstimateArgs& a) {
  json report;
  if (a.os == "windows") {
    const WindowsParameters p =
        choose_parameters(a.addresses, a.time_budget, a.alpha);
    report["os"] = "windows";
    report["addresses"] = a.addresses;
    report["j"] = p.j;
    report["g"] = p.g;
    report["q"] = p.q;
    report["fp_bound"] = p.fp_bound;
    std::fprintf(stderr, "L=%d, T=%.3gs -> J=%d G=%d Q=%d (fp <= %.3g)\n",
                 a.addresses, a.time_budget, p.j, p.g, p.q, p.fp_bound);
  } else if (a.time_mode) {
    if (a.expected_pairs <= 0)
      throw CLI::RequiredError("--expected-pairs (with --time)");
    const double seconds = estimate_attack_time(a.r, a.w, a.expected_pairs);
    report["os"] = "linux";
    report["mode"] = "time";
    report["r_seconds"] = a.r;
    report["w_log2"] = a.w;
    report["expected_pairs"] = a.expected_pairs;
    report["seconds"] = seconds;
    std::fprintf(stderr, "search over 2^%d keys x %.2f pairs ~ %.2f s\n", a.w,
                 a.expected_pairs, seconds);
  } else if (a.simulate) {
    const FpFnEstimate e =
        simulate_fp_fn(a.l, a.nu, a.f, a.loss, a.runs, a.seed, a.w, a.m);
    report["os"] = "linux";
    report["mode"] = "simulate";
    report["l"] = a.l;
    report["nu"] = a.nu;
    report["runs"] = a.runs;
    report["mean_pairs"] = e.mean_pairs;
    report["sd_pairs"] = e.sd_pairs;
    report["fp"] = e.fp;
    report["fn_empirical"] = e.fn_empirical;
    report["fn_fitted"] = e.fn_fitted;
    report["best_nu"] = e.best_nu;
    std::fprintf(stderr,
                 "L=%d nu=%d over %d runs: E|U|=%.2f sd=%.2f fp=%.3g fn=%.3g "
                 "(best nu %d)\n",
                 a.l, a.nu, a.runs, e.mean_pairs, e.sd_pairs, e.fp, e.fn_fitted,
                 e.best_nu);
  } else {
    const ParameterChoice c =
        optimal_parameters(a.f, a.m, a.w, a.delta_t, a.loss, a.target);
    report["os"] = "linux";
    report["mode"] = "parameters";
    report["f"] = a.f;
    report["w_log2"] = a.w;
    report["l"] = c.l;
    report["nu"] = c.nu;
    report["fp"] = c.fp;
    report["fn"] = c.fn;
    report["lambda"] = c.lambda;
    std::fprintf(stderr, "f=%d |W|=2^%d -> L=%d nu=%d (fp=%.3g fn=%.3g)\n", a.f,
                 a.w, c.l, c.nu, c.fp, c.fn);
  }
  emit(report);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// bench

int run_bench(bool quick) {
  json report;
  Rng rng(0xb43c);

  {  // phase-1 cost per send order, from a permutation-enumerating run
    const int j = quick ? 4 : 5;
    MeasurementPlan plan = random_plan(j, 4, 1, rng);
    WindowsDeviceConfig cfg;
    cfg.seed = 0x77;
    WindowsDevice dev(cfg);
    PacketTrace trace = simulate_windows_session(dev, plan, {});
    const auto phase1 = windows_phase1_ipids(trace, plan);
    const PlanMatrices pre = preprocess_plan(plan);
    Phase1Options opt;
    opt.permutations = true;
    Phase1Stats stats;
    const auto t0 = std::chrono::steady_clock::now();
    const auto cands = phase1_extract(phase1, plan, pre, opt, &stats);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    double fact = 1;
    for (int i = 2; i <= j; ++i) fact *= i;
    const double alpha = elapsed / fact;
    report["phase1_j"] = j;
    report["phase1_seconds"] = elapsed;
    report["phase1_orders"] = fact;
    report["alpha_seconds"] = alpha;
    report["implied_j6_seconds"] = alpha * 720.0;
    report["phase1_survivors"] = cands.size();
    std::fprintf(stderr, "phase1 J=%d with %zu orders: %.3fs (alpha %.3g s)\n", j,
                 static_cast<std::size_t>(fact), elapsed, alpha);
  }

  {  // search kernel throughput and the per-key-pair constant
    KeySearchConfig config;
    config.w_log2 = quick ? 18 : 22;
    config.nu = 11;
    std::vector<CollisionPair> pairs;
    Rng prng = rng.fork(2);
    for (int i = 0; i < 70; ++i) {
      Ipv4 x = random_public_ipv4(prng), y = random_public_ipv4(prng);
      if (y < x) std::swap(x, y);
      pairs.push_back({x, y});
    }
    const SearchResult res = exhaustive_search(pairs, config);
    const double keys = static_cast<double>(res.keys_scanned);
    const double per_key = res.elapsed_seconds / keys;
    // wrong keys are abandoned once nu matches are out of reach, i.e. after
    // pairs - nu + 1 examined pairs
    const double examined = static_cast<double>(pairs.size() - config.nu + 1);
    const double r = per_key / examined;
    report["search_w_log2"] = config.w_log2;
    report["search_seconds"] = res.elapsed_seconds;
    report["search_keys_per_second"] = keys / res.elapsed_seconds;
    report["r_seconds"] = r;
    report["implied_seconds_w32_ep70"] = estimate_attack_time(r, 32, 70.45);
    report["implied_seconds_w48_ep70"] = estimate_attack_time(r, 48, 70.45);
    std::fprintf(stderr,
                 "search 2^%d keys x %zu pairs: %.3fs (%.3g keys/s, r=%.3g s)\n",
                 config.w_log2, pairs.size(), res.elapsed_seconds,
                 keys / res.elapsed_seconds, r);
  }

  emit(report);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IP ID generator lab: simulate devices, record traces, extract keys"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a key=value file");

  GenDeviceArgs gen;
  auto* cmd_gen = app.add_subcommand("gen-device", "Write a device descriptor");
  cmd_gen->add_option("--os", gen.os, "windows or linux")
      ->required()
      ->check(CLI::IsMember({"windows", "linux"}));
  cmd_gen->add_option("-o,--out", gen.out_path, "descriptor path")->required();
  cmd_gen->add_option("--seed", gen.seed, "key material seed");
  cmd_gen->add_option("--flavor", gen.flavor, "windows: rs5 or prers5");
  cmd_gen->add_option("--hash", gen.hash, "windows: toeplitz or strongmix");
  cmd_gen->add_option("--buckets", gen.buckets_windows, "windows: counter count");
  cmd_gen->add_flag("--zero-counters", gen.zero_counters,
                    "windows: start all counters at zero");
  cmd_gen->add_option("--variant", gen.variant, "linux: a0, a1, a2 or a3");
  cmd_gen->add_option("--f", gen.f, "linux: tick frequency (Hz)");
  cmd_gen->add_option("--m", gen.buckets_linux, "linux: counter count");
  cmd_gen->add_option("--protocol", gen.protocol, "linux: IP protocol number");
  cmd_gen->add_option("--arch", gen.arch, "linux: x64 or arm64 (required for a3)");
  cmd_gen->add_option("--rho", gen.rho, "linux a3: net pointer shift");
  cmd_gen->add_flag("--no-kaslr", gen.no_kaslr, "linux a3: fixed kernel base");
  cmd_gen->add_option("--init-net-offset", gen.init_net_offset,
                      "linux a3: init_net offset in the image");
  cmd_gen->add_option("--src", gen.src, "device source address");

  MeasureArgs meas;
  auto* cmd_meas = app.add_subcommand("measure", "Simulate a measurement session");
  cmd_meas->add_option("-d,--descriptor", meas.descriptor, "device descriptor")
      ->required();
  cmd_meas->add_option("-o,--out", meas.out_path, "trace output (jsonl)")->required();
  cmd_meas->add_option("--seed", meas.seed, "session randomness seed");
  cmd_meas->add_option("--plan", meas.plan_path, "windows: measurement plan json");
  cmd_meas->add_option("--plan-out", meas.plan_out, "windows: write generated plan");
  cmd_meas->add_option("--j", meas.j, "windows: in-class address count");
  cmd_meas->add_option("--g", meas.g, "windows: pair count");
  cmd_meas->add_option("--q", meas.q, "windows: leading-bit-agreeing pair count");
  cmd_meas->add_option("--permutation", meas.permutation,
                       "windows: comma list payload->slot, or 'random'");
  cmd_meas->add_option("--drop", meas.drops, "windows: payload index lost once");
  cmd_meas->add_option("--swap-pair", meas.swapped,
                       "windows: pair index sent reversed");
  cmd_meas->add_option("--interfere", meas.interference,
                       "windows: bucket:seconds foreign counter hit");
  cmd_meas->add_option("--spacing", meas.spacing, "windows: packet spacing (s)");
  cmd_meas->add_option("--dst-count", meas.dst_count, "linux: destination count");
  cmd_meas->add_option("--dst-file", meas.dst_file, "linux: destinations, one per line");
  cmd_meas->add_option("--schedule", meas.schedule, "linux: chrome or pair");
  cmd_meas->add_option("--burst-duration", meas.burst_duration,
                       "linux: seconds per burst");
  cmd_meas->add_option("--jitter", meas.jitter, "linux: arrival jitter sigma (s)");
  cmd_meas->add_option("--loss", meas.loss, "linux: packet loss rate");
  cmd_meas->add_option("--chunk-drop", meas.chunk_drop,
                       "linux: burst:fraction head loss");
  cmd_meas->add_flag("--rewrite-ipids", meas.rewrite_ipids,
                     "linux: middlebox randomizes the IPID field");

  AttackArgs atk;
  auto* cmd_atk = app.add_subcommand("attack", "Extract key material from a trace");
  cmd_atk->add_option("--os", atk.os, "windows or linux")
      ->required()
      ->check(CLI::IsMember({"windows", "linux"}));
  cmd_atk->add_option("-t,--trace", atk.trace_path, "recorded trace (jsonl)")
      ->required();
  cmd_atk->add_option("--plan", atk.plan_path, "windows: measurement plan json");
  cmd_atk->add_flag("--permutations", atk.permutations,
                    "windows: send order unknown, try all J! orders");
  cmd_atk->add_option("--max-gap", atk.max_gap,
                      "windows: tolerated in-class counter gaps");
  cmd_atk->add_flag("--both-pair-orders", atk.both_pair_orders,
                    "windows: pair send order unknown");
  cmd_atk->add_option("--pair-max-gap", atk.pair_max_gap,
                      "windows: tolerated counter gaps inside a pair");
  cmd_atk->add_option("--tail-width", atk.tail_width,
                      "windows: device id width (key tail bits)");
  cmd_atk->add_option("--store", atk.store_path,
                      "windows: extraction store (jsonl, appended)");
  cmd_atk->add_flag("--fast-track", atk.fast_track,
                    "windows: try stored keys before the full attack");
  cmd_atk->add_option("--variant", atk.variant, "linux: a1, a2 or a3");
  cmd_atk->add_option("--schedule", atk.schedule, "linux: chrome or pair");
  cmd_atk->add_option("--burst-duration", atk.burst_duration,
                      "linux: seconds per burst");
  cmd_atk->add_option("--expected-l", atk.expected_l,
                      "linux: expected packets per burst");
  cmd_atk->add_option("--f", atk.f, "linux: device tick frequency");
  cmd_atk->add_option("--delta-l", atk.delta_l, "linux: burst length (s)");
  cmd_atk->add_option("--nu", atk.nu, "linux: collision acceptance threshold");
  cmd_atk->add_option("--m", atk.m, "linux: counter count");
  cmd_atk->add_option("--w", atk.w, "linux: keyspace log2 (default per variant)");
  cmd_atk->add_option("--src", atk.src, "linux: victim source address");
  cmd_atk->add_option("--protocol", atk.protocol, "linux: IP protocol number");
  cmd_atk->add_option("--arch", atk.arch, "linux: x64 or arm64");
  cmd_atk->add_option("--rho", atk.rho, "linux a3: net pointer shift");
  cmd_atk->add_option("--init-net-offset", atk.init_net_offset,
                      "linux a3: init_net offset");
  cmd_atk->add_option("--range-begin", atk.range_begin, "linux: search from (hex ok)");
  cmd_atk->add_option("--range-end", atk.range_end, "linux: search to (0 = full)");
  cmd_atk->add_flag("--nested", atk.nested, "linux a3: per-slot nested search");
  cmd_atk->add_option("--cache", atk.cache_path, "linux: known-keys cache file");
  cmd_atk->add_option("--threads", atk.threads,
                      "linux: worker threads (capped by IPIDLAB_THREADS)");
  cmd_atk->add_flag("--both-directions", atk.both_directions,
                    "linux: accept pair windows in either order");

  EstimateArgs est;
  auto* cmd_est = app.add_subcommand("estimate", "Analytic parameter estimates");
  cmd_est->add_option("--os", est.os, "windows or linux")
      ->required()
      ->check(CLI::IsMember({"windows", "linux"}));
  cmd_est->add_option("--addresses", est.addresses, "windows: address budget L");
  cmd_est->add_option("--time-budget", est.time_budget, "windows: seconds allowed");
  cmd_est->add_option("--alpha", est.alpha, "windows: measured per-order cost (s)");
  cmd_est->add_option("--f", est.f, "linux: tick frequency");
  cmd_est->add_option("--m", est.m, "linux: counter count");
  cmd_est->add_option("--w", est.w, "linux: keyspace log2");
  cmd_est->add_option("--delta-t", est.delta_t, "linux: burst separation (s)");
  cmd_est->add_option("--loss", est.loss, "linux: packet loss rate");
  cmd_est->add_option("--target", est.target, "linux: fp+fn target");
  cmd_est->add_flag("--time", est.time_mode, "linux: expected search time");
  cmd_est->add_option("--r", est.r, "linux: per key-pair cost (s)");
  cmd_est->add_option("--expected-pairs", est.expected_pairs,
                      "linux: expected surviving pairs E(P)");
  cmd_est->add_flag("--simulate", est.simulate,
                    "linux: Monte-Carlo fp/fn over full sessions");
  cmd_est->add_option("--l", est.l, "linux: addresses per burst");
  cmd_est->add_option("--nu", est.nu, "linux: acceptance threshold");
  cmd_est->add_option("--runs", est.runs, "linux: Monte-Carlo sessions");
  cmd_est->add_option("--seed", est.seed, "linux: Monte-Carlo seed");

  bool bench_quick = false;
  auto* cmd_bench = app.add_subcommand("bench", "Measure host cost constants");
  cmd_bench->add_flag("--quick", bench_quick, "smaller sizes, rough numbers");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (cmd_gen->parsed()) return run_gen_device(gen);
    if (cmd_meas->parsed()) return run_measure(meas);
    if (cmd_atk->parsed())
      return atk.os == "windows" ? run_attack_windows(atk) : run_attack_linux(atk);
    if (cmd_est->parsed()) return run_estimate(est);
    if (cmd_bench->parsed()) return run_bench(bench_quick);
  } catch (const CLI::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
