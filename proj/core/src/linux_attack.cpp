#include "ipidlab/linux_attack.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "ipidlab/jhash.hpp"
#include "ipidlab/rng.hpp"

namespace ipidlab {
namespace {

double window_distance(double t, double start, double duration) {
  if (t < start) return start - t;
  if (t > start + duration) return t - (start + duration);
  return 0;
}

// P(X <= k) for X ~ Poisson(lambda), evaluated per-term in log space so large
// lambda does not underflow.
double poisson_cdf(int k, double lambda) {
  if (k < 0) return 0;
  if (lambda <= 0) return 1;
  double sum = 0;
  for (int i = 0; i <= k; ++i)
    sum += std::exp(-lambda + i * std::log(lambda) - std::lgamma(i + 1.0));
  return std::min(sum, 1.0);
}

// P(X >= k) for X ~ Binomial(n, p).
double binom_sf(int k, int n, double p) {
  if (k <= 0) return 1;
  if (k > n || p <= 0) return 0;
  const double lp = std::log(p), lq = std::log1p(-p);
  double sum = 0;
  for (int i = k; i <= n; ++i) {
    const double lt = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) -
                      std::lgamma(n - i + 1.0) + i * lp + (n - i) * lq;
    sum += std::exp(lt);
  }
  return std::min(sum, 1.0);
}

// P(some wrong key among 2^w - 1 reaches nu matches), given the per-key
// probability p1; evaluated as 1 - (1 - p1)^(2^w - 1) without cancellation.
double fp_from_p1(double p1, int w_log2) {
  if (p1 <= 0) return 0;
  if (p1 >= 1) return 1;
  const double wrong_keys = std::exp2(w_log2) - 1;
  return -std::expm1(wrong_keys * std::log1p(-p1));
}

std::uint64_t pair_token(Ipv4 lo, Ipv4 hi) {
  return (static_cast<std::uint64_t>(lo.value) << 32) | hi.value;
}

struct ResolvedRange {
  std::uint64_t begin, end;
};

ResolvedRange resolve_range(const KeySearchConfig& config) {
  if (config.w_log2 < 1 || config.w_log2 > 48)
    throw std::invalid_argument("keyspace width out of range");
  const std::uint64_t space = 1ull << config.w_log2;
  ResolvedRange r{config.range_begin, config.range_end ? config.range_end : space};
  if (r.begin >= r.end || r.end > space)
    throw std::invalid_argument("bad key range");
  return r;
}

// Hot loop: a block of consecutive keys racing through the pair list. Wrong
// keys almost never collide, so they all die together once the failure budget
// is spent; the lane loop is branch-free and auto-vectorizes.
template <bool kOldInit>
void scan_keys(const std::uint32_t* lo, const std::uint32_t* hi, int pair_count,
               int nu, std::uint32_t src, std::uint32_t proto_word, std::uint32_t m,
               std::uint64_t high_word, std::uint32_t g_net, std::uint64_t kbegin,
               std::uint64_t kend, std::vector<AcceptedKey>& out) {
  const int allowed = pair_count - nu;  // failures a key may survive
  if (allowed < 0) return;
  constexpr int kBlock = 64;
  const bool pow2 = (m & (m - 1)) == 0;
  const std::uint32_t mask = m - 1;
  std::uint16_t fails[kBlock];

  for (std::uint64_t base = kbegin; base < kend; base += kBlock) {
    const int lanes = static_cast<int>(std::min<std::uint64_t>(kBlock, kend - base));
    const auto base32 = static_cast<std::uint32_t>(base);
    std::fill_n(fails, lanes, std::uint16_t{0});

    for (int p = 0; p < pair_count; ++p) {
      const std::uint32_t a = lo[p], b = hi[p];
      if (pow2) {
        for (int i = 0; i < lanes; ++i) {
          const std::uint32_t k = base32 + static_cast<std::uint32_t>(i);
          const std::uint32_t ha =
              kOldInit ? jenkins_lookup3_a1(a, src, proto_word, k)
                       : jenkins_lookup3(a, src, proto_word, k);
          const std::uint32_t hb =
              kOldInit ? jenkins_lookup3_a1(b, src, proto_word, k)
                       : jenkins_lookup3(b, src, proto_word, k);
          fails[i] = static_cast<std::uint16_t>(fails[i] + ((ha & mask) != (hb & mask)));
        }
      } else {
        for (int i = 0; i < lanes; ++i) {
          const std::uint32_t k = base32 + static_cast<std::uint32_t>(i);
          const std::uint32_t ha =
              kOldInit ? jenkins_lookup3_a1(a, src, proto_word, k)
                       : jenkins_lookup3(a, src, proto_word, k);
          const std::uint32_t hb =
              kOldInit ? jenkins_lookup3_a1(b, src, proto_word, k)
                       : jenkins_lookup3(b, src, proto_word, k);
          fails[i] = static_cast<std::uint16_t>(fails[i] + ((ha % m) != (hb % m)));
        }
      }
      if (p >= allowed) {
        bool alive = false;
        for (int i = 0; i < lanes; ++i) alive |= fails[i] <= allowed;
        if (!alive) break;
      }
    }

    for (int i = 0; i < lanes; ++i) {
      if (fails[i] <= allowed) {
        AcceptedKey acc;
        acc.key = high_word | (base + static_cast<std::uint64_t>(i));
        acc.key32 = base32 + static_cast<std::uint32_t>(i);
        acc.g_net = g_net;
        acc.matched = pair_count - fails[i];
        out.push_back(acc);
      }
    }
  }
}

}  // namespace

BurstSplit split_bursts(const PacketTrace& trace, const BurstSchedule& schedule,
                        std::size_t expected_per_burst) {
  const auto burst_count = schedule.offsets.size();
  if (burst_count < 2) throw std::invalid_argument("need at least two bursts");

  BurstSplit split;
  split.bursts.resize(burst_count);
  for (std::size_t b = 0; b < burst_count; ++b)
    split.bursts[b].label = static_cast<int>(b);

  std::size_t received = 0;
  for (const auto& rec : trace) {
    if (rec.dropped) continue;
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < burst_count; ++b) {
      const double d = window_distance(rec.t_arrive, schedule.offsets[b],
                                       schedule.burst_duration);
      if (d < best_d) {
        best_d = d;
        best = b;
      }
    }
    split.bursts[best].records.push_back(rec);
    ++received;
  }

  if (received == 0) {
    split.retest = true;
    split.reason = "no records received";
    return split;
  }

  // Analysis bursts: the well-separated 4s pair when the full schedule is
  // present, otherwise the last two bursts.
  int pri = burst_count >= 6 ? 4 : static_cast<int>(burst_count) - 2;
  const int sec = burst_count >= 6 ? 5 : static_cast<int>(burst_count) - 1;
  auto mostly_missing = [&](int b) {
    return split.bursts[b].records.size() * 2 < expected_per_burst;
  };
  if (mostly_missing(pri) && pri > 0 && !mostly_missing(pri - 1)) pri -= 1;
  if (mostly_missing(pri) || mostly_missing(sec)) {
    split.retest = true;
    split.reason = "analysis bursts mostly missing";
    return split;
  }
  split.primary = pri;
  split.secondary = sec;
  return split;
}

std::vector<CandidatePair> collect_candidates(const BurstObservation& burst, int f,
                                              double delta_l, bool both_directions) {
  const double lambda_l = f * delta_l + 10;
  if (lambda_l >= 32768)
    throw std::invalid_argument("ipid window too wide to be meaningful");

  struct Entry {
    std::uint16_t ipid;
    std::uint32_t dst;
  };
  std::vector<Entry> entries;
  entries.reserve(burst.records.size());
  for (const auto& rec : burst.records)
    if (!rec.dropped) entries.push_back({rec.ipid, rec.dst.value});
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.ipid != b.ipid ? a.ipid < b.ipid : a.dst < b.dst;
  });

  std::vector<CandidatePair> out;
  const std::size_t n = entries.size();
  auto emit = [&](const Entry& s, const Entry& t) {
    // s -> t is the in-window direction; keep address order for the record.
    const auto d = static_cast<std::uint16_t>(t.ipid - s.ipid);
    if (s.dst < t.dst) {
      out.push_back({Ipv4{s.dst}, Ipv4{t.dst}, d});
    } else if (both_directions && t.dst < s.dst) {
      out.push_back({Ipv4{t.dst}, Ipv4{s.dst}, d});
    }
  };
  for (std::size_t i = 0; i < n; ++i) {
    // Partners strictly above entries[i].ipid within the window, then the
    // wrapped tail below ipid + lambda - 2^16.
    for (std::size_t j = i + 1; j < n; ++j) {
      const int d = entries[j].ipid - entries[i].ipid;
      if (d >= lambda_l) break;
      if (d > 0) emit(entries[i], entries[j]);
    }
    const double wrap_limit = entries[i].ipid + lambda_l - 65536.0;
    for (std::size_t j = 0; j < n && entries[j].ipid < wrap_limit; ++j)
      emit(entries[i], entries[j]);
  }
  return out;
}

std::vector<CollisionPair> intersect_bursts(const std::vector<CandidatePair>& a,
                                            const std::vector<CandidatePair>& b) {
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(a.size() * 2);
  for (const auto& p : a) seen.insert(pair_token(p.lo, p.hi));
  std::vector<CollisionPair> out;
  for (const auto& p : b)
    if (seen.erase(pair_token(p.lo, p.hi)) > 0) out.push_back({p.lo, p.hi});
  std::sort(out.begin(), out.end(), [](const CollisionPair& x, const CollisionPair& y) {
    return x.lo != y.lo ? x.lo < y.lo : x.hi < y.hi;
  });
  return out;
}

std::uint32_t g_net_of_slot(const KeySearchConfig& config, std::uint32_t slot) {
  const std::uint64_t base =
      config.arch == Arch::kX64 ? kX64DefaultBase : kArm64DefaultBase;
  const std::uint64_t slots =
      config.arch == Arch::kX64 ? kX64Slots : (1ull << kArm64SlotBits);
  if (slot >= slots) throw std::invalid_argument("displacement slot out of range");
  const std::uint64_t net =
      base + (static_cast<std::uint64_t>(slot) << 21) + config.init_net_offset;
  return net_hash_mix(net, config.rho);
}

std::uint32_t bucket_of(const KeySearchConfig& config, Ipv4 dst, std::uint64_t key) {
  const auto key32 = static_cast<std::uint32_t>(key);
  std::uint32_t pw = config.protocol;
  if (config.flavor == LinuxFlavor::kA3)
    pw ^= g_net_of_slot(config, static_cast<std::uint32_t>(key >> 32));
  const std::uint32_t h =
      config.flavor == LinuxFlavor::kA1
          ? jenkins_lookup3_a1(dst.value, config.src.value, pw, key32)
          : jenkins_lookup3(dst.value, config.src.value, pw, key32);
  return h % static_cast<std::uint32_t>(config.m);
}

std::vector<AcceptedKey> search_range(const std::vector<CollisionPair>& pairs,
                                      const KeySearchConfig& config,
                                      std::uint64_t begin, std::uint64_t end) {
  if (begin >= end) return {};
  const int pair_count = static_cast<int>(pairs.size());
  std::vector<std::uint32_t> lo(pair_count), hi(pair_count);
  for (int i = 0; i < pair_count; ++i) {
    lo[i] = pairs[i].lo.value;
    hi[i] = pairs[i].hi.value;
  }
  const auto src = config.src.value;
  const auto m = static_cast<std::uint32_t>(config.m);
  const std::uint32_t proto = config.protocol;

  std::vector<AcceptedKey> out;
  if (config.flavor != LinuxFlavor::kA3) {
    if (config.flavor == LinuxFlavor::kA1)
      scan_keys<true>(lo.data(), hi.data(), pair_count, config.nu, src, proto, m, 0,
                      0, begin, end, out);
    else
      scan_keys<false>(lo.data(), hi.data(), pair_count, config.nu, src, proto, m, 0,
                       0, begin, end, out);
    return out;
  }

  // Concatenated (slot, key32) space: the namespace-mix word is constant
  // within a slot, so the scan proceeds slot by slot.
  for (std::uint64_t slot = begin >> 32; slot <= (end - 1) >> 32; ++slot) {
    const std::uint64_t slot_base = slot << 32;
    const std::uint64_t kbegin = std::max(begin, slot_base) - slot_base;
    const std::uint64_t kend =
        std::min<std::uint64_t>(end, slot_base + (1ull << 32)) - slot_base;
    const std::uint32_t g = g_net_of_slot(config, static_cast<std::uint32_t>(slot));
    scan_keys<false>(lo.data(), hi.data(), pair_count, config.nu, src, proto ^ g, m,
                     slot_base, g, kbegin, kend, out);
  }
  return out;
}

namespace {

SearchResult finish_search(std::vector<AcceptedKey> accepted, std::uint64_t scanned,
                           double elapsed) {
  SearchResult res;
  res.accepted = std::move(accepted);
  res.keys_scanned = scanned;
  res.elapsed_seconds = elapsed;
  res.status = res.accepted.empty()
                   ? SearchStatus::kNoKey
                   : (res.accepted.size() == 1 ? SearchStatus::kOk
                                               : SearchStatus::kAmbiguous);
  return res;
}

}  // namespace

SearchResult exhaustive_search(const std::vector<CollisionPair>& pairs,
                               const KeySearchConfig& config) {
  if (static_cast<int>(pairs.size()) < config.nu) {
    SearchResult res;
    res.status = SearchStatus::kTooFewPairs;
    return res;
  }
  const auto range = resolve_range(config);
  const auto start = std::chrono::steady_clock::now();
  auto accepted = search_range(pairs, config, range.begin, range.end);
  const std::chrono::duration<double> elapsed =
      std::chrono::steady_clock::now() - start;
  return finish_search(std::move(accepted), range.end - range.begin,
                       elapsed.count());
}

SearchResult nested_search(const std::vector<CollisionPair>& pairs,
                           const KeySearchConfig& config) {
  if (static_cast<int>(pairs.size()) < config.nu) {
    SearchResult res;
    res.status = SearchStatus::kTooFewPairs;
    return res;
  }
  const auto range = resolve_range(config);
  const auto start = std::chrono::steady_clock::now();
  std::vector<AcceptedKey> accepted;
  if (config.flavor != LinuxFlavor::kA3) {
    accepted = search_range(pairs, config, range.begin, range.end);
  } else {
    // Outer loop over displacement slots, inner over 32-bit keys; must agree
    // exactly with the flat scan.
    for (std::uint64_t slot = range.begin >> 32; slot <= (range.end - 1) >> 32;
         ++slot) {
      const std::uint64_t b = std::max(range.begin, slot << 32);
      const std::uint64_t e = std::min(range.end, (slot + 1) << 32);
      auto part = search_range(pairs, config, b, e);
      accepted.insert(accepted.end(), part.begin(), part.end());
    }
  }
  const std::chrono::duration<double> elapsed =
      std::chrono::steady_clock::now() - start;
  return finish_search(std::move(accepted), range.end - range.begin,
                       elapsed.count());
}

SearchResult cached_search(const std::vector<CollisionPair>& pairs,
                           const KeySearchConfig& config,
                           std::vector<std::uint64_t>& seen_keys) {
  if (static_cast<int>(pairs.size()) < config.nu) {
    SearchResult res;
    res.status = SearchStatus::kTooFewPairs;
    return res;
  }
  const auto start = std::chrono::steady_clock::now();
  for (std::uint64_t key : seen_keys) {
    int matched = 0;
    for (const auto& p : pairs)
      matched += bucket_of(config, p.lo, key) == bucket_of(config, p.hi, key);
    if (matched >= config.nu) {
      const std::chrono::duration<double> elapsed =
          std::chrono::steady_clock::now() - start;
      AcceptedKey acc;
      acc.key = key;
      acc.key32 = static_cast<std::uint32_t>(key);
      acc.g_net = config.flavor == LinuxFlavor::kA3
                      ? g_net_of_slot(config, static_cast<std::uint32_t>(key >> 32))
                      : 0;
      acc.matched = matched;
      SearchResult res;
      res.status = SearchStatus::kOk;
      res.accepted.push_back(acc);
      res.keys_scanned = seen_keys.size();
      res.elapsed_seconds = elapsed.count();
      return res;
    }
  }
  SearchResult full = exhaustive_search(pairs, config);
  if (full.status == SearchStatus::kOk) seen_keys.push_back(full.accepted[0].key);
  return full;
}

ProbeSet build_probe_set(const KeySearchConfig& config, std::uint64_t key,
                         int pair_count, Rng& rng) {
  if (pair_count < 1) throw std::invalid_argument("need at least one probe pair");
  ProbeSet probe;
  std::unordered_set<std::uint32_t> used;
  for (int i = 0; i < pair_count; ++i) {
    Ipv4 a{};
    do {
      a = random_public_ipv4(rng);
    } while (!used.insert(a.value).second);
    const std::uint32_t target = bucket_of(config, a, key);
    Ipv4 b{};
    for (;;) {
      b = random_public_ipv4(rng);
      if (used.count(b.value)) continue;
      if (bucket_of(config, b, key) != target) continue;
      used.insert(b.value);
      break;
    }
    probe.pairs.push_back({a, b});
  }
  return probe;
}

bool targeted_reidentify(const KeySearchConfig& config, std::uint64_t key,
                         const ProbeSet& probe, const BurstObservation& burst,
                         int min_matches) {
  if (static_cast<int>(probe.pairs.size()) < min_matches)
    throw std::invalid_argument("probe set smaller than the match threshold");
  for (const auto& p : probe.pairs)
    if (bucket_of(config, p[0], key) != bucket_of(config, p[1], key))
      throw std::invalid_argument("probe pair does not collide under the key");

  std::unordered_map<std::uint32_t, std::uint16_t> ipid_by_dst;
  for (const auto& rec : burst.records)
    if (!rec.dropped) ipid_by_dst.emplace(rec.dst.value, rec.ipid);

  const double lambda_l = config.f * config.delta_l + 10;
  int matched = 0;
  for (const auto& p : probe.pairs) {
    const Ipv4 lo = std::min(p[0], p[1]), hi = std::max(p[0], p[1]);
    const auto it_lo = ipid_by_dst.find(lo.value);
    const auto it_hi = ipid_by_dst.find(hi.value);
    if (it_lo == ipid_by_dst.end() || it_hi == ipid_by_dst.end()) continue;
    const auto d = static_cast<std::uint16_t>(it_hi->second - it_lo->second);
    if (d > 0 && d < lambda_l) ++matched;
  }
  return matched >= min_matches;
}

ParameterChoice optimal_parameters(int f, int m, int w_log2, double delta_t,
                                   double loss, double target) {
  if (f < 1 || m < 1 || delta_t <= 0) throw std::invalid_argument("bad parameters");
  for (int l = 50; l <= 1000; l += 50) {
    const double delta_l = (l / 400.0) * 0.6;
    const double survive = std::pow(1.0 - loss, 4);
    const double all_pairs = 0.5 * l * (l - 1);
    const double lambda = all_pairs / m * survive;  // true pairs reaching U
    const double lam_l = f * delta_l + 10;
    // False pairs reaching U: in-window once, and again delta_t later.
    const double a_false = (lam_l / (f * delta_t)) * all_pairs * (lam_l / 65536.0) * survive;
    const int a = static_cast<int>(std::floor(a_false + lambda));

    ParameterChoice best;
    double best_sum = std::numeric_limits<double>::infinity();
    for (int nu = 1; nu <= 30; ++nu) {
      const double fn = poisson_cdf(nu - 1, lambda);
      const double fp = fp_from_p1(binom_sf(nu, a, 1.0 / m), w_log2);
      if (fp + fn < best_sum) {
        best_sum = fp + fn;
        best = {l, nu, fp, fn, lambda};
      }
    }
    if (best_sum <= target) return best;
  }
  throw std::runtime_error("no round size meets the error target");
}

FpFnEstimate simulate_fp_fn(int l, int nu, int f, double loss, int runs,
                            std::uint64_t seed, int w_log2, int m) {
  if (runs < 1) throw std::invalid_argument("need at least one run");
  if (l < 2) throw std::invalid_argument("round size too small");

  const double delta_l = (l / 400.0) * 0.6;
  BurstSchedule schedule = BurstSchedule::analysis_pair();
  schedule.burst_duration = delta_l;

  std::vector<std::uint64_t> hist_a, hist_t;
  double sum = 0, sum_sq = 0, sum_true = 0;
  Rng top(seed);
  for (int run = 0; run < runs; ++run) {
    Rng run_rng = top.fork(static_cast<std::uint64_t>(run) + 1);
    LinuxDeviceConfig dc;
    dc.flavor = LinuxFlavor::kA2;
    dc.tick_hz = f;
    dc.bucket_count = m;
    dc.seed = run_rng.next_u64();
    LinuxDevice device(dc);

    std::vector<Ipv4> dsts;
    std::unordered_set<std::uint32_t> used;
    dsts.reserve(l);
    while (static_cast<int>(dsts.size()) < l) {
      const Ipv4 ip = random_public_ipv4(run_rng);
      if (used.insert(ip.value).second) dsts.push_back(ip);
    }
    std::sort(dsts.begin(), dsts.end());

    NetworkModel model;
    model.jitter_sigma = 0;  // bursts are taken from ground-truth labels here
    model.loss_rate = loss;
    model.seed = run_rng.next_u64();
    const PacketTrace trace = simulate_linux_session(device, dsts, schedule, model);

    BurstObservation first{0, {}}, second{1, {}};
    for (const auto& rec : trace)
      if (!rec.dropped) (rec.burst == 0 ? first : second).records.push_back(rec);

    const auto u = intersect_bursts(collect_candidates(first, f, delta_l),
                                    collect_candidates(second, f, delta_l));
    int n_true = 0;
    for (const auto& p : u)
      n_true += device.bucket_index(p.lo) == device.bucket_index(p.hi);

    const auto n_all = u.size();
    if (hist_a.size() <= n_all) hist_a.resize(n_all + 1, 0);
    if (hist_t.size() <= static_cast<std::size_t>(n_true)) hist_t.resize(n_true + 1, 0);
    ++hist_a[n_all];
    ++hist_t[n_true];
    sum += static_cast<double>(n_all);
    sum_sq += static_cast<double>(n_all) * n_all;
    sum_true += n_true;
  }

  FpFnEstimate est;
  est.p_a.resize(hist_a.size());
  est.p_t.resize(hist_t.size());
  for (std::size_t i = 0; i < hist_a.size(); ++i)
    est.p_a[i] = static_cast<double>(hist_a[i]) / runs;
  for (std::size_t i = 0; i < hist_t.size(); ++i)
    est.p_t[i] = static_cast<double>(hist_t[i]) / runs;
  est.mean_pairs = sum / runs;
  est.sd_pairs = std::sqrt(std::max(0.0, sum_sq / runs - est.mean_pairs * est.mean_pairs));

  auto fp_at = [&](int threshold) {
    double fp = 0;
    for (std::size_t n = 0; n < est.p_a.size(); ++n)
      if (est.p_a[n] > 0)
        fp += est.p_a[n] *
              fp_from_p1(binom_sf(threshold, static_cast<int>(n), 1.0 / m), w_log2);
    return fp;
  };
  est.fp = fp_at(nu);
  for (std::size_t i = 0; i < est.p_t.size() && i < static_cast<std::size_t>(nu); ++i)
    est.fn_empirical += est.p_t[i];
  const double lambda_hat = sum_true / runs;
  est.fn_fitted = poisson_cdf(nu - 1, lambda_hat);

  double best_sum = std::numeric_limits<double>::infinity();
  for (int candidate = 1; candidate <= 30; ++candidate) {
    const double total = poisson_cdf(candidate - 1, lambda_hat) + fp_at(candidate);
    if (total < best_sum) {
      best_sum = total;
      est.best_nu = candidate;
    }
  }
  return est;
}

double estimate_attack_time(double r_seconds, int w_log2, double expected_pairs) {
  if (r_seconds <= 0) throw std::invalid_argument("per-pair time must be positive");
  if (expected_pairs < 0) throw std::invalid_argument("expected pairs must be non-negative");
  return r_seconds * std::exp2(w_log2) * expected_pairs;
}

}  // namespace ipidlab
