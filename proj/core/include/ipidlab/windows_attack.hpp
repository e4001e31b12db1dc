#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ipidlab/bitmatrix.hpp"
#include "ipidlab/ipv4.hpp"

namespace ipidlab {

class Rng;

// Probe layout for one measurement: J addresses inside one /16 ("class B"),
// plus G address pairs, each pair inside its own /16. The J block pins the key
// bits reachable through in-class address differences; the pairs pin the rest.
struct MeasurementPlan {
  std::vector<Ipv4> phase1_ips;
  std::vector<std::array<Ipv4, 2>> pairs;

  int j_count() const { return static_cast<int>(phase1_ips.size()); }
  int g_count() const { return static_cast<int>(pairs.size()); }
  // Pairs whose leading address bit agrees with phase1_ips[0]'s leading bit.
  int q_count() const;
  std::uint64_t digest() const;  // FNV-1a over the canonical dotted form

  std::string to_json() const;
  static MeasurementPlan from_json(const std::string& text);
};

// Random screened plan: J in-class addresses passing validate_ip_set, plus G
// pair class Bs with exactly q leading-bit agreements. Throws only on
// impossible arguments (j < 4, g < 2, q > g, q == g).
MeasurementPlan random_plan(int j, int g, int q, Rng& rng);

struct ScreeningReport {
  bool ok = false;
  int n1 = 0;           // in-class leading bit positions shared by all J
  int n2 = 0;           // in-class trailing bit positions shared by all J
  bool parity_ok = false;  // some in-class XOR with ip 0 has odd parity
  bool q_ok = false;       // q < g, so the top recoverable key bit is pinned
  int rank = 0;
  int kernel_rank = 0;
  std::vector<std::string> failures;
};
// Diagnostics, not exceptions: a failing set is reported, never thrown on.
ScreeningReport validate_ip_set(const MeasurementPlan& plan);

// The 15(J-1) x 30 system relating in-class address differences to key bits
// K_33..K_62. Row 15(j-1)+(i-17) carries equation bit i of difference j;
// column c is the coefficient of K_{33+c}.
BitMatrix build_coefficient_matrix(const std::vector<Ipv4>& phase1_ips);

struct PlanMatrices {
  BitMatrix c;
  BitMatrix z;  // row-op matrix: z*c = [I_30; 0] when rank == 30
  int rank = 0;
  int kernel_rank = 0;
};
PlanMatrices preprocess_plan(const MeasurementPlan& plan);

struct Phase1Options {
  bool permutations = false;  // try all J! send orders
  int max_gap = 0;            // tolerate up to this many counter gaps in-class
};

struct Phase1Candidate {
  std::uint32_t key33_62 = 0;  // 30 bits, K_62 in bit 0
  std::uint16_t beta0 = 0;     // bucket counter base, mod 2^14
  // payload index -> send slot; empty means identity (in-order)
  std::vector<std::uint8_t> permutation;
  // gaps[s-1] counter gaps immediately before send slot s; empty means none
  std::vector<std::uint8_t> gaps;
};

struct Phase1Stats {
  std::uint64_t candidates_checked = 0;  // (order, gap, beta0) triples tested
  std::uint64_t configs = 0;             // (order, gap) pairs enumerated
};

// Recovers K_33..K_62 and the counter base from the J in-class IPIDs by
// enumerating the 2^14 counter bases (the top counter bit cancels) and keeping
// those whose stacked differences pass the z-filter. Requires a full-rank plan.
std::vector<Phase1Candidate> phase1_extract(const std::vector<std::uint16_t>& ipids,
                                            const MeasurementPlan& plan,
                                            const PlanMatrices& pre,
                                            const Phase1Options& opt = {},
                                            Phase1Stats* stats = nullptr);

struct Phase2Options {
  bool both_pair_orders = false;  // pair send order unknown: accept either
  int pair_max_gap = 0;           // tolerate counter gaps inside a pair
};

struct KeyExtraction {
  std::uint64_t key18_62 = 0;      // 45 bits, K_62 in bit 0
  std::uint16_t offset_secret = 0; // 15 bits; see predict_counter
  std::uint16_t beta0 = 0;         // mod 2^14
  std::uint64_t plan_digest = 0;
};

// Extends a phase-1 candidate to K_18..K_62 by enumerating the 2^15 choices of
// K_18..K_32 and keeping those consistent with every pair's IPID difference.
// K_17 and the top counter bit provably cancel and are fixed to zero.
std::vector<KeyExtraction> phase2_extract(
    const Phase1Candidate& candidate,
    const std::vector<std::uint16_t>& phase1_ipids,
    const std::vector<std::array<std::uint16_t, 2>>& pair_ipids,
    const MeasurementPlan& plan, const Phase2Options& opt = {});

struct WindowsAttackOutcome {
  std::vector<KeyExtraction> keys;  // sorted by (beta0, key), deduped
  // Source emitted globally consecutive IPIDs: only the all-zero key pattern
  // with unit deltas fits, which a keyed source essentially never produces.
  bool counter_like = false;
  Phase1Stats stats;
};

WindowsAttackOutcome extract_windows_key(
    const std::vector<std::uint16_t>& phase1_ipids,
    const std::vector<std::array<std::uint16_t, 2>>& pair_ipids,
    const MeasurementPlan& plan, const PlanMatrices& pre,
    const Phase1Options& p1 = {}, const Phase2Options& p2 = {});

// Longest shared low-bit run (toward K_62) over all extracted keys; 45 when
// they all agree or only one key survived.
int common_tail_bits(const std::vector<KeyExtraction>& keys);

struct DeviceIdResult {
  enum class Status { kNoId, kUnique, kMulti };
  Status status = Status::kNoId;
  int tail_width = 0;
  std::vector<std::uint64_t> ids;  // distinct truncated tails, ascending
};
// Device identifier = low tail_width bits of the key. Multiple surviving
// distinct tails are all reported rather than guessed between.
DeviceIdResult derive_device_id(const std::vector<KeyExtraction>& keys,
                                int tail_width = 41);

// Re-identification against stored extractions without the 2^14 + 2^15 search:
// per stored key, counter-base bits are guessed LSB-first and pruned through
// the pair equation reduced mod 2^n at depth n. Returns indices of stored
// records consistent with the fresh (in-order, loss-free) measurement.
std::vector<std::size_t> fast_track_matches(
    const std::vector<KeyExtraction>& stored,
    const std::vector<std::uint16_t>& phase1_ipids,
    const std::vector<std::array<std::uint16_t, 2>>& pair_ipids,
    const MeasurementPlan& plan);

// Bucket counter value (mod 2^14) right after the observed packet, from one
// (dst, ipid) observation at the same source. Invariant to the K_17 convention.
std::uint16_t predict_counter(const KeyExtraction& extraction, Ipv4 dst,
                              std::uint16_t ipid);

struct WindowsParameters {
  int j = 0, g = 0, q = 0;
  double fp_bound = 0.0;  // 2^-(j-1+q) + 2^-(g-q)
};
// Splits an address budget between the in-class block and the pairs: J grows
// while alpha * J! fits the time budget (work is factorial in J), the rest
// becomes pairs, and q balances the two false-positive terms.
WindowsParameters choose_parameters(int address_budget, double time_budget_seconds,
                                    double alpha);

// Cheap consistency check of a 40-bit key tail (K_23..K_62) against one fresh
// probe pair measured in the same session as (ip0, ipid0): the pair's IPID
// difference is predictable mod 2^9 up to send order. A random unrelated key
// passes with probability about 2/512.
bool verify_key_tail40(std::uint64_t key23_62, std::uint16_t beta0, Ipv4 ip0,
                       std::uint16_t ipid0, const std::array<Ipv4, 2>& probe_ips,
                       const std::array<std::uint16_t, 2>& probe_ipids);

// Order-J-1 fingerprint of any offset+bucket-counter IPID scheme (keyed hash
// need not be linear): in-class IPID deltas mod 2^15 are session-invariant.
std::vector<std::uint16_t> scheme_fingerprint(
    const std::vector<std::uint16_t>& phase1_ipids);

// One-line JSON record {key_tail_hex, tail_width, beta0, offset_secret,
// plan_digest}; the stored-keys file for fast_track_matches appends these.
std::string extraction_to_json(const KeyExtraction& extraction, int tail_width = 45);
KeyExtraction extraction_from_json(const std::string& text, int* tail_width = nullptr);

}  // namespace ipidlab
