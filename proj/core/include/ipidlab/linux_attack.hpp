#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ipidlab/ipv4.hpp"
#include "ipidlab/kaslr.hpp"
#include "ipidlab/linux_device.hpp"
#include "ipidlab/netsim.hpp"

namespace ipidlab {

class Rng;

struct BurstObservation {
  int label = -1;
  std::vector<TraceRecord> records;
};

struct BurstSplit {
  std::vector<BurstObservation> bursts;  // one per schedule offset
  int primary = -1;    // analysis burst indices; -1 when retest is set
  int secondary = -1;
  bool retest = false;
  std::string reason;
};

// Assigns received records to the nearest burst window by arrival time and
// picks the two analysis bursts (the 3.75s/7.75s pair when present, with a
// one-earlier fallback if the first is mostly missing). A mostly-missing
// selection in both late bursts signals a retest.
BurstSplit split_bursts(const PacketTrace& trace, const BurstSchedule& schedule,
                        std::size_t expected_per_burst);

struct CandidatePair {
  Ipv4 lo, hi;              // ordered by address
  std::uint16_t delta = 0;  // (ipid_hi - ipid_lo) mod 2^16
};

// Pairs whose IPID difference fits inside one burst's worth of counter
// advance: 0 < delta < f*delta_l + 10. Addresses are scanned in IPID order so
// the cost is records + matches, not records^2. both_directions also accepts
// the window in reverse, for traces whose emission order is unknown.
std::vector<CandidatePair> collect_candidates(const BurstObservation& burst, int f,
                                              double delta_l,
                                              bool both_directions = false);

struct CollisionPair {
  Ipv4 lo, hi;
};

// Pairs surviving both bursts; false pairs rarely repeat across bursts 4s
// apart, true (same-bucket) pairs always do.
std::vector<CollisionPair> intersect_bursts(const std::vector<CandidatePair>& a,
                                            const std::vector<CandidatePair>& b);

struct KeySearchConfig {
  LinuxFlavor flavor = LinuxFlavor::kA2;
  int w_log2 = 32;
  int nu = 11;
  int f = 300;
  double delta_l = 0.6;
  int m = 2048;
  Ipv4 src = Ipv4{0xc6336417u};
  std::uint8_t protocol = 17;
  // A3 only: how namespace-mix words map to kernel displacement slots.
  Arch arch = Arch::kX64;
  int rho = 6;
  std::uint64_t init_net_offset = 0x1553c80;
  // Optional sub-range [begin, end) of the 2^w_log2 space; end 0 = full.
  std::uint64_t range_begin = 0;
  std::uint64_t range_end = 0;
};

enum class SearchStatus { kOk, kTooFewPairs, kNoKey, kAmbiguous };

struct AcceptedKey {
  std::uint64_t key = 0;     // whole searched word (slot||key32 for A3)
  std::uint32_t key32 = 0;
  std::uint32_t g_net = 0;   // 0 unless A3
  int matched = 0;           // pairs colliding under this key
};

struct SearchResult {
  SearchStatus status = SearchStatus::kNoKey;
  std::vector<AcceptedKey> accepted;  // ascending by key
  std::uint64_t keys_scanned = 0;
  double elapsed_seconds = 0;
};

// A3 keys concatenate a kernel displacement slot with the 32-bit key; the
// namespace-mix word is derived from the slot, not searched independently.
std::uint32_t g_net_of_slot(const KeySearchConfig& config, std::uint32_t slot);
std::uint32_t bucket_of(const KeySearchConfig& config, Ipv4 dst, std::uint64_t key);

// Every key whose collision count over the pair set reaches nu. Requires
// |pairs| >= nu. Status: kOk for exactly one accepted key, kAmbiguous for
// more, kNoKey for none (retest).
SearchResult exhaustive_search(const std::vector<CollisionPair>& pairs,
                               const KeySearchConfig& config);

// Partition contract: scanning [begin, end) and merging equals one full scan.
// Returns raw accepted keys without status interpretation.
std::vector<AcceptedKey> search_range(const std::vector<CollisionPair>& pairs,
                                      const KeySearchConfig& config,
                                      std::uint64_t begin, std::uint64_t end);

// A3 decomposed per displacement slot (outer) over 32-bit keys (inner);
// accepted set is identical to the flat concatenated-space scan.
SearchResult nested_search(const std::vector<CollisionPair>& pairs,
                           const KeySearchConfig& config);

// Tries previously seen keys first; on a cache hit returns without scanning,
// otherwise falls through to the full search and appends a unique result.
SearchResult cached_search(const std::vector<CollisionPair>& pairs,
                           const KeySearchConfig& config,
                           std::vector<std::uint64_t>& seen_keys);

struct ProbeSet {
  std::vector<std::array<Ipv4, 2>> pairs;  // collide pairwise under the key
};
ProbeSet build_probe_set(const KeySearchConfig& config, std::uint64_t key,
                         int pair_count, Rng& rng);

// Checks a single fresh burst against a known key's probe set: true when at
// least min_matches probe pairs show the in-burst IPID window. Throws if the
// probe set does not actually collide under the key.
bool targeted_reidentify(const KeySearchConfig& config, std::uint64_t key,
                         const ProbeSet& probe, const BurstObservation& burst,
                         int min_matches = 5);

struct ParameterChoice {
  int l = 0;
  int nu = 0;
  double fp = 0;
  double fn = 0;
  double lambda = 0;  // expected true collision pairs at the chosen l
};

// Scans round L (50..1000 step 50) and nu (1..30) against the analytic
// birthday/binomial model; returns the smallest L whose best nu pushes
// FP+FN under the target.
ParameterChoice optimal_parameters(int f, int m, int w_log2, double delta_t = 4.0,
                                   double loss = 0.0, double target = 1e-6);

struct FpFnEstimate {
  std::vector<double> p_a;   // |U| distribution
  std::vector<double> p_t;   // true-pairs-in-U distribution
  double mean_pairs = 0;     // E(P)
  double sd_pairs = 0;
  double fp = 0;             // plug-in over p_a
  double fn_empirical = 0;   // mass of p_t below nu
  double fn_fitted = 0;      // Poisson tail at the fitted true-pair mean
  int best_nu = 0;           // argmin of fitted fp+fn over nu
};

// Monte-Carlo over full synthetic sessions (device, bursts, loss) feeding the
// real collection pipeline. The absolute 1e-8 tails are out of desk-scale
// reach; the fitted tail and the nu-optimum location are the testable part.
FpFnEstimate simulate_fp_fn(int l, int nu, int f, double loss, int runs,
                            std::uint64_t seed, int w_log2 = 48, int m = 2048);

// Average search time model: seconds-per-key-pair * keyspace * expected pairs.
double estimate_attack_time(double r_seconds, int w_log2, double expected_pairs);

}  // namespace ipidlab
