#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ipidlab/ipv4.hpp"
#include "ipidlab/linux_device.hpp"
#include "ipidlab/windows_attack.hpp"
#include "ipidlab/windows_device.hpp"

namespace ipidlab {

struct TraceRecord {
  Ipv4 dst;
  std::uint16_t ipid = 0;
  double t_send = 0;
  double t_arrive = 0;
  int burst = -1;     // schedule index for Linux sessions, -1 for Windows
  bool dropped = false;
};
using PacketTrace = std::vector<TraceRecord>;

struct NetworkModel {
  double jitter_sigma = 0.1;  // seconds, Gaussian per-packet
  double loss_rate = 0.01;
  std::uint64_t seed = 1;
};

struct BurstSchedule {
  std::vector<double> offsets;   // burst start times, strictly increasing
  double burst_duration = 0.6;   // packets of one burst spread across this

  // Chrome's nine STUN bursts; the analysis bursts are the 3.75/7.75 pair,
  // far enough apart that jitter cannot confuse them.
  static BurstSchedule chrome();
  // Just the two analysis bursts, for distribution studies.
  static BurstSchedule analysis_pair();
};

struct InterferenceEvent {
  std::uint32_t bucket = 0;
  double when = 0;  // seconds into the session
};

struct WindowsSessionOptions {
  // payload index -> transmission slot for the first block; empty = in-order
  std::vector<std::uint8_t> permutation;
  // payload indices whose first transmission is lost; the retransmission
  // lands in the same slot, one counter tick later
  std::vector<int> drops;
  // foreign same-bucket activity applied at the given instants
  std::vector<InterferenceEvent> interference;
  // pair indices transmitted second-element-first
  std::vector<int> swapped_pairs;
  double spacing = 0.001;  // seconds between consecutive packets
};

// One packet per plan address: the J-block in (possibly permuted) slot order,
// then each pair back to back. Lost packets stay in the trace flagged
// dropped, with the retransmission following immediately.
PacketTrace simulate_windows_session(WindowsDevice& device,
                                     const MeasurementPlan& plan,
                                     const WindowsSessionOptions& options = {});

// Re-synthesizes the same session on a fresh device with one foreign bucket
// increment added at the given instant.
PacketTrace inject_interference(const WindowsDeviceConfig& device_config,
                                const MeasurementPlan& plan,
                                const WindowsSessionOptions& options,
                                std::uint32_t bucket, double when);

// Slice an observed Windows trace back into attack inputs, matching records
// to plan addresses (dropped records were never received and are skipped).
std::vector<std::uint16_t> windows_phase1_ipids(const PacketTrace& trace,
                                                const MeasurementPlan& plan);
std::vector<std::array<std::uint16_t, 2>> windows_pair_ipids(
    const PacketTrace& trace, const MeasurementPlan& plan);

struct LinuxSessionOptions {
  // Drop this fraction of the head of one burst (models a lost chunk).
  std::optional<std::pair<int, double>> chunk_drop;
  // Middlebox rewriting IPIDs to garbage; used to exercise retest signaling.
  bool ipid_rewrite = false;
};

// Chrome-style measurement: per burst, one packet per destination in
// ascending address order, spread evenly across the burst duration. Loss is
// Bernoulli per packet, arrival jitter Gaussian.
PacketTrace simulate_linux_session(LinuxDevice& device,
                                   const std::vector<Ipv4>& dst_list,
                                   const BurstSchedule& schedule,
                                   const NetworkModel& model,
                                   const LinuxSessionOptions& options = {});

}  // namespace ipidlab
