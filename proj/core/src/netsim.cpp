#include "ipidlab/netsim.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "ipidlab/rng.hpp"

namespace ipidlab {
namespace {

constexpr std::uint64_t kTagLinuxSession = 0x5e55;

bool contains(const std::vector<int>& v, int x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

}  // namespace

BurstSchedule BurstSchedule::chrome() {
  return {{0.0, 0.25, 0.75, 1.75, 3.75, 7.75, 15.75, 23.75, 31.75}, 0.6};
}

BurstSchedule BurstSchedule::analysis_pair() { return {{3.75, 7.75}, 0.6}; }

PacketTrace simulate_windows_session(WindowsDevice& device,
                                     const MeasurementPlan& plan,
                                     const WindowsSessionOptions& options) {
  const int j_count = plan.j_count();
  const int g_count = plan.g_count();

  std::vector<int> slot_payload(j_count);
  if (options.permutation.empty()) {
    for (int p = 0; p < j_count; ++p) slot_payload[p] = p;
  } else {
    if (static_cast<int>(options.permutation.size()) != j_count)
      throw std::invalid_argument("permutation size does not match plan");
    std::vector<bool> seen(j_count, false);
    for (int p = 0; p < j_count; ++p) {
      const int slot = options.permutation[p];
      if (slot >= j_count || seen[slot])
        throw std::invalid_argument("not a permutation of the send slots");
      seen[slot] = true;
      slot_payload[slot] = p;
    }
  }

  auto events = options.interference;
  std::sort(events.begin(), events.end(),
            [](const auto& a, const auto& b) { return a.when < b.when; });
  std::size_t next_event = 0;

  PacketTrace trace;
  double t = 0;
  auto flush_events = [&](double now) {
    while (next_event < events.size() && events[next_event].when <= now) {
      device.bump_bucket(events[next_event].bucket);
      ++next_event;
    }
  };
  auto send = [&](Ipv4 dst, bool first_copy_lost) {
    flush_events(t);
    if (first_copy_lost)
      trace.push_back({dst, device.generate(dst), t, t, -1, true});
    trace.push_back({dst, device.generate(dst), t, t, -1, false});
    t += options.spacing;
  };

  for (int slot = 0; slot < j_count; ++slot) {
    const int payload = slot_payload[slot];
    send(plan.phase1_ips[payload], contains(options.drops, payload));
  }
  for (int g = 0; g < g_count; ++g) {
    const int first = contains(options.swapped_pairs, g) ? 1 : 0;
    send(plan.pairs[g][first], false);
    send(plan.pairs[g][1 - first], false);
  }
  flush_events(std::numeric_limits<double>::infinity());
  return trace;
}

PacketTrace inject_interference(const WindowsDeviceConfig& device_config,
                                const MeasurementPlan& plan,
                                const WindowsSessionOptions& options,
                                std::uint32_t bucket, double when) {
  WindowsDevice device(device_config);
  WindowsSessionOptions opts = options;
  opts.interference.push_back({bucket, when});
  return simulate_windows_session(device, plan, opts);
}

std::vector<std::uint16_t> windows_phase1_ipids(const PacketTrace& trace,
                                                const MeasurementPlan& plan) {
  std::vector<std::uint16_t> out;
  out.reserve(plan.j_count());
  for (const auto& ip : plan.phase1_ips) {
    bool found = false;
    for (const auto& rec : trace) {
      if (!rec.dropped && rec.dst == ip) {
        out.push_back(rec.ipid);
        found = true;
        break;
      }
    }
    if (!found) throw std::invalid_argument("trace is missing " + to_string(ip));
  }
  return out;
}

std::vector<std::array<std::uint16_t, 2>> windows_pair_ipids(
    const PacketTrace& trace, const MeasurementPlan& plan) {
  std::vector<std::array<std::uint16_t, 2>> out;
  out.reserve(plan.g_count());
  for (const auto& pair : plan.pairs) {
    std::array<std::uint16_t, 2> ipids{};
    for (int side = 0; side < 2; ++side) {
      bool found = false;
      for (const auto& rec : trace) {
        if (!rec.dropped && rec.dst == pair[side]) {
          ipids[side] = rec.ipid;
          found = true;
          break;
        }
      }
      if (!found)
        throw std::invalid_argument("trace is missing " + to_string(pair[side]));
    }
    out.push_back(ipids);
  }
  return out;
}

PacketTrace simulate_linux_session(LinuxDevice& device,
                                   const std::vector<Ipv4>& dst_list,
                                   const BurstSchedule& schedule,
                                   const NetworkModel& model,
                                   const LinuxSessionOptions& options) {
  if (!std::is_sorted(dst_list.begin(), dst_list.end()))
    throw std::invalid_argument("destinations must be in ascending order");
  if (!std::is_sorted(schedule.offsets.begin(), schedule.offsets.end()) ||
      schedule.offsets.empty())
    throw std::invalid_argument("burst offsets must be increasing");
  if (model.loss_rate < 0 || model.loss_rate >= 1 || model.jitter_sigma < 0)
    throw std::invalid_argument("bad network model");

  const int count = static_cast<int>(dst_list.size());
  struct Slot {
    double t_send;
    int burst;
    int index;
  };
  // Early bursts can overlap in time; the device sees one global send order.
  std::vector<Slot> slots;
  slots.reserve(schedule.offsets.size() * dst_list.size());
  for (std::size_t b = 0; b < schedule.offsets.size(); ++b)
    for (int i = 0; i < count; ++i)
      slots.push_back({schedule.offsets[b] + schedule.burst_duration * i / count,
                       static_cast<int>(b), i});
  std::stable_sort(slots.begin(), slots.end(),
                   [](const Slot& a, const Slot& b) { return a.t_send < b.t_send; });

  Rng rng = Rng(model.seed).fork(kTagLinuxSession);
  PacketTrace trace;
  trace.reserve(slots.size());
  for (const auto& slot : slots) {
    const Ipv4 dst = dst_list[slot.index];
    std::uint16_t ipid = device.generate(dst, device.ticks_at(slot.t_send));
    bool lost = rng.chance(model.loss_rate);
    if (options.chunk_drop && options.chunk_drop->first == slot.burst &&
        slot.index < options.chunk_drop->second * count)
      lost = true;
    if (options.ipid_rewrite) ipid = static_cast<std::uint16_t>(rng.bits(16));
    const double jitter = model.jitter_sigma > 0 ? rng.normal(0, model.jitter_sigma) : 0;
    trace.push_back({dst, ipid, slot.t_send, slot.t_send + jitter, slot.burst, lost});
  }
  return trace;
}

}  // namespace ipidlab
