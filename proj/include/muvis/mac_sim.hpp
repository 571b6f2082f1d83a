#pragma once

#include <map>
#include <stdexcept>
#include <vector>

#include "muvis/partition.hpp"
#include "muvis/phy_channel.hpp"

namespace muvis {

struct TimingParams {
  double t_ndpa_ms = 0.1;
  double t_ndp_ms = 0.1;
  double t_report_ms = 0.5;
  double t_poll_ms = 0.05;
};

struct GoodputReport {
  std::map<int, double> user_goodput_mbps;    // keyed by user id
  std::vector<double> group_airtime_fraction;  // per group, partition order
  double overhead_ms = 0.0;
  double epoch_ms = 0.0;
  double aggregate_mbps = 0.0;
};

// NDPA + NDP + k reports + (k-1) polls.
inline double sounding_overhead(int group_size, const TimingParams& t) {
  if (group_size < 1) throw std::invalid_argument("sounding_overhead: group_size must be >= 1");
  return t.t_ndpa_ms + t.t_ndp_ms + group_size * t.t_report_ms + (group_size - 1) * t.t_poll_ms;
}

// One sounding round per group per epoch; the remaining data time is shared
// equally across groups, and every member of an MU group transmits
// concurrently for its group's whole share.
inline GoodputReport schedule_epoch(const Partition& partition,
                                    const std::map<int, LinkState>& links, double epoch_ms,
                                    const TimingParams& t) {
  if (partition.groups.empty()) throw std::invalid_argument("schedule_epoch: empty partition");
  std::vector<int> seen;
  double overhead = 0.0;
  for (const auto& g : partition.groups) {
    if (g.empty()) throw std::invalid_argument("schedule_epoch: empty group");
    overhead += sounding_overhead(static_cast<int>(g.size()), t);
    for (int id : g) {
      if (links.find(id) == links.end())
        throw std::invalid_argument("schedule_epoch: missing link state for user");
      seen.push_back(id);
    }
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
    throw std::invalid_argument("schedule_epoch: user appears in multiple groups");
  if (overhead >= epoch_ms)
    throw std::invalid_argument("schedule_epoch: sounding overhead >= epoch");

  GoodputReport rep;
  rep.overhead_ms = overhead;
  rep.epoch_ms = epoch_ms;
  const double data_ms = epoch_ms - overhead;
  const double share_ms = data_ms / partition.groups.size();
  for (const auto& g : partition.groups) {
    rep.group_airtime_fraction.push_back(share_ms / epoch_ms);
    for (int id : g) {
      const LinkState& link = links.at(id);
      const double goodput = link.phy_rate_mbps * (1.0 - link.per) * (share_ms / epoch_ms);
      rep.user_goodput_mbps[id] = goodput;
      rep.aggregate_mbps += goodput;
    }
  }
  return rep;
}

}  // namespace muvis
