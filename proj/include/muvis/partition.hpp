#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "muvis/phy_channel.hpp"

namespace muvis {

// A grouping action: disjoint user-id groups covering all users. Size-1
// groups are SU, larger ones MU. Canonical form sorts members ascending and
// groups by smallest member.
struct Partition {
  std::vector<std::vector<int>> groups;

  void canonicalize() {
    for (auto& g : groups) std::sort(g.begin(), g.end());
    std::sort(groups.begin(), groups.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
  }

  // Canonical text form, e.g. "[0,2][1]".
  std::string str() const {
    std::string out;
    for (const auto& g : groups) {
      out += '[';
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(g[i]);
      }
      out += ']';
    }
    return out;
  }

  // Index of the group containing user_id, or -1.
  int group_index_of(int user_id) const {
    for (std::size_t gi = 0; gi < groups.size(); ++gi)
      for (int id : groups[gi])
        if (id == user_id) return static_cast<int>(gi);
    return -1;
  }

  Mode mode_of(int user_id) const {
    const int gi = group_index_of(user_id);
    if (gi < 0) throw std::invalid_argument("mode_of: user not in partition");
    return groups[gi].size() >= 2 ? Mode::MU : Mode::SU;
  }

  bool operator==(const Partition& other) const { return groups == other.groups; }
  bool operator<(const Partition& other) const { return groups < other.groups; }
};

inline Partition all_singletons(const std::vector<UserProfile>& users) {
  Partition p;
  for (const auto& u : users) p.groups.push_back({u.id});
  p.canonicalize();
  return p;
}

// Enforces the grouping invariants: exact cover of the user set, group size
// within min(max_group_size, 4), and per-group stream sum within N_t.
inline void validate_partition(const Partition& p, const std::vector<UserProfile>& users,
                               const ApConfig& ap) {
  const int cap = std::min(ap.max_group_size, 4);
  std::vector<int> seen;
  for (const auto& g : p.groups) {
    if (g.empty()) throw std::invalid_argument("partition: empty group");
    if (static_cast<int>(g.size()) > cap)
      throw std::invalid_argument("partition: group exceeds size cap");
    int streams = 0;
    for (int id : g) {
      const auto it = std::find_if(users.begin(), users.end(),
                                   [id](const UserProfile& u) { return u.id == id; });
      if (it == users.end()) throw std::invalid_argument("partition: unknown user id");
      streams += it->n_streams;
      seen.push_back(id);
    }
    if (streams > ap.n_tx_antennas)
      throw std::invalid_argument("partition: group stream sum exceeds N_t");
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
    throw std::invalid_argument("partition: user appears in multiple groups");
  if (seen.size() != users.size())
    throw std::invalid_argument("partition: does not cover all users");
}

}  // namespace muvis
