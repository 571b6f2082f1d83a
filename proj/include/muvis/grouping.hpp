#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "muvis/partition.hpp"
#include "muvis/phy_channel.hpp"
#include "muvis/rng.hpp"

namespace muvis {

struct RlHyperParams {
  double alpha = 0.1;
  double gamma = 0.9;
  double epsilon0 = 1.0;
  double eps_decay = 0.995;  // multiplicative, per episode
  double eps_min = 0.05;
  int episodes = 5000;
  int epochs_per_episode = 10;
};

struct UserMobility {
  int user_id = 0;
  double correlation = 0.0;
  bool is_mobile = false;
  bool snapshots_missing = false;
};

struct MobilityReport {
  std::vector<UserMobility> users;

  const UserMobility* find(int user_id) const {
    for (const auto& u : users)
      if (u.user_id == user_id) return &u;
    return nullptr;
  }

  bool mobile(int user_id) const {
    const auto* u = find(user_id);
    if (!u) throw std::invalid_argument("MobilityReport: unknown user id");
    return u->is_mobile;
  }
};

struct UserCsiPair {
  int user_id = 0;
  std::optional<CsiSnapshot> prev;
  std::optional<CsiSnapshot> curr;
};

// State vector fed to the learner: previous grouping action, user count,
// per-user stream counts and mobility bits, optional SNR buckets.
struct StateKey {
  int grouping_index = 0;
  int n_users = 0;
  std::vector<int> streams;
  std::vector<int> mobility;
  std::vector<int> snr_buckets;  // empty unless the augmentation is enabled

  // Injective text encoding; doubles as the serialization key.
  std::string str() const {
    std::string out = "g" + std::to_string(grouping_index) + "|n" + std::to_string(n_users) + "|s";
    for (std::size_t i = 0; i < streams.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(streams[i]);
    }
    out += "|m";
    for (int b : mobility) out += b ? '1' : '0';
    if (!snr_buckets.empty()) {
      out += "|b";
      for (int b : snr_buckets) out += std::to_string(b);
    }
    return out;
  }

  auto operator<=>(const StateKey&) const = default;
};

// Action-value store. Unseen states read as all-zero rows.
class QTable {
 public:
  explicit QTable(int n_actions) : n_actions_(n_actions), zeros_(n_actions, 0.0) {
    if (n_actions < 1) throw std::invalid_argument("QTable: n_actions must be >= 1");
  }

  int n_actions() const { return n_actions_; }
  std::size_t n_states() const { return rows_.size(); }

  const std::vector<double>& row(const StateKey& s) const {
    const auto it = rows_.find(s.str());
    return it == rows_.end() ? zeros_ : it->second;
  }

  double value(const StateKey& s, int action) const {
    check_action(action);
    return row(s)[action];
  }

  void set(const StateKey& s, int action, double v) {
    check_action(action);
    if (!std::isfinite(v)) throw std::invalid_argument("QTable: non-finite value");
    auto it = rows_.find(s.str());
    if (it == rows_.end()) it = rows_.emplace(s.str(), zeros_).first;
    it->second[action] = v;
  }

  // Versioned JSON, keys sorted, values at 9 significant digits.
  std::string to_json() const {
    std::string out = "{\"format\":\"muvis-qtable/1\",\"n_actions\":" + std::to_string(n_actions_) +
                      ",\"entries\":{";
    bool first_row = true;
    for (const auto& [key, vals] : rows_) {
      if (!first_row) out += ',';
      first_row = false;
      out += '"' + key + "\":[";
      for (std::size_t i = 0; i < vals.size(); ++i) {
        if (i) out += ',';
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.9g", vals[i]);
        out += buf;
      }
      out += ']';
    }
    out += "}}";
    return out;
  }

  static QTable from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != "muvis-qtable/1")
      throw std::invalid_argument("qtable: unsupported format");
    QTable q(j.at("n_actions").get<int>());
    for (const auto& [key, vals] : j.at("entries").items()) {
      if (static_cast<int>(vals.size()) != q.n_actions_)
        throw std::invalid_argument("qtable: row length mismatch");
      q.rows_[key] = vals.get<std::vector<double>>();
    }
    return q;
  }

  bool operator==(const QTable& other) const {
    return n_actions_ == other.n_actions_ && rows_ == other.rows_;
  }

 private:
  void check_action(int action) const {
    if (action < 0 || action >= n_actions_)
      throw std::invalid_argument("QTable: action index out of range");
  }

  int n_actions_;
  std::vector<double> zeros_;
  std::map<std::string, std::vector<double>> rows_;
};

namespace detail {

// Recursively assigns users (ascending id order) to existing or new groups,
// pruning on the size cap and the per-group stream budget. Blocks come out
// with ascending members and groups ordered by first member.
inline void enumerate_rec(const std::vector<const UserProfile*>& users, std::size_t next,
                          std::vector<std::vector<int>>& groups, std::vector<int>& group_streams,
                          int cap, int n_tx, std::vector<Partition>& out) {
  if (next == users.size()) {
    Partition p;
    p.groups = groups;
    out.push_back(std::move(p));
    return;
  }
  const UserProfile* u = users[next];
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    if (static_cast<int>(groups[gi].size()) >= cap) continue;
    if (group_streams[gi] + u->n_streams > n_tx) continue;
    groups[gi].push_back(u->id);
    group_streams[gi] += u->n_streams;
    enumerate_rec(users, next + 1, groups, group_streams, cap, n_tx, out);
    group_streams[gi] -= u->n_streams;
    groups[gi].pop_back();
  }
  groups.push_back({u->id});
  group_streams.push_back(u->n_streams);
  enumerate_rec(users, next + 1, groups, group_streams, cap, n_tx, out);
  group_streams.pop_back();
  groups.pop_back();
}

}  // namespace detail

// All legal grouping actions in canonical lexicographic order. The
// all-singleton partition always sorts first.
inline std::vector<Partition> enumerate_actions(const std::vector<UserProfile>& users,
                                                const ApConfig& ap) {
  if (users.empty()) throw std::invalid_argument("enumerate_actions: no users");
  for (const auto& u : users)
    if (u.n_streams > ap.n_tx_antennas)
      throw std::invalid_argument("enumerate_actions: user streams exceed N_t, cannot schedule");
  std::vector<const UserProfile*> by_id;
  by_id.reserve(users.size());
  for (const auto& u : users) by_id.push_back(&u);
  std::sort(by_id.begin(), by_id.end(),
            [](const UserProfile* a, const UserProfile* b) { return a->id < b->id; });
  for (std::size_t i = 1; i < by_id.size(); ++i)
    if (by_id[i]->id == by_id[i - 1]->id)
      throw std::invalid_argument("enumerate_actions: duplicate user id");

  const int cap = std::min(ap.max_group_size, 4);
  std::vector<Partition> out;
  std::vector<std::vector<int>> groups;
  std::vector<int> group_streams;
  detail::enumerate_rec(by_id, 0, groups, group_streams, cap, ap.n_tx_antennas, out);
  std::sort(out.begin(), out.end());
  return out;
}

// Movement detection from the two most recent snapshots; a user with an
// incomplete history is conservatively treated as mobile.
inline MobilityReport detect_mobility(const std::vector<UserCsiPair>& history, double threshold) {
  MobilityReport rep;
  for (const auto& h : history) {
    UserMobility m;
    m.user_id = h.user_id;
    if (!h.prev || !h.curr) {
      m.correlation = 0.0;
      m.is_mobile = true;
      m.snapshots_missing = true;
    } else {
      m.correlation = csi_correlation(*h.prev, *h.curr);
      m.is_mobile = m.correlation < threshold;
    }
    rep.users.push_back(m);
  }
  return rep;
}

// Indices of actions that keep every mobile user out of MU groups.
inline std::vector<int> mobility_filter_indices(const std::vector<Partition>& actions,
                                                const MobilityReport& report) {
  if (actions.empty()) throw std::invalid_argument("mobility_filter: empty action list");
  std::vector<int> keep;
  for (std::size_t ai = 0; ai < actions.size(); ++ai) {
    bool ok = true;
    for (const auto& g : actions[ai].groups) {
      if (g.size() < 2) continue;
      for (int id : g) {
        const auto* u = report.find(id);
        if (u && u->is_mobile) {
          ok = false;
          break;
        }
      }
      if (!ok) break;
    }
    if (ok) keep.push_back(static_cast<int>(ai));
  }
  return keep;
}

inline std::vector<Partition> mobility_filter(const std::vector<Partition>& actions,
                                              const MobilityReport& report) {
  std::vector<Partition> out;
  for (int idx : mobility_filter_indices(actions, report)) out.push_back(actions[idx]);
  return out;
}

inline int snr_bucket(double snr_db) { return snr_db < 15.0 ? 0 : (snr_db < 25.0 ? 1 : 2); }

inline StateKey encode_state(int current_partition_index, const std::vector<UserProfile>& users,
                             const MobilityReport& report, bool with_snr_buckets = false) {
  StateKey s;
  s.grouping_index = current_partition_index;
  s.n_users = static_cast<int>(users.size());
  for (const auto& u : users) {
    s.streams.push_back(u.n_streams);
    s.mobility.push_back(report.mobile(u.id) ? 1 : 0);
    if (with_snr_buckets) s.snr_buckets.push_back(snr_bucket(u.base_snr_db));
  }
  return s;
}

// Epsilon-greedy over the legal subset; greedy ties break to the lowest
// action index. epsilon = 0 consumes no randomness.
inline int select_action(const QTable& q, const StateKey& s, double epsilon,
                         const std::vector<int>& legal_actions, Rng& rng) {
  if (legal_actions.empty()) throw std::invalid_argument("select_action: no legal actions");
  if (epsilon > 0.0 && rng.uniform01() < epsilon)
    return legal_actions[rng.uniform_int(legal_actions.size())];
  const auto& row = q.row(s);
  int best = legal_actions.front();
  for (int a : legal_actions)
    if (row[a] > row[best]) best = a;
  return best;
}

// One Bellman backup; the max ranges over the legal actions of s_next only.
inline void q_update(QTable& q, const StateKey& s, int action, double reward,
                     const StateKey& s_next, const std::vector<int>& legal_next,
                     const RlHyperParams& hp) {
  if (!std::isfinite(reward)) throw std::invalid_argument("q_update: non-finite reward");
  if (legal_next.empty()) throw std::invalid_argument("q_update: no legal next actions");
  const auto& next_row = q.row(s_next);
  double best_next = -std::numeric_limits<double>::infinity();
  for (int a : legal_next) best_next = std::max(best_next, next_row[a]);
  const double old = q.value(s, action);
  q.set(s, action, old + hp.alpha * (reward + hp.gamma * best_next - old));
}

// Environment surface the trainer and oracle need: a per-epoch step with a
// throughput reward, the current mobility picture, and a deterministic
// expected-goodput probe that does not advance state.
class Env {
 public:
  virtual ~Env() = default;
  virtual double step(const Partition& action) = 0;
  virtual MobilityReport mobility() const = 0;
  virtual double expected_goodput(const Partition& action) const = 0;
};

struct TrainResult {
  QTable qtable;
  Partition best_partition;
  int best_action_index = 0;
  double best_reward = 0.0;
};

// Tabular Q-learning over the enumerated grouping actions. Returns the
// learned table and the action with the highest observed reward (reward ties
// resolve to the lower canonical index).
inline TrainResult train(Env& env, const std::vector<UserProfile>& users, const ApConfig& ap,
                         const RlHyperParams& hp, Rng& rng, bool with_snr_buckets = false) {
  const auto actions = enumerate_actions(users, ap);
  QTable q(static_cast<int>(actions.size()));

  int prev_idx = 0;  // all-singleton partition sorts first
  double best_r = -std::numeric_limits<double>::infinity();
  int best_idx = prev_idx;

  MobilityReport rep = env.mobility();
  std::vector<int> legal = mobility_filter_indices(actions, rep);
  StateKey s = encode_state(prev_idx, users, rep, with_snr_buckets);

  for (int episode = 0; episode < hp.episodes; ++episode) {
    const double eps = std::max(hp.eps_min, hp.epsilon0 * std::pow(hp.eps_decay, episode));
    for (int t = 0; t < hp.epochs_per_episode; ++t) {
      const int a = select_action(q, s, eps, legal, rng);
      const double r = env.step(actions[a]);
      if (r > best_r || (r == best_r && a < best_idx)) {
        best_r = r;
        best_idx = a;
      }
      const MobilityReport rep_next = env.mobility();
      std::vector<int> legal_next = mobility_filter_indices(actions, rep_next);
      const StateKey s_next = encode_state(a, users, rep_next, with_snr_buckets);
      q_update(q, s, a, r, s_next, legal_next, hp);
      s = s_next;
      legal = std::move(legal_next);
    }
  }
  return {std::move(q), actions[best_idx], best_idx, best_r};
}

// Exhaustive argmax of the deterministic expected goodput over the
// mobility-filtered action list. Ties keep the canonical-order winner.
inline Partition oracle_best(const std::vector<UserProfile>& users, const ApConfig& ap,
                             const Env& env) {
  if (users.size() > 8) throw std::invalid_argument("oracle_best: more than 8 users");
  const auto actions = enumerate_actions(users, ap);
  const auto legal = mobility_filter_indices(actions, env.mobility());
  int best = legal.front();
  double best_v = env.expected_goodput(actions[best]);
  for (std::size_t i = 1; i < legal.size(); ++i) {
    const double v = env.expected_goodput(actions[legal[i]]);
    if (v > best_v) {
      best_v = v;
      best = legal[i];
    }
  }
  return actions[best];
}

enum class BaselineKind { AllSu, GreedySnr, Random };

namespace detail {

// One MU group filled with the highest-SNR eligible users obeying the size
// and stream caps; everyone else rides SU.
inline Partition greedy_snr_partition(const std::vector<UserProfile>& users, const ApConfig& ap,
                                      const std::vector<int>* eligible_ids) {
  std::vector<const UserProfile*> sorted;
  for (const auto& u : users) sorted.push_back(&u);
  std::sort(sorted.begin(), sorted.end(), [](const UserProfile* a, const UserProfile* b) {
    if (a->base_snr_db != b->base_snr_db) return a->base_snr_db > b->base_snr_db;
    return a->id < b->id;
  });
  const int cap = std::min(ap.max_group_size, 4);
  std::vector<int> mu_group;
  int streams = 0;
  for (const auto* u : sorted) {
    if (eligible_ids &&
        std::find(eligible_ids->begin(), eligible_ids->end(), u->id) == eligible_ids->end())
      continue;
    if (static_cast<int>(mu_group.size()) >= cap) continue;
    if (streams + u->n_streams > ap.n_tx_antennas) continue;
    mu_group.push_back(u->id);
    streams += u->n_streams;
  }
  Partition p;
  if (mu_group.size() >= 2) p.groups.push_back(mu_group);
  for (const auto& u : users)
    if (std::find(mu_group.begin(), mu_group.end(), u.id) == mu_group.end() ||
        mu_group.size() < 2)
      p.groups.push_back({u.id});
  p.canonicalize();
  return p;
}

}  // namespace detail

inline Partition baseline_grouping(BaselineKind kind, const std::vector<UserProfile>& users,
                                   const ApConfig& ap, Rng& rng) {
  switch (kind) {
    case BaselineKind::AllSu:
      return all_singletons(users);
    case BaselineKind::GreedySnr:
      return detail::greedy_snr_partition(users, ap, nullptr);
    case BaselineKind::Random: {
      const auto actions = enumerate_actions(users, ap);
      return actions[rng.uniform_int(actions.size())];
    }
  }
  throw std::invalid_argument("baseline_grouping: unknown kind");
}

}  // namespace muvis
