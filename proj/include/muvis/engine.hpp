#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "muvis/abr.hpp"
#include "muvis/config.hpp"
#include "muvis/grouping.hpp"
#include "muvis/mac_sim.hpp"
#include "muvis/partition.hpp"
#include "muvis/phy_channel.hpp"
#include "muvis/rng.hpp"

namespace muvis {

struct EpochUserRecord {
  int user_id = 0;
  Mode mode = Mode::SU;
  double eff_snr_db = 0.0;  // at the epoch midpoint
  int mcs_index = kNoTx;
  double goodput_mbps = 0.0;
  double csi_correlation = 0.0;
  bool is_mobile = false;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  Partition partition;
  double aggregate_mbps = 0.0;
  std::vector<EpochUserRecord> users;  // sorted by user_id
};

struct SegmentRecord {
  int user_id = 0;
  long segment = 0;  // 1-based per user
  int bitrate_idx = kNoBitrate;
  bool lost = false;
  bool switched = false;
  bool underflow = false;
};

struct MetricsReport {
  std::vector<EpochRecord> epochs;
  std::vector<QoeSummary> qoe;          // per user, sorted by user_id
  std::vector<SegmentRecord> segments;  // per-segment event log
  std::uint64_t seed = 0;
  std::string config_digest;
};

// Per-epoch channel/MAC state machine. One instance owns all the randomness
// of a run, so identical (config, seed) pairs replay bit-identically. Also
// serves as the training environment: step() schedules the pending epoch and
// advances the channel.
class Simulation : public Env {
 public:
  Simulation(const SimConfig& cfg, std::uint64_t seed)
      : cfg_(cfg), rng_(seed), actions_(enumerate_actions(cfg.users, cfg.ap)) {
    cfg_.validate();
    prev_csi_.resize(cfg_.users.size());
    curr_csi_.resize(cfg_.users.size());
    for (std::size_t i = 0; i < cfg_.users.size(); ++i)
      curr_csi_[i] = make_initial_csi(cfg_.csi_dim, 0.0, rng_);
    advance_epoch();
  }

  const std::vector<Partition>& actions() const { return actions_; }
  const SimConfig& config() const { return cfg_; }
  Rng& rng() { return rng_; }

  // Index of a partition in the canonical action list; -1 when absent.
  int action_index(const Partition& p) const {
    for (std::size_t i = 0; i < actions_.size(); ++i)
      if (actions_[i] == p) return static_cast<int>(i);
    return -1;
  }

  // Evolves every user's channel by one sounding period and refreshes the
  // mobility picture from the latest snapshot pair.
  void advance_epoch() {
    for (std::size_t i = 0; i < cfg_.users.size(); ++i) {
      prev_csi_[i] = curr_csi_[i];
      curr_csi_[i] = synthesize_csi(curr_csi_[i], cfg_.users[i].speed_mps,
                                    cfg_.ap.sounding_period_ms, cfg_.ap.carrier_ghz, rng_);
    }
    std::vector<UserCsiPair> pairs;
    for (std::size_t i = 0; i < cfg_.users.size(); ++i)
      pairs.push_back({cfg_.users[i].id, prev_csi_[i], curr_csi_[i]});
    mobility_ = detect_mobility(pairs, cfg_.mobility_threshold);
  }

  // Link states for a grouping: the MCS comes from the sounding-time SNR
  // (the AP rate-adapts on sounded CSI), while PER and the reported SNR use
  // the epoch-midpoint staleness. For SU and static users the two coincide.
  std::map<int, LinkState> link_states(const Partition& p) const {
    std::map<int, LinkState> links;
    const double t_mid = cfg_.ap.sounding_period_ms / 2.0;
    for (const auto& g : p.groups) {
      const int k = static_cast<int>(g.size());
      int streams_total = 0;
      for (int id : g) streams_total += user_by_id(id).n_streams;
      for (int id : g) {
        const UserProfile& u = user_by_id(id);
        LinkState ls;
        ls.user_id = id;
        ls.mode = k >= 2 ? Mode::MU : Mode::SU;
        const double snr_sound = effective_snr(u, k, streams_total, 0.0, cfg_.loss);
        ls.eff_snr_db = effective_snr(u, k, streams_total, t_mid, cfg_.loss);
        ls.mcs_index = select_mcs(snr_sound, cfg_.mcs_table, cfg_.loss.margin_db);
        ls.phy_rate_mbps =
            phy_rate(ls.mcs_index, cfg_.ap.bandwidth_mhz, u.n_streams, cfg_.ap.guard,
                     cfg_.mcs_table);
        ls.per = packet_error_rate(ls.eff_snr_db, ls.mcs_index, cfg_.mcs_table, cfg_.loss);
        links[id] = ls;
      }
    }
    return links;
  }

  GoodputReport schedule_report(const Partition& p) const {
    return schedule_epoch(p, link_states(p), cfg_.ap.sounding_period_ms, cfg_.timing);
  }

  double reward_of(const GoodputReport& rep) const {
    if (cfg_.reward == RewardKind::Sum) return rep.aggregate_mbps;
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& [_, g] : rep.user_goodput_mbps) worst = std::min(worst, g);
    return worst;
  }

  // Env surface.
  double step(const Partition& action) override {
    const double r = reward_of(schedule_report(action));
    advance_epoch();
    return r;
  }
  MobilityReport mobility() const override { return mobility_; }
  double expected_goodput(const Partition& action) const override {
    return reward_of(schedule_report(action));
  }

 private:
  const UserProfile& user_by_id(int id) const {
    for (const auto& u : cfg_.users)
      if (u.id == id) return u;
    throw std::invalid_argument("Simulation: unknown user id");
  }

  SimConfig cfg_;
  Rng rng_;
  std::vector<CsiSnapshot> prev_csi_, curr_csi_;
  std::vector<Partition> actions_;
  MobilityReport mobility_;
};

namespace detail {

// Users packed into maximal legal groups in id order; the diagnostic "what
// if we force MU regardless of mobility" arm of the sweeps.
inline Partition packed_mu_partition(const std::vector<UserProfile>& users, const ApConfig& ap) {
  std::vector<const UserProfile*> by_id;
  for (const auto& u : users) by_id.push_back(&u);
  std::sort(by_id.begin(), by_id.end(),
            [](const UserProfile* a, const UserProfile* b) { return a->id < b->id; });
  const int cap = std::min(ap.max_group_size, 4);
  Partition p;
  std::vector<int> group;
  int streams = 0;
  for (const auto* u : by_id) {
    if (static_cast<int>(group.size()) >= cap || streams + u->n_streams > ap.n_tx_antennas) {
      p.groups.push_back(group);
      group.clear();
      streams = 0;
    }
    group.push_back(u->id);
    streams += u->n_streams;
  }
  if (!group.empty()) p.groups.push_back(group);
  p.canonicalize();
  return p;
}

}  // namespace detail

// Full scenario loop: per epoch, advance the channel, pick a grouping from
// the configured policy over the mobility-filtered actions, schedule the
// MAC, then drive every user's ABR session tick by tick.
inline MetricsReport run_sim(const SimConfig& cfg, std::uint64_t seed,
                             const QTable* qtable = nullptr) {
  cfg.validate();
  Simulation sim(cfg, seed);
  const auto& actions = sim.actions();
  if (qtable && qtable->n_actions() != static_cast<int>(actions.size()))
    throw std::runtime_error("qtable action count does not match the scenario");

  MetricsReport report;
  report.seed = seed;
  report.config_digest = config_digest(cfg);

  const int n_users = static_cast<int>(cfg.users.size());
  std::vector<VideoSession> sessions(n_users);
  std::vector<VirtualQueues> queues(n_users);
  std::vector<bool> seg_underflow(n_users, false);
  std::vector<long> seg_counter(n_users, 0);
  for (int i = 0; i < n_users; ++i) sessions[i].user_id = cfg.users[i].id;

  const int all_su_idx = 0;  // canonical order puts all-singletons first
  int prev_idx = all_su_idx;
  const int ticks_per_epoch =
      static_cast<int>(std::llround(cfg.ap.sounding_period_ms / cfg.abr_tick_ms));
  const double tick_s = cfg.abr_tick_ms / 1000.0;

  for (int epoch = 1; epoch <= cfg.duration_epochs; ++epoch) {
    const MobilityReport rep = sim.mobility();
    const auto legal = mobility_filter_indices(actions, rep);

    int chosen = all_su_idx;
    switch (cfg.policy) {
      case Policy::RlTrained: {
        if (qtable) {
          const StateKey s = encode_state(prev_idx, cfg.users, rep, cfg.state_snr_buckets);
          chosen = select_action(*qtable, s, 0.0, legal, sim.rng());
        } else {
          chosen = legal.front();  // untrained table: everything ties low
        }
        break;
      }
      case Policy::Oracle: {
        chosen = legal.front();
        double best = sim.expected_goodput(actions[chosen]);
        for (std::size_t i = 1; i < legal.size(); ++i) {
          const double v = sim.expected_goodput(actions[legal[i]]);
          if (v > best) {
            best = v;
            chosen = legal[i];
          }
        }
        break;
      }
      case Policy::AllSu:
        chosen = all_su_idx;
        break;
      case Policy::GreedySnr: {
        std::vector<int> eligible;
        for (const auto& u : cfg.users)
          if (!rep.mobile(u.id)) eligible.push_back(u.id);
        const Partition p = detail::greedy_snr_partition(cfg.users, cfg.ap, &eligible);
        chosen = sim.action_index(p);
        if (chosen < 0) chosen = all_su_idx;
        break;
      }
      case Policy::Random:
        chosen = legal[sim.rng().uniform_int(legal.size())];
        break;
    }

    const Partition& partition = actions[chosen];
    const GoodputReport good = sim.schedule_report(partition);
    const auto links = sim.link_states(partition);

    EpochRecord er;
    er.epoch = epoch;
    er.partition = partition;
    for (const auto& [uid, ls] : links) {
      EpochUserRecord ur;
      ur.user_id = uid;
      ur.mode = ls.mode;
      ur.eff_snr_db = ls.eff_snr_db;
      ur.mcs_index = ls.mcs_index;
      ur.goodput_mbps = good.user_goodput_mbps.at(uid);
      const auto* m = rep.find(uid);
      ur.csi_correlation = m ? m->correlation : 0.0;
      ur.is_mobile = m ? m->is_mobile : true;
      er.aggregate_mbps += ur.goodput_mbps;
      er.users.push_back(ur);
    }
    report.epochs.push_back(er);

    // ABR phase: per-epoch goodput observation, then fixed-size ticks.
    for (int i = 0; i < n_users; ++i) {
      const int uid = cfg.users[i].id;
      estimate_goodput(sessions[i], good.user_goodput_mbps.at(uid), links.at(uid).mode);
    }
    for (int tick = 0; tick < ticks_per_epoch; ++tick) {
      for (int i = 0; i < n_users; ++i) {
        VideoSession& sess = sessions[i];
        if (sess.in_flight_idx == kNoBitrate &&
            sess.buffer_s <= sess.buffer_cap_s - cfg.ladder.segment_s) {
          const int idx = choose_bitrate(sess, queues[i], cfg.targets, cfg.ladder);
          begin_segment(sess, idx, cfg.ladder);
        }
        const int uid = cfg.users[i].id;
        const double bits = sess.in_flight_idx != kNoBitrate
                                ? good.user_goodput_mbps.at(uid) * cfg.abr_tick_ms * 1000.0
                                : 0.0;
        const SegmentEvents ev =
            advance_session(sess, tick_s, bits, cfg.ladder, cfg.targets.deadline_slack);
        seg_underflow[i] = seg_underflow[i] || ev.underflow;
        if (ev.completed || ev.lost) {
          SegmentEvents merged = ev;
          merged.underflow = seg_underflow[i];
          update_virtual_queues(queues[i], merged, cfg.targets);
          SegmentRecord sr;
          sr.user_id = uid;
          sr.segment = ++seg_counter[i];
          sr.bitrate_idx = ev.bitrate_idx;
          sr.lost = ev.lost;
          sr.switched = ev.switched;
          sr.underflow = merged.underflow;
          report.segments.push_back(sr);
          seg_underflow[i] = false;
        }
      }
    }

    prev_idx = chosen;
    sim.advance_epoch();
  }

  for (int i = 0; i < n_users; ++i) report.qoe.push_back(qoe_summary(sessions[i]));
  std::sort(report.qoe.begin(), report.qoe.end(),
            [](const QoeSummary& a, const QoeSummary& b) { return a.user_id < b.user_id; });
  return report;
}

enum class SweepAxis { NMobile, NLowSnr };

struct SweepRow {
  std::string axis;
  int level = 0;
  std::uint64_t seed = 0;
  std::string arm;  // "mu" or "su"
  double mean_user_throughput_mbps = 0.0;
};

// Paired forced-MU vs all-SU throughput sweep over a degradation axis:
// "n_mobile" sets the first <level> users to 1 m/s, "n_low_snr" drops them
// to 12 dB. ABR is not run; only MAC goodput matters here.
inline std::vector<SweepRow> sweep(const SimConfig& base, SweepAxis axis,
                                   const std::vector<int>& levels,
                                   const std::vector<std::uint64_t>& seeds) {
  base.validate();
  const char* axis_name = axis == SweepAxis::NMobile ? "n_mobile" : "n_low_snr";
  std::vector<SweepRow> rows;
  for (int level : levels) {
    if (level < 0 || level > static_cast<int>(base.users.size()))
      throw std::invalid_argument("sweep: level exceeds user count");
    SimConfig cfg = base;
    for (int i = 0; i < level; ++i) {
      if (axis == SweepAxis::NMobile)
        cfg.users[i].speed_mps = 1.0;
      else
        cfg.users[i].base_snr_db = 12.0;
    }
    const Partition mu_arm = detail::packed_mu_partition(cfg.users, cfg.ap);
    const Partition su_arm = all_singletons(cfg.users);
    for (std::uint64_t seed : seeds) {
      for (const auto& [arm_name, partition] :
           {std::pair<const char*, const Partition*>{"mu", &mu_arm}, {"su", &su_arm}}) {
        Simulation sim(cfg, seed);
        double total = 0.0;
        for (int e = 0; e < cfg.duration_epochs; ++e) {
          const GoodputReport rep = sim.schedule_report(*partition);
          for (const auto& [_, g] : rep.user_goodput_mbps) total += g;
          sim.advance_epoch();
        }
        SweepRow row;
        row.axis = axis_name;
        row.level = level;
        row.seed = seed;
        row.arm = arm_name;
        row.mean_user_throughput_mbps =
            total / (static_cast<double>(cfg.duration_epochs) * cfg.users.size());
        rows.push_back(row);
      }
    }
  }
  return rows;
}

}  // namespace muvis
