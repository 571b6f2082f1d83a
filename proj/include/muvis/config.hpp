#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "muvis/abr.hpp"
#include "muvis/grouping.hpp"
#include "muvis/mac_sim.hpp"
#include "muvis/phy_channel.hpp"

namespace muvis {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Policy { RlTrained, Oracle, AllSu, GreedySnr, Random };
enum class RewardKind { Sum, MinUser };

inline const char* policy_name(Policy p) {
  switch (p) {
    case Policy::RlTrained: return "rl_trained";
    case Policy::Oracle: return "oracle";
    case Policy::AllSu: return "all_su";
    case Policy::GreedySnr: return "greedy_snr";
    case Policy::Random: return "random";
  }
  return "?";
}

struct SimConfig {
  ApConfig ap;
  std::vector<UserProfile> users;
  TimingParams timing;
  McsTable mcs_table = McsTable::standard();
  LossModel loss;
  RlHyperParams rl;
  BitrateLadder ladder;
  QoeTargets targets;
  Policy policy = Policy::Oracle;
  int duration_epochs = 100;
  double abr_tick_ms = 10.0;
  std::uint64_t seed = 0;
  bool seed_in_config = false;  // whether the scenario file pinned a seed
  int csi_dim = 16;
  double mobility_threshold = 0.9;
  RewardKind reward = RewardKind::Sum;
  bool state_snr_buckets = false;

  void validate() const;
};

namespace detail {

using json = nlohmann::json;

[[noreturn]] inline void cfg_fail(const std::string& msg) { throw ConfigError(msg); }

inline void check_keys(const json& obj, const std::string& path,
                       const std::set<std::string>& allowed) {
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key))
      cfg_fail(path.empty() ? "unknown key \"" + key + "\""
                            : path + ": unknown key \"" + key + "\"");
}

inline std::string join_path(const std::string& path, const char* key) {
  return path.empty() ? key : path + "." + key;
}

inline double get_num(const json& obj, const std::string& path, const char* key, double dflt) {
  if (!obj.contains(key)) return dflt;
  const auto& v = obj.at(key);
  if (!v.is_number()) cfg_fail(join_path(path, key) + " must be a number");
  return v.get<double>();
}

inline int get_int(const json& obj, const std::string& path, const char* key, int dflt) {
  if (!obj.contains(key)) return dflt;
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) cfg_fail(join_path(path, key) + " must be an integer");
  return v.get<int>();
}

inline bool get_bool(const json& obj, const std::string& path, const char* key, bool dflt) {
  if (!obj.contains(key)) return dflt;
  const auto& v = obj.at(key);
  if (!v.is_boolean()) cfg_fail(join_path(path, key) + " must be a boolean");
  return v.get<bool>();
}

inline std::string get_str(const json& obj, const std::string& path, const char* key,
                           const std::string& dflt) {
  if (!obj.contains(key)) return dflt;
  const auto& v = obj.at(key);
  if (!v.is_string()) cfg_fail(join_path(path, key) + " must be a string");
  return v.get<std::string>();
}

}  // namespace detail

inline void SimConfig::validate() const {
  using detail::cfg_fail;
  if (ap.n_tx_antennas < 1 || ap.n_tx_antennas > 8) cfg_fail("ap.n_tx_antennas out of [1,8]");
  if (ap.bandwidth_mhz != 20 && ap.bandwidth_mhz != 40 && ap.bandwidth_mhz != 80 &&
      ap.bandwidth_mhz != 160)
    cfg_fail("ap.bandwidth_mhz must be one of 20/40/80/160");
  if (ap.max_group_size < 1) cfg_fail("ap.max_group_size must be >= 1");
  if (ap.sounding_period_ms <= 0.0) cfg_fail("ap.sounding_period_ms must be > 0");
  if (ap.carrier_ghz <= 0.0) cfg_fail("ap.carrier_ghz must be > 0");
  if (users.empty()) cfg_fail("users must not be empty");
  std::set<int> ids;
  for (std::size_t i = 0; i < users.size(); ++i) {
    const auto& u = users[i];
    const std::string path = "users[" + std::to_string(i) + "]";
    if (!ids.insert(u.id).second) cfg_fail(path + ".id duplicates another user");
    if (u.base_snr_db < -10.0 || u.base_snr_db > 60.0)
      cfg_fail(path + ".base_snr_db out of [-10,60]");
    if (u.speed_mps < 0.0) cfg_fail(path + ".speed_mps must be >= 0");
    if (u.n_rx_antennas < 1) cfg_fail(path + ".n_rx_antennas must be >= 1");
    if (u.n_streams < 1 || u.n_streams > u.n_rx_antennas)
      cfg_fail(path + ".n_streams out of [1,n_rx_antennas]");
  }
  if (timing.t_ndpa_ms < 0 || timing.t_ndp_ms < 0 || timing.t_report_ms < 0 ||
      timing.t_poll_ms < 0)
    cfg_fail("timing durations must be >= 0");
  try {
    mcs_table.validate();
  } catch (const std::exception& e) {
    cfg_fail(std::string("mcs_table: ") + e.what());
  }
  if (loss.eta_db < 0) cfg_fail("loss_model.eta_db must be >= 0");
  if (loss.c_stale_db_per_m < 0) cfg_fail("loss_model.c_stale_db_per_m must be >= 0");
  if (loss.stale_cap_db < 0) cfg_fail("loss_model.stale_cap_db must be >= 0");
  if (loss.k_per <= 0) cfg_fail("loss_model.k_per must be > 0");
  if (loss.margin_db < 0) cfg_fail("loss_model.margin_db must be >= 0");
  if (rl.alpha <= 0.0 || rl.alpha > 1.0) cfg_fail("rl.alpha out of (0,1]");
  if (rl.gamma < 0.0 || rl.gamma > 1.0) cfg_fail("rl.gamma out of [0,1]");
  if (rl.epsilon0 < 0.0 || rl.epsilon0 > 1.0) cfg_fail("rl.epsilon0 out of [0,1]");
  if (rl.eps_min < 0.0 || rl.eps_min > 1.0) cfg_fail("rl.eps_min out of [0,1]");
  if (rl.eps_decay <= 0.0 || rl.eps_decay > 1.0) cfg_fail("rl.eps_decay out of (0,1]");
  if (rl.episodes < 1) cfg_fail("rl.episodes must be >= 1");
  if (rl.epochs_per_episode < 1) cfg_fail("rl.epochs_per_episode must be >= 1");
  try {
    ladder.validate();
  } catch (const std::exception& e) {
    cfg_fail(std::string("ladder: ") + e.what());
  }
  if (targets.rho_loss < 0.0 || targets.rho_loss > 1.0) cfg_fail("targets.rho_loss out of [0,1]");
  if (targets.rho_und < 0.0 || targets.rho_und > 1.0) cfg_fail("targets.rho_und out of [0,1]");
  if (targets.rho_sw < 0.0 || targets.rho_sw > 1.0) cfg_fail("targets.rho_sw out of [0,1]");
  if (targets.v <= 0.0) cfg_fail("targets.v must be > 0");
  if (targets.deadline_slack < 0.0) cfg_fail("targets.deadline_slack must be >= 0");
  if (duration_epochs < 1) cfg_fail("duration_epochs must be >= 1");
  if (abr_tick_ms <= 0.0) cfg_fail("abr_tick_ms must be > 0");
  const double ratio = ap.sounding_period_ms / abr_tick_ms;
  if (std::abs(ratio - std::round(ratio)) > 1e-9)
    cfg_fail("abr_tick_ms must divide ap.sounding_period_ms");
  if (csi_dim < 1) cfg_fail("csi_dim must be >= 1");
  if (mobility_threshold < 0.0 || mobility_threshold > 1.0)
    cfg_fail("mobility_threshold out of [0,1]");
}

// Strict scenario ingestion: unknown keys are rejected, missing optional
// fields take the documented defaults, and every invariant is checked with a
// message naming the offending field.
inline SimConfig parse_config(const std::string& text) {
  using namespace detail;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    cfg_fail(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) cfg_fail("top level must be an object");
  check_keys(j, "", {"ap", "users", "timing", "mcs_table", "loss_model", "rl", "ladder",
                     "targets", "policy", "duration_epochs", "abr_tick_ms", "seed", "csi_dim",
                     "mobility_threshold", "reward", "state_snr_buckets"});
  SimConfig c;

  if (!j.contains("ap")) cfg_fail("missing required key \"ap\"");
  {
    const auto& a = j.at("ap");
    if (!a.is_object()) cfg_fail("ap must be an object");
    check_keys(a, "ap", {"n_tx_antennas", "bandwidth_mhz", "max_group_size", "sounding_period_ms",
                         "carrier_ghz", "guard"});
    c.ap.n_tx_antennas = get_int(a, "ap", "n_tx_antennas", c.ap.n_tx_antennas);
    c.ap.bandwidth_mhz = get_int(a, "ap", "bandwidth_mhz", c.ap.bandwidth_mhz);
    c.ap.max_group_size = get_int(a, "ap", "max_group_size", c.ap.max_group_size);
    c.ap.sounding_period_ms = get_num(a, "ap", "sounding_period_ms", c.ap.sounding_period_ms);
    c.ap.carrier_ghz = get_num(a, "ap", "carrier_ghz", c.ap.carrier_ghz);
    const std::string g = get_str(a, "ap", "guard", "long");
    if (g == "long")
      c.ap.guard = Guard::Long;
    else if (g == "short")
      c.ap.guard = Guard::Short;
    else
      cfg_fail("ap.guard must be \"long\" or \"short\"");
  }

  if (!j.contains("users")) cfg_fail("missing required key \"users\"");
  {
    const auto& arr = j.at("users");
    if (!arr.is_array()) cfg_fail("users must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto& uj = arr[i];
      const std::string path = "users[" + std::to_string(i) + "]";
      if (!uj.is_object()) cfg_fail(path + " must be an object");
      check_keys(uj, path, {"id", "base_snr_db", "speed_mps", "n_rx_antennas", "n_streams"});
      UserProfile u;
      u.id = get_int(uj, path, "id", static_cast<int>(i));
      u.base_snr_db = get_num(uj, path, "base_snr_db", 35.0);
      u.speed_mps = get_num(uj, path, "speed_mps", 0.0);
      u.n_rx_antennas = get_int(uj, path, "n_rx_antennas", 1);
      u.n_streams = get_int(uj, path, "n_streams", 1);
      c.users.push_back(u);
    }
  }

  if (j.contains("timing")) {
    const auto& t = j.at("timing");
    if (!t.is_object()) cfg_fail("timing must be an object");
    check_keys(t, "timing", {"t_ndpa_ms", "t_ndp_ms", "t_report_ms", "t_poll_ms"});
    c.timing.t_ndpa_ms = get_num(t, "timing", "t_ndpa_ms", c.timing.t_ndpa_ms);
    c.timing.t_ndp_ms = get_num(t, "timing", "t_ndp_ms", c.timing.t_ndp_ms);
    c.timing.t_report_ms = get_num(t, "timing", "t_report_ms", c.timing.t_report_ms);
    c.timing.t_poll_ms = get_num(t, "timing", "t_poll_ms", c.timing.t_poll_ms);
  }

  if (j.contains("mcs_table")) {
    const auto& arr = j.at("mcs_table");
    if (!arr.is_array()) cfg_fail("mcs_table must be an array");
    c.mcs_table.entries.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto& ej = arr[i];
      const std::string path = "mcs_table[" + std::to_string(i) + "]";
      if (!ej.is_object()) cfg_fail(path + " must be an object");
      check_keys(ej, path, {"index", "bits_per_subcarrier", "coding_rate", "snr_req_db"});
      McsEntry e;
      e.index = get_int(ej, path, "index", static_cast<int>(i));
      e.bits_per_subcarrier = get_int(ej, path, "bits_per_subcarrier", 0);
      e.coding_rate = get_num(ej, path, "coding_rate", 0.0);
      e.snr_req_db = get_num(ej, path, "snr_req_db", 0.0);
      c.mcs_table.entries.push_back(e);
    }
  }

  if (j.contains("loss_model")) {
    const auto& l = j.at("loss_model");
    if (!l.is_object()) cfg_fail("loss_model must be an object");
    check_keys(l, "loss_model",
               {"eta_db", "c_stale_db_per_m", "stale_cap_db", "k_per", "g50_db", "margin_db"});
    c.loss.eta_db = get_num(l, "loss_model", "eta_db", c.loss.eta_db);
    c.loss.c_stale_db_per_m = get_num(l, "loss_model", "c_stale_db_per_m", c.loss.c_stale_db_per_m);
    c.loss.stale_cap_db = get_num(l, "loss_model", "stale_cap_db", c.loss.stale_cap_db);
    c.loss.k_per = get_num(l, "loss_model", "k_per", c.loss.k_per);
    c.loss.g50_db = get_num(l, "loss_model", "g50_db", c.loss.g50_db);
    c.loss.margin_db = get_num(l, "loss_model", "margin_db", c.loss.margin_db);
  }

  if (j.contains("rl")) {
    const auto& r = j.at("rl");
    if (!r.is_object()) cfg_fail("rl must be an object");
    check_keys(r, "rl", {"alpha", "gamma", "epsilon0", "eps_decay", "eps_min", "episodes",
                         "epochs_per_episode"});
    c.rl.alpha = get_num(r, "rl", "alpha", c.rl.alpha);
    c.rl.gamma = get_num(r, "rl", "gamma", c.rl.gamma);
    c.rl.epsilon0 = get_num(r, "rl", "epsilon0", c.rl.epsilon0);
    c.rl.eps_decay = get_num(r, "rl", "eps_decay", c.rl.eps_decay);
    c.rl.eps_min = get_num(r, "rl", "eps_min", c.rl.eps_min);
    c.rl.episodes = get_int(r, "rl", "episodes", c.rl.episodes);
    c.rl.epochs_per_episode = get_int(r, "rl", "epochs_per_episode", c.rl.epochs_per_episode);
  }

  if (j.contains("ladder")) {
    const auto& l = j.at("ladder");
    if (!l.is_object()) cfg_fail("ladder must be an object");
    check_keys(l, "ladder", {"rates_mbps", "segment_s"});
    if (l.contains("rates_mbps")) {
      const auto& arr = l.at("rates_mbps");
      if (!arr.is_array()) cfg_fail("ladder.rates_mbps must be an array");
      c.ladder.rates_mbps.clear();
      for (const auto& v : arr) {
        if (!v.is_number()) cfg_fail("ladder.rates_mbps entries must be numbers");
        c.ladder.rates_mbps.push_back(v.get<double>());
      }
    }
    c.ladder.segment_s = get_num(l, "ladder", "segment_s", c.ladder.segment_s);
  }

  if (j.contains("targets")) {
    const auto& t = j.at("targets");
    if (!t.is_object()) cfg_fail("targets must be an object");
    check_keys(t, "targets", {"rho_loss", "rho_und", "rho_sw", "v", "deadline_slack"});
    c.targets.rho_loss = get_num(t, "targets", "rho_loss", c.targets.rho_loss);
    c.targets.rho_und = get_num(t, "targets", "rho_und", c.targets.rho_und);
    c.targets.rho_sw = get_num(t, "targets", "rho_sw", c.targets.rho_sw);
    c.targets.v = get_num(t, "targets", "v", c.targets.v);
    c.targets.deadline_slack = get_num(t, "targets", "deadline_slack", c.targets.deadline_slack);
  }

  {
    const std::string p = detail::get_str(j, "", "policy", "oracle");
    if (p == "rl_trained")
      c.policy = Policy::RlTrained;
    else if (p == "oracle")
      c.policy = Policy::Oracle;
    else if (p == "all_su")
      c.policy = Policy::AllSu;
    else if (p == "greedy_snr")
      c.policy = Policy::GreedySnr;
    else if (p == "random")
      c.policy = Policy::Random;
    else
      cfg_fail("policy must be one of rl_trained/oracle/all_su/greedy_snr/random");
  }

  c.duration_epochs = get_int(j, "", "duration_epochs", c.duration_epochs);
  c.abr_tick_ms = get_num(j, "", "abr_tick_ms", c.abr_tick_ms);
  if (j.contains("seed")) {
    const auto& v = j.at("seed");
    if (v.is_number_unsigned()) {
      c.seed = v.get<std::uint64_t>();
    } else if (v.is_number_integer()) {
      const auto sv = v.get<long long>();
      if (sv < 0) cfg_fail("seed must be >= 0");
      c.seed = static_cast<std::uint64_t>(sv);
    } else {
      cfg_fail("seed must be an integer");
    }
    c.seed_in_config = true;
  }
  c.csi_dim = get_int(j, "", "csi_dim", c.csi_dim);
  c.mobility_threshold = get_num(j, "", "mobility_threshold", c.mobility_threshold);
  {
    const std::string r = detail::get_str(j, "", "reward", "sum");
    if (r == "sum")
      c.reward = RewardKind::Sum;
    else if (r == "min_user")
      c.reward = RewardKind::MinUser;
    else
      cfg_fail("reward must be \"sum\" or \"min_user\"");
  }
  c.state_snr_buckets = get_bool(j, "", "state_snr_buckets", c.state_snr_buckets);

  c.validate();
  return c;
}

// Canonical serialization: every field materialized, keys sorted by
// nlohmann's object ordering, shortest-round-trip floats.
inline std::string serialize_config(const SimConfig& c) {
  nlohmann::json j;
  j["ap"] = {{"n_tx_antennas", c.ap.n_tx_antennas},
             {"bandwidth_mhz", c.ap.bandwidth_mhz},
             {"max_group_size", c.ap.max_group_size},
             {"sounding_period_ms", c.ap.sounding_period_ms},
             {"carrier_ghz", c.ap.carrier_ghz},
             {"guard", c.ap.guard == Guard::Long ? "long" : "short"}};
  j["users"] = nlohmann::json::array();
  for (const auto& u : c.users)
    j["users"].push_back({{"id", u.id},
                          {"base_snr_db", u.base_snr_db},
                          {"speed_mps", u.speed_mps},
                          {"n_rx_antennas", u.n_rx_antennas},
                          {"n_streams", u.n_streams}});
  j["timing"] = {{"t_ndpa_ms", c.timing.t_ndpa_ms},
                 {"t_ndp_ms", c.timing.t_ndp_ms},
                 {"t_report_ms", c.timing.t_report_ms},
                 {"t_poll_ms", c.timing.t_poll_ms}};
  j["mcs_table"] = nlohmann::json::array();
  for (const auto& e : c.mcs_table.entries)
    j["mcs_table"].push_back({{"index", e.index},
                              {"bits_per_subcarrier", e.bits_per_subcarrier},
                              {"coding_rate", e.coding_rate},
                              {"snr_req_db", e.snr_req_db}});
  j["loss_model"] = {{"eta_db", c.loss.eta_db},
                     {"c_stale_db_per_m", c.loss.c_stale_db_per_m},
                     {"stale_cap_db", c.loss.stale_cap_db},
                     {"k_per", c.loss.k_per},
                     {"g50_db", c.loss.g50_db},
                     {"margin_db", c.loss.margin_db}};
  j["rl"] = {{"alpha", c.rl.alpha},
             {"gamma", c.rl.gamma},
             {"epsilon0", c.rl.epsilon0},
             {"eps_decay", c.rl.eps_decay},
             {"eps_min", c.rl.eps_min},
             {"episodes", c.rl.episodes},
             {"epochs_per_episode", c.rl.epochs_per_episode}};
  j["ladder"] = {{"rates_mbps", c.ladder.rates_mbps}, {"segment_s", c.ladder.segment_s}};
  j["targets"] = {{"rho_loss", c.targets.rho_loss},
                  {"rho_und", c.targets.rho_und},
                  {"rho_sw", c.targets.rho_sw},
                  {"v", c.targets.v},
                  {"deadline_slack", c.targets.deadline_slack}};
  j["policy"] = policy_name(c.policy);
  j["duration_epochs"] = c.duration_epochs;
  j["abr_tick_ms"] = c.abr_tick_ms;
  j["seed"] = c.seed;
  j["csi_dim"] = c.csi_dim;
  j["mobility_threshold"] = c.mobility_threshold;
  j["reward"] = c.reward == RewardKind::Sum ? "sum" : "min_user";
  j["state_snr_buckets"] = c.state_snr_buckets;
  return j.dump();
}

// FNV-1a 64 over the canonical serialization, as a 16-hex-digit string.
inline std::string config_digest(const SimConfig& c) {
  const std::string s = serialize_config(c);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace muvis
