#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "muvis/rng.hpp"

namespace muvis {

inline constexpr double kSpeedOfLightMps = 2.998e8;

enum class Mode { SU, MU };
enum class Guard { Long, Short };

inline const char* mode_name(Mode m) { return m == Mode::SU ? "SU" : "MU"; }

struct ApConfig {
  int n_tx_antennas = 4;  // N_t, 1..8
  int bandwidth_mhz = 20;
  int max_group_size = 4;
  double sounding_period_ms = 100.0;
  double carrier_ghz = 5.18;
  Guard guard = Guard::Long;
};

struct UserProfile {
  int id = 0;
  double base_snr_db = 35.0;  // SU-mode SNR at the last sounding
  double speed_mps = 0.0;
  int n_rx_antennas = 1;  // N_r
  int n_streams = 1;      // S_g, 1..N_r
};

struct CsiSnapshot {
  std::vector<std::complex<double>> coeffs;
  double timestamp_ms = 0.0;
};

struct McsEntry {
  int index = 0;
  int bits_per_subcarrier = 0;
  double coding_rate = 0.0;
  double snr_req_db = 0.0;
};

// Sentinel returned by select_mcs when no rate closes the link.
inline constexpr int kNoTx = -1;

struct McsTable {
  std::vector<McsEntry> entries;

  static McsTable standard() {
    // VHT MCS 0..9. Threshold spacing is a simulator default, not a claim
    // about any particular chipset.
    McsTable t;
    t.entries = {
        {0, 1, 1.0 / 2.0, 2.0},  {1, 2, 1.0 / 2.0, 5.0},
        {2, 2, 3.0 / 4.0, 9.0},  {3, 4, 1.0 / 2.0, 11.0},
        {4, 4, 3.0 / 4.0, 15.0}, {5, 6, 2.0 / 3.0, 18.0},
        {6, 6, 3.0 / 4.0, 20.0}, {7, 6, 5.0 / 6.0, 25.0},
        {8, 8, 3.0 / 4.0, 29.0}, {9, 8, 5.0 / 6.0, 31.0},
    };
    return t;
  }

  void validate() const {
    if (entries.empty()) throw std::invalid_argument("mcs_table is empty");
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      if (e.index != static_cast<int>(i))
        throw std::invalid_argument("mcs_table index not contiguous from 0");
      if (e.bits_per_subcarrier < 1)
        throw std::invalid_argument("mcs_table bits_per_subcarrier < 1");
      if (e.coding_rate <= 0.0 || e.coding_rate > 1.0)
        throw std::invalid_argument("mcs_table coding_rate out of (0,1]");
      if (i > 0) {
        if (e.snr_req_db <= entries[i - 1].snr_req_db)
          throw std::invalid_argument("mcs_table snr_req_db not strictly increasing");
        const double rate = e.bits_per_subcarrier * e.coding_rate;
        const double prev = entries[i - 1].bits_per_subcarrier * entries[i - 1].coding_rate;
        if (rate <= prev)
          throw std::invalid_argument("mcs_table bits*coding_rate not strictly increasing");
      }
    }
  }
};

struct LinkState {
  int user_id = 0;
  Mode mode = Mode::SU;
  double eff_snr_db = 0.0;  // at transmission time
  int mcs_index = kNoTx;
  double phy_rate_mbps = 0.0;
  double per = 1.0;
};

struct LossModel {
  double eta_db = 1.0;              // inter-user penalty per extra group member
  double c_stale_db_per_m = 200.0;  // staleness loss per meter moved since sounding
  double stale_cap_db = 30.0;
  double k_per = 2.0;   // logistic PER steepness, per dB of gap
  double g50_db = -1.0;  // gap at which PER = 0.5
  double margin_db = 1.0;  // MCS selection back-off
};

// Coherence distance: half the carrier wavelength.
inline double coherence_distance_m(double carrier_ghz) {
  return (kSpeedOfLightMps / (carrier_ghz * 1e9)) / 2.0;
}

// Initial channel draw, each coefficient ~ CN(0,1).
inline CsiSnapshot make_initial_csi(int dim, double timestamp_ms, Rng& rng) {
  if (dim < 1) throw std::invalid_argument("csi dimension must be >= 1");
  CsiSnapshot s;
  s.timestamp_ms = timestamp_ms;
  s.coeffs.resize(dim);
  const double sigma = std::sqrt(0.5);
  for (auto& c : s.coeffs) c = {sigma * rng.normal(), sigma * rng.normal()};
  return s;
}

// Gauss-Markov channel evolution: h' = rho*h + sqrt(1-rho^2)*w with
// rho = exp(-(speed*dt)/d_c). Unit-variance complex white noise w.
inline CsiSnapshot synthesize_csi(const CsiSnapshot& prev, double speed_mps, double dt_ms,
                                  double carrier_ghz, Rng& rng) {
  if (dt_ms < 0.0) throw std::invalid_argument("synthesize_csi: dt_ms must be >= 0");
  if (speed_mps < 0.0) throw std::invalid_argument("synthesize_csi: speed_mps must be >= 0");
  const double d_c = coherence_distance_m(carrier_ghz);
  const double rho = std::exp(-(speed_mps * dt_ms / 1000.0) / d_c);
  const double noise_scale = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  CsiSnapshot next;
  next.timestamp_ms = prev.timestamp_ms + dt_ms;
  next.coeffs.resize(prev.coeffs.size());
  const double sigma = std::sqrt(0.5);
  for (std::size_t i = 0; i < prev.coeffs.size(); ++i) {
    const std::complex<double> w{sigma * rng.normal(), sigma * rng.normal()};
    next.coeffs[i] = rho * prev.coeffs[i] + noise_scale * w;
  }
  return next;
}

// |<a,b>| / (||a||*||b||), in [0,1].
inline double csi_correlation(const CsiSnapshot& a, const CsiSnapshot& b) {
  if (a.coeffs.size() != b.coeffs.size())
    throw std::invalid_argument("csi_correlation: dimension mismatch");
  std::complex<double> inner{0.0, 0.0};
  double na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.coeffs.size(); ++i) {
    inner += a.coeffs[i] * std::conj(b.coeffs[i]);
    na += std::norm(a.coeffs[i]);
    nb += std::norm(b.coeffs[i]);
  }
  if (na == 0.0 || nb == 0.0)
    throw std::invalid_argument("csi_correlation: zero-norm input");
  const double corr = std::abs(inner) / std::sqrt(na * nb);
  return std::clamp(corr, 0.0, 1.0);
}

// Post-beamforming SNR. SU (k=1) is the exact identity; MU pays the stream
// power split, an inter-user ZF penalty, and a capped CSI-staleness loss.
inline double effective_snr(const UserProfile& user, int group_size, int total_group_streams,
                            double t_since_sound_ms, const LossModel& loss) {
  if (group_size < 1) throw std::invalid_argument("effective_snr: group_size must be >= 1");
  if (total_group_streams < user.n_streams)
    throw std::invalid_argument("effective_snr: total_group_streams < user streams");
  if (t_since_sound_ms < 0.0)
    throw std::invalid_argument("effective_snr: t_since_sound_ms must be >= 0");
  if (group_size == 1) return user.base_snr_db;
  const double split_db =
      10.0 * std::log10(static_cast<double>(total_group_streams) / user.n_streams);
  const double zf_db = loss.eta_db * (group_size - 1);
  const double stale_db = std::min(
      loss.c_stale_db_per_m * user.speed_mps * (t_since_sound_ms / 1000.0), loss.stale_cap_db);
  return user.base_snr_db - split_db - zf_db - stale_db;
}

// Highest index whose threshold clears eff_snr - margin; kNoTx when none does.
inline int select_mcs(double eff_snr_db, const McsTable& table, double margin_db) {
  int best = kNoTx;
  for (const auto& e : table.entries) {
    if (e.snr_req_db <= eff_snr_db - margin_db) best = e.index;
  }
  return best;
}

// 802.11ac data rate: n_ss * N_sd * bits * coding / T_sym.
inline double phy_rate(int mcs_index, int bandwidth_mhz, int n_streams, Guard guard,
                       const McsTable& table) {
  if (mcs_index == kNoTx) return 0.0;
  if (n_streams < 1) throw std::invalid_argument("phy_rate: n_streams must be >= 1");
  if (mcs_index < 0 || mcs_index >= static_cast<int>(table.entries.size()))
    throw std::invalid_argument("phy_rate: invalid MCS index");
  int n_sd = 0;
  switch (bandwidth_mhz) {
    case 20: n_sd = 52; break;
    case 40: n_sd = 108; break;
    case 80: n_sd = 234; break;
    case 160: n_sd = 468; break;
    default: throw std::invalid_argument("phy_rate: unsupported bandwidth");
  }
  const double t_sym_us = (guard == Guard::Long) ? 4.0 : 3.6;
  const auto& e = table.entries[mcs_index];
  return static_cast<double>(n_streams * n_sd * e.bits_per_subcarrier) * e.coding_rate / t_sym_us;
}

// Logistic PER in the SNR gap above the MCS threshold.
inline double packet_error_rate(double eff_snr_db, int mcs_index, const McsTable& table,
                                const LossModel& loss) {
  if (mcs_index == kNoTx) return 1.0;
  if (mcs_index < 0 || mcs_index >= static_cast<int>(table.entries.size()))
    throw std::invalid_argument("packet_error_rate: invalid MCS index");
  const double gap = eff_snr_db - table.entries[mcs_index].snr_req_db;
  return 1.0 / (1.0 + std::exp(loss.k_per * (gap - loss.g50_db)));
}

}  // namespace muvis
