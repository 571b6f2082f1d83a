#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "muvis/phy_channel.hpp"

namespace muvis {

struct BitrateLadder {
  std::vector<double> rates_mbps{1.0, 2.5, 5.0, 8.0, 16.0};
  double segment_s = 2.0;

  void validate() const {
    if (rates_mbps.empty()) throw std::invalid_argument("ladder.rates_mbps is empty");
    for (std::size_t i = 0; i < rates_mbps.size(); ++i) {
      if (rates_mbps[i] <= 0.0) throw std::invalid_argument("ladder.rates_mbps must be > 0");
      if (i > 0 && rates_mbps[i] <= rates_mbps[i - 1])
        throw std::invalid_argument("ladder.rates_mbps not strictly increasing");
    }
    if (segment_s <= 0.0) throw std::invalid_argument("ladder.segment_s must be > 0");
  }
};

struct QoeTargets {
  double rho_loss = 0.01;  // allowed long-run events per segment
  double rho_und = 0.02;
  double rho_sw = 0.15;
  double v = 10.0;             // utility weight
  double deadline_slack = 0.5;  // a segment is lost after segment_s*(1+slack) wall time
};

struct VirtualQueues {
  double z_loss = 0.0;
  double z_und = 0.0;
  double z_sw = 0.0;
};

inline constexpr int kNoBitrate = -1;

struct VideoSession {
  int user_id = 0;
  double buffer_s = 0.0;
  double buffer_cap_s = 30.0;
  int last_bitrate_idx = kNoBitrate;  // last completed segment
  double download_progress_bits = 0.0;
  long losses = 0;
  long underflows = 0;
  long switches = 0;
  long segments_played = 0;
  double goodput_ewma_mbps = 0.0;
  Mode current_mode = Mode::SU;

  // download / bookkeeping state
  int in_flight_idx = kNoBitrate;
  double download_elapsed_s = 0.0;
  bool ewma_seeded = false;
  bool depleted = true;  // underflow latch; starts depleted so startup never counts
  double selected_rate_sum_mbps = 0.0;
};

// What one advance_session call observed. bitrate_idx is the rate of the
// segment that completed or was lost, if any.
struct SegmentEvents {
  bool completed = false;
  bool switched = false;
  bool underflow = false;
  bool lost = false;
  int bitrate_idx = kNoBitrate;
};

// EWMA throughput tracker (w = 0.3). A mode flip invalidates the history and
// reseeds from the new observation.
inline void estimate_goodput(VideoSession& s, double observed_goodput_mbps, Mode mode) {
  if (observed_goodput_mbps < 0.0)
    throw std::invalid_argument("estimate_goodput: negative observation");
  constexpr double w = 0.3;
  if (!s.ewma_seeded || mode != s.current_mode) {
    s.goodput_ewma_mbps = observed_goodput_mbps;
    s.ewma_seeded = true;
  } else {
    s.goodput_ewma_mbps = (1.0 - w) * s.goodput_ewma_mbps + w * observed_goodput_mbps;
  }
  s.current_mode = mode;
}

// Drift-plus-penalty selection: log utility, queue-weighted indicator
// penalties for switching, predicted underflow, and predicted deadline miss.
// Ties break to the lower index.
inline int choose_bitrate(const VideoSession& s, const VirtualQueues& q, const QoeTargets& targets,
                          const BitrateLadder& ladder) {
  if (!s.ewma_seeded) throw std::invalid_argument("choose_bitrate: no goodput estimate yet");
  const double g = s.goodput_ewma_mbps;
  if (g <= 0.0) return 0;
  const double tau = ladder.segment_s;
  const double deadline = tau * (1.0 + targets.deadline_slack);
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < ladder.rates_mbps.size(); ++j) {
    const double r = ladder.rates_mbps[j];
    const double dl_time = tau * r / g;
    double score = targets.v * std::log(r);
    if (s.last_bitrate_idx != kNoBitrate && static_cast<int>(j) != s.last_bitrate_idx)
      score -= q.z_sw;
    if (dl_time > s.buffer_s) score -= q.z_und;
    if (dl_time > deadline) score -= q.z_loss;
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(j);
    }
  }
  return best;
}

// Arms the next segment download.
inline void begin_segment(VideoSession& s, int ladder_idx, const BitrateLadder& ladder) {
  if (s.in_flight_idx != kNoBitrate)
    throw std::invalid_argument("begin_segment: download already in flight");
  if (ladder_idx < 0 || ladder_idx >= static_cast<int>(ladder.rates_mbps.size()))
    throw std::invalid_argument("begin_segment: ladder index out of range");
  s.in_flight_idx = ladder_idx;
  s.download_progress_bits = 0.0;
  s.download_elapsed_s = 0.0;
}

// One tick of buffer dynamics: accumulate download progress, credit the
// buffer on completion (excess above the cap is discarded), drain playback,
// edge-trigger underflow, and abandon the segment past its deadline.
inline SegmentEvents advance_session(VideoSession& s, double dt_s, double delivered_bits,
                                     const BitrateLadder& ladder, double deadline_slack = 0.5) {
  if (dt_s < 0.0) throw std::invalid_argument("advance_session: dt_s must be >= 0");
  if (delivered_bits < 0.0) throw std::invalid_argument("advance_session: negative bits");
  SegmentEvents ev;
  const double tau = ladder.segment_s;

  if (s.in_flight_idx != kNoBitrate) {
    s.download_progress_bits += delivered_bits;
    s.download_elapsed_s += dt_s;
    const double needed_bits = tau * ladder.rates_mbps[s.in_flight_idx] * 1e6;
    if (s.download_progress_bits >= needed_bits) {
      ev.completed = true;
      ev.bitrate_idx = s.in_flight_idx;
      ev.switched = s.last_bitrate_idx != kNoBitrate && s.in_flight_idx != s.last_bitrate_idx;
      if (ev.switched) ++s.switches;
      ++s.segments_played;
      s.selected_rate_sum_mbps += ladder.rates_mbps[s.in_flight_idx];
      s.buffer_s = std::min(s.buffer_s + tau, s.buffer_cap_s);
      s.last_bitrate_idx = s.in_flight_idx;
      s.in_flight_idx = kNoBitrate;
      s.download_progress_bits = 0.0;
      s.download_elapsed_s = 0.0;
    }
  }

  if (s.buffer_s > 0.0) s.buffer_s = std::max(0.0, s.buffer_s - dt_s);
  if (s.buffer_s > 0.0) {
    s.depleted = false;
  } else if (!s.depleted) {
    ev.underflow = true;
    ++s.underflows;
    s.depleted = true;
  }

  if (s.in_flight_idx != kNoBitrate && s.download_elapsed_s > tau * (1.0 + deadline_slack)) {
    ev.lost = true;
    ev.bitrate_idx = s.in_flight_idx;
    ++s.losses;
    s.selected_rate_sum_mbps += ladder.rates_mbps[s.in_flight_idx];
    s.in_flight_idx = kNoBitrate;
    s.download_progress_bits = 0.0;
    s.download_elapsed_s = 0.0;
  }
  return ev;
}

// z <- max(z + event - rho, 0), applied once per completed/lost segment.
inline void update_virtual_queues(VirtualQueues& q, const SegmentEvents& ev,
                                  const QoeTargets& targets) {
  q.z_loss = std::max(q.z_loss + (ev.lost ? 1.0 : 0.0) - targets.rho_loss, 0.0);
  q.z_und = std::max(q.z_und + (ev.underflow ? 1.0 : 0.0) - targets.rho_und, 0.0);
  q.z_sw = std::max(q.z_sw + (ev.switched ? 1.0 : 0.0) - targets.rho_sw, 0.0);
}

struct QoeSummary {
  int user_id = 0;
  long segments = 0;  // completed or lost
  double loss_rate = 0.0;
  double underflow_rate = 0.0;
  double switch_rate = 0.0;
  double mean_bitrate_mbps = 0.0;
  bool no_segments = false;
};

inline QoeSummary qoe_summary(const VideoSession& s) {
  QoeSummary out;
  out.user_id = s.user_id;
  out.segments = s.segments_played + s.losses;
  if (out.segments == 0) {
    out.no_segments = true;
    return out;
  }
  const double n = static_cast<double>(out.segments);
  out.loss_rate = s.losses / n;
  out.underflow_rate = s.underflows / n;
  out.switch_rate = s.switches / n;
  out.mean_bitrate_mbps = s.selected_rate_sum_mbps / n;
  return out;
}

}  // namespace muvis
