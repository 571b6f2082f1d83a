#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "muvis/engine.hpp"

namespace muvis {

enum class ReportFormat { Csv, Json };

namespace detail {

inline std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline std::string mcs_str(int mcs) {
  return mcs == kNoTx ? std::string("NO_TX") : std::to_string(mcs);
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace detail

inline std::string epochs_csv(const MetricsReport& r) {
  std::string out = "epoch,partition_canonical,user_id,mode,eff_snr_db,mcs,goodput_mbps\n";
  for (const auto& e : r.epochs) {
    const std::string pstr = e.partition.str();
    for (const auto& u : e.users) {  // already sorted by user_id (map order)
      out += std::to_string(e.epoch) + ',' + pstr + ',' + std::to_string(u.user_id) + ',' +
             mode_name(u.mode) + ',' + detail::fixed6(u.eff_snr_db) + ',' +
             detail::mcs_str(u.mcs_index) + ',' + detail::fixed6(u.goodput_mbps) + '\n';
    }
  }
  return out;
}

inline std::string qoe_csv(const MetricsReport& r) {
  std::string out = "user_id,segments,loss_rate,underflow_rate,switch_rate,mean_bitrate_mbps\n";
  for (const auto& q : r.qoe) {
    out += std::to_string(q.user_id) + ',' + std::to_string(q.segments) + ',' +
           detail::fixed6(q.loss_rate) + ',' + detail::fixed6(q.underflow_rate) + ',' +
           detail::fixed6(q.switch_rate) + ',' + detail::fixed6(q.mean_bitrate_mbps) + '\n';
  }
  return out;
}

inline std::string segments_csv(const MetricsReport& r) {
  std::string out = "user_id,segment,bitrate_idx,outcome,switched,underflow\n";
  for (const auto& s : r.segments) {
    out += std::to_string(s.user_id) + ',' + std::to_string(s.segment) + ',' +
           std::to_string(s.bitrate_idx) + ',' + (s.lost ? "lost" : "completed") + ',' +
           (s.switched ? "1" : "0") + ',' + (s.underflow ? "1" : "0") + '\n';
  }
  return out;
}

inline std::string summary_json(const MetricsReport& r, int duration_epochs) {
  double mean_aggregate = 0.0;
  for (const auto& e : r.epochs) mean_aggregate += e.aggregate_mbps;
  if (!r.epochs.empty()) mean_aggregate /= static_cast<double>(r.epochs.size());

  std::string out = "{\n";
  out += "  \"config_digest\": \"" + r.config_digest + "\",\n";
  out += "  \"duration_epochs\": " + std::to_string(duration_epochs) + ",\n";
  out += "  \"format\": \"muvis-report/1\",\n";
  out += "  \"mean_aggregate_mbps\": " + detail::fixed6(mean_aggregate) + ",\n";
  out += "  \"n_users\": " + std::to_string(r.qoe.size()) + ",\n";
  out += "  \"per_user\": [\n";
  for (std::size_t i = 0; i < r.qoe.size(); ++i) {
    const auto& q = r.qoe[i];
    double mean_goodput = 0.0;
    for (const auto& e : r.epochs)
      for (const auto& u : e.users)
        if (u.user_id == q.user_id) mean_goodput += u.goodput_mbps;
    if (!r.epochs.empty()) mean_goodput /= static_cast<double>(r.epochs.size());
    out += "    {\"user_id\": " + std::to_string(q.user_id) +
           ", \"mean_goodput_mbps\": " + detail::fixed6(mean_goodput) +
           ", \"segments\": " + std::to_string(q.segments) +
           ", \"loss_rate\": " + detail::fixed6(q.loss_rate) +
           ", \"underflow_rate\": " + detail::fixed6(q.underflow_rate) +
           ", \"switch_rate\": " + detail::fixed6(q.switch_rate) +
           ", \"mean_bitrate_mbps\": " + detail::fixed6(q.mean_bitrate_mbps) + "}";
    out += (i + 1 < r.qoe.size()) ? ",\n" : "\n";
  }
  out += "  ],\n";
  out += "  \"seed\": " + std::to_string(r.seed) + "\n";
  out += "}\n";
  return out;
}

namespace detail {

inline std::string epochs_json(const MetricsReport& r) {
  std::string out = "[\n";
  bool first = true;
  for (const auto& e : r.epochs) {
    const std::string pstr = e.partition.str();
    for (const auto& u : e.users) {
      if (!first) out += ",\n";
      first = false;
      out += "  {\"epoch\": " + std::to_string(e.epoch) + ", \"partition_canonical\": \"" + pstr +
             "\", \"user_id\": " + std::to_string(u.user_id) + ", \"mode\": \"" +
             mode_name(u.mode) + "\", \"eff_snr_db\": " + fixed6(u.eff_snr_db) + ", \"mcs\": \"" +
             mcs_str(u.mcs_index) + "\", \"goodput_mbps\": " + fixed6(u.goodput_mbps) + "}";
    }
  }
  out += "\n]\n";
  return out;
}

inline std::string qoe_json(const MetricsReport& r) {
  std::string out = "[\n";
  for (std::size_t i = 0; i < r.qoe.size(); ++i) {
    const auto& q = r.qoe[i];
    out += "  {\"user_id\": " + std::to_string(q.user_id) +
           ", \"segments\": " + std::to_string(q.segments) +
           ", \"loss_rate\": " + fixed6(q.loss_rate) +
           ", \"underflow_rate\": " + fixed6(q.underflow_rate) +
           ", \"switch_rate\": " + fixed6(q.switch_rate) +
           ", \"mean_bitrate_mbps\": " + fixed6(q.mean_bitrate_mbps) + "}";
    out += (i + 1 < r.qoe.size()) ? ",\n" : "\n";
  }
  out += "]\n";
  return out;
}

}  // namespace detail

// Writes the report files into out_dir. CSV format: epochs.csv, qoe.csv,
// segments.csv and summary.json; JSON format replaces the CSVs with .json
// row arrays. Output is byte-stable: fixed 6-decimal floats, rows sorted by
// (epoch, user_id), LF line endings.
inline void emit_report(const MetricsReport& r, ReportFormat format, const std::string& out_dir,
                        int duration_epochs) {
  namespace fs = std::filesystem;
  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw std::runtime_error("output directory unavailable: " + out_dir);
  if (format == ReportFormat::Csv) {
    detail::write_file(dir / "epochs.csv", epochs_csv(r));
    detail::write_file(dir / "qoe.csv", qoe_csv(r));
    detail::write_file(dir / "segments.csv", segments_csv(r));
  } else {
    detail::write_file(dir / "epochs.json", detail::epochs_json(r));
    detail::write_file(dir / "qoe.json", detail::qoe_json(r));
    detail::write_file(dir / "segments.csv", segments_csv(r));
  }
  detail::write_file(dir / "summary.json", summary_json(r, duration_epochs));
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "axis,level,seed,arm,mean_user_throughput_mbps\n";
  for (const auto& row : rows) {
    out += row.axis + ',' + std::to_string(row.level) + ',' + std::to_string(row.seed) + ',' +
           row.arm + ',' + detail::fixed6(row.mean_user_throughput_mbps) + '\n';
  }
  return out;
}

}  // namespace muvis
