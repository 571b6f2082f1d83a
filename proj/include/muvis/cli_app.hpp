#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "muvis/config.hpp"
#include "muvis/engine.hpp"
#include "muvis/grouping.hpp"
#include "muvis/report_io.hpp"

namespace muvis::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

namespace detail {

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Seed priority: --seed > scenario seed > MUVIS_SEED > 0.
inline std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag_seed,
                                  const SimConfig& cfg) {
  if (flag_seed) return *flag_seed;
  if (cfg.seed_in_config) return cfg.seed;
  if (const char* env = std::getenv("MUVIS_SEED")) {
    try {
      std::size_t pos = 0;
      const unsigned long long v = std::stoull(env, &pos);
      if (pos != std::string(env).size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("MUVIS_SEED is not a valid unsigned integer");
    }
  }
  return 0;
}

inline std::vector<int> parse_levels(const std::string& text) {
  std::vector<int> levels;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    levels.push_back(std::stoi(tok));
  }
  if (levels.empty()) throw ConfigError("--levels parsed to an empty list");
  return levels;
}

}  // namespace detail

// Full CLI dispatch, callable in-process for tests. argv excludes the
// program name. Exit codes: 0 ok, 1 usage, 2 config, 3 runtime.
inline int run(const std::vector<std::string>& argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"MU-MIMO grouping and QoE-aware streaming simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed_flag;
  std::string out_dir = ".";
  std::string format_str = "csv";

  auto add_common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--config", config_path, "scenario JSON path")->required();
    sub->add_option("--seed", seed_flag, "seed override");
    if (needs_out) sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--format", format_str, "csv|json")
        ->check(CLI::IsMember({"csv", "json"}));
  };

  auto* train_cmd = app.add_subcommand("train", "learn a grouping policy, write qtable.json");
  add_common(train_cmd, true);

  auto* run_cmd = app.add_subcommand("run", "simulate a scenario and write reports");
  add_common(run_cmd, true);
  std::string qtable_path;
  run_cmd->add_option("--qtable", qtable_path, "trained Q-table for the rl_trained policy");

  auto* sweep_cmd = app.add_subcommand("sweep", "paired MU/SU degradation sweep, write sweep.csv");
  add_common(sweep_cmd, true);
  std::string axis_str;
  std::string levels_str;
  int num_seeds = 10;
  sweep_cmd->add_option("--axis", axis_str, "n_mobile|n_low_snr")
      ->required()
      ->check(CLI::IsMember({"n_mobile", "n_low_snr"}));
  sweep_cmd->add_option("--levels", levels_str, "comma-separated levels (default 0..n_users)");
  sweep_cmd->add_option("--num-seeds", num_seeds, "seeds 0..N-1 per level");

  auto* oracle_cmd = app.add_subcommand("oracle", "print the brute-force best grouping");
  add_common(oracle_cmd, false);

  std::vector<std::string> args(argv.rbegin(), argv.rend());  // CLI11 wants reversed
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      out << app.help();
      return kExitOk;
    }
    err << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    const SimConfig cfg = parse_config(detail::read_text_file(config_path));
    const std::uint64_t seed = detail::resolve_seed(seed_flag, cfg);
    const ReportFormat format = format_str == "json" ? ReportFormat::Json : ReportFormat::Csv;
    namespace fs = std::filesystem;

    if (app.got_subcommand(train_cmd)) {
      Simulation env(cfg, seed);
      Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);  // decouple policy draws from channel draws
      const TrainResult result = train(env, cfg.users, cfg.ap, cfg.rl, rng,
                                       cfg.state_snr_buckets);
      fs::create_directories(out_dir);
      {
        std::ofstream f(fs::path(out_dir) / "qtable.json", std::ios::binary);
        if (!f) throw std::runtime_error("cannot write qtable.json");
        f << result.qtable.to_json() << '\n';
      }
      {
        std::ofstream f(fs::path(out_dir) / "best_partition.json", std::ios::binary);
        if (!f) throw std::runtime_error("cannot write best_partition.json");
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.6f", result.best_reward);
        f << "{\"partition\": \"" << result.best_partition.str()
          << "\", \"action_index\": " << result.best_action_index
          << ", \"best_reward_mbps\": " << buf << "}\n";
      }
      out << "best " << result.best_partition.str() << " reward " << result.best_reward
          << " Mbps, " << result.qtable.n_states() << " states\n";
      return kExitOk;
    }

    if (app.got_subcommand(run_cmd)) {
      std::optional<QTable> qtable;
      if (!qtable_path.empty())
        qtable = QTable::from_json(detail::read_text_file(qtable_path));
      const MetricsReport report = run_sim(cfg, seed, qtable ? &*qtable : nullptr);
      emit_report(report, format, out_dir, cfg.duration_epochs);
      out << "wrote " << (format == ReportFormat::Csv ? "epochs.csv qoe.csv segments.csv"
                                                      : "epochs.json qoe.json segments.csv")
          << " summary.json to " << out_dir << "\n";
      return kExitOk;
    }

    if (app.got_subcommand(sweep_cmd)) {
      const SweepAxis axis = axis_str == "n_mobile" ? SweepAxis::NMobile : SweepAxis::NLowSnr;
      std::vector<int> levels;
      if (levels_str.empty()) {
        for (int i = 0; i <= static_cast<int>(cfg.users.size()); ++i) levels.push_back(i);
      } else {
        levels = detail::parse_levels(levels_str);
      }
      if (num_seeds < 1) throw ConfigError("--num-seeds must be >= 1");
      std::vector<std::uint64_t> seeds;
      for (int i = 0; i < num_seeds; ++i) seeds.push_back(static_cast<std::uint64_t>(i));
      const auto rows = sweep(cfg, axis, levels, seeds);
      fs::create_directories(out_dir);
      std::ofstream f(fs::path(out_dir) / "sweep.csv", std::ios::binary);
      if (!f) throw std::runtime_error("cannot write sweep.csv");
      f << sweep_csv(rows);
      out << "wrote sweep.csv (" << rows.size() << " rows) to " << out_dir << "\n";
      return kExitOk;
    }

    if (app.got_subcommand(oracle_cmd)) {
      Simulation env(cfg, seed);
      const Partition best = oracle_best(cfg.users, cfg.ap, env);
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.6f", env.expected_goodput(best));
      out << best.str() << " " << buf << " Mbps\n";
      return kExitOk;
    }

    err << "no subcommand\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace muvis::cli
