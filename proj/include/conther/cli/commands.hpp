#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "conther/cli/config_file.hpp"
#include "conther/trainer/config.hpp"
#include "conther/trainer/trainer.hpp"

namespace conther::cli {

/// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// CONTHER_OUT when set and non-empty, otherwise "runs".
std::filesystem::path default_output_root();

/// "<UTC yyyymmddThhmmssZ>-<variant>-<seed>".
std::string run_dir_name(const std::string& timestamp, const std::string& variant, std::uint64_t seed);
std::string utc_timestamp_compact();
std::string utc_timestamp_iso();

/// Config from a file's assignments plus --set overrides (applied after) and
/// an optional seed override. Throws ConfigError.
trainer::TrainConfig resolve_config(const Assignments& file, const Assignments& overrides,
                                    std::optional<std::uint64_t> seed);

struct TrainOutcome {
  std::filesystem::path run_dir;
  RunManifest manifest;
  trainer::RunMetrics metrics;
};

/// Trains into `run_dir` (created; must not already hold a manifest):
/// manifest.json, config.cfg, metrics.jsonl and the checkpoints. The
/// manifest records failures before the exception propagates.
TrainOutcome train_into(const trainer::TrainConfig& config, const std::filesystem::path& run_dir,
                        std::ostream& log);

/// Mean of the last `count` epochs' validation success rate (fewer if the
/// run is shorter). Throws ContractError on a run with no epochs.
double final_success(const trainer::RunMetrics& metrics, std::size_t count = 5);

struct BenchCell {
  std::string variant;
  std::uint64_t seed = 0;
  std::optional<double> final_success;  // empty when the run failed
  std::string error;
};

/// One row per variant: runs completed, mean final success over completed
/// seeds, and, with more than one variant, the relative change (a - b) / b
/// against the first variant as a percentage. Failed cells are listed
/// under the table.
std::string format_bench_table(const std::vector<std::string>& variants, const std::vector<BenchCell>& cells);

/// Writes actor_loss.csv, critic_loss.csv, mean_reward.csv and
/// success_rate.csv per run into out_dir/<run name>/, plus aligned_*.csv
/// with one column per run. Runs without metrics are skipped with a warning.
/// Returns the number of runs exported.
std::size_t export_plots(const std::vector<std::filesystem::path>& run_dirs, const std::filesystem::path& out_dir,
                         std::ostream& log);

/// Command-line entry point; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace conther::cli
