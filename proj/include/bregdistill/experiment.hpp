#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "bregdistill/config.hpp"
#include "bregdistill/distiller.hpp"

namespace bregdistill {

inline constexpr const char* kVersion = "bregdistill 0.1.0";

struct RunManifest {
  std::string config_hash;
  std::string started;
  std::string finished;
  std::string status;  // "ok" or "failed"
  std::optional<std::size_t> failed_round;
  std::string failure;
  std::vector<std::filesystem::path> artifacts;
};

std::string manifest_json(const RunManifest& manifest);
std::string utc_timestamp();

struct TrainOutcome {
  RunResult result;
  RunManifest manifest;
};

// Writes config.cfg, metrics.csv, checkpoints and manifest.json under `out_dir`.
TrainOutcome run_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

struct SweepRow {
  std::string config;
  std::uint64_t seed = 0;
  double final_sw2 = 0.0;
  std::string status;
  double config_mean_sw2 = 0.0;
  std::size_t rank = 0;
};

std::string sweep_run_name(const DivergenceSpec& spec, std::uint64_t seed);
// Runs every divergence x seed into its own subdirectory and writes summary.csv.
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                std::ostream* progress = nullptr);
std::string sweep_summary_csv(const std::vector<SweepRow>& rows);

struct EvalReport {
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  double sw2 = 0.0;
  double mmd = 0.0;
  Vec mode_fractions;
};

std::string eval_report_json(const EvalReport& report);

// Loads a generator checkpoint, writes samples.csv and eval_report.json.
EvalReport run_eval(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint, std::size_t samples,
                    std::uint64_t seed, const std::filesystem::path& out_dir);

}  // namespace bregdistill
