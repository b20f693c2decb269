#pragma once

// Experiment configuration and the file-producing pipelines behind the
// command-line driver: train, detect phases, estimate LLCs, plot, reproduce.
//
// Run directory layout (one per seed):
//   config.json       resolved configuration with the run's seed
//   ckpt/step_*.bin   checkpoints (+ JSON sidecars)
//   metrics.csv       step, env_steps, regret, policy_return, optimal_return, file
//   phases.csv        step, d_P1, d_P2a, d_P2b, d_P3, detected
//   transitions.json  entry steps, dwell intervals, stage intervals
//   llc.json          LLC estimates at the scheduled checkpoints
//   chains.csv        per-step SGLD readouts behind llc.json
//   staircase.csv     checkpoint, regret, llc, phase
//   staircase.svg     regret and LLC against checkpoint, stages shaded
//   manifest.json     config hash, checkpoint index, artifact hashes, timing

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sltrl/env.hpp"
#include "sltrl/llc.hpp"
#include "sltrl/phases.hpp"
#include "sltrl/policy.hpp"
#include "sltrl/reinforce.hpp"

namespace sltrl {

inline constexpr const char* kToolName = "sltrl";
inline constexpr const char* kToolVersion = "1.0.0";

// Which checkpoints get an LLC estimate during reproduce.
enum class LlcSchedule { Tertiles, All, None };
std::string to_string(LlcSchedule s);
LlcSchedule llc_schedule_from_string(const std::string& name);

struct ExperimentConfig {
  EnvSpec env;
  ArchSpec arch;
  TrainConfig train;
  LLCConfig llc;
  LlcSchedule llc_schedule = LlcSchedule::Tertiles;
  std::vector<std::int64_t> llc_extra_steps;  // estimated in addition to the schedule
  double delta = kDefaultPhaseDelta;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path output_dir = "runs/default";
  int workers = 1;

  // Throws ConfigError naming the offending key.
  void validate() const;
};

// Parses a JSON document. Missing keys take the reference defaults (11x11
// interior, rollout 64, gamma 0.975, 9600 trajectories per step, 5e9 env steps,
// Adam 5e-5, convolutional policy, sigma^2 = 1/200, n beta = 1000). Unknown
// keys are rejected. Errors carry the source name and line/column for syntax
// errors, the key path for validation errors. Throws ConfigError.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
// Throws IoError when unreadable, ConfigError otherwise.
ExperimentConfig load_config(const std::filesystem::path& path);

// Fully resolved configuration (every key present); parse_config(dump) round-trips.
nlohmann::json config_to_json(const ExperimentConfig& cfg);
// SHA-256 of the compact resolved JSON.
std::string config_hash(const ExperimentConfig& cfg);

// Caps a requested worker count by SLTRL_THREADS when set to a positive integer.
int effective_workers(int requested);

struct CheckpointEntry {
  std::int64_t step = 0;
  std::int64_t env_steps = 0;
  std::string file;  // relative to the run directory
  RegretReport regret;
};

std::filesystem::path checkpoint_file_name(std::int64_t step);

// Trains one seed and writes config.json, ckpt/ and metrics.csv.
std::vector<CheckpointEntry> run_training(const ExperimentConfig& cfg, std::uint64_t seed,
                                          const std::filesystem::path& run_dir);

// Reads metrics.csv back.
std::vector<CheckpointEntry> read_metrics(const std::filesystem::path& run_dir);

struct StageInterval {
  Stage stage = Stage::S1;
  std::string label;  // "P1", "P2", "P3"
  std::size_t first_index = 0;
  std::size_t last_index = 0;
  std::int64_t first_step = 0;
  std::int64_t last_step = 0;
};

struct PhaseAnalysis {
  std::vector<std::pair<std::int64_t, PhaseReading>> series;
  TransitionSummary summary;
  std::vector<StageInterval> stages;
  bool full_staircase = false;
};

std::string stage_label(Stage s);

// Classifies the given checkpoints (sorted by step).
PhaseAnalysis analyze_phases(const std::vector<std::pair<std::int64_t, PolicyTable>>& tables,
                             double delta, const EnvSpec& spec);
PhaseAnalysis analyze_phase_readings(std::vector<std::pair<std::int64_t, PhaseReading>> series,
                                     double delta);

// Loads every checkpoint listed in metrics.csv, classifies it and writes
// phases.csv and transitions.json.
PhaseAnalysis detect_phases(const std::filesystem::path& run_dir, const EnvSpec& spec,
                            double delta);

nlohmann::json transitions_to_json(const PhaseAnalysis& analysis, double delta);
// Rebuilds readings from phases.csv (distances at full precision).
std::vector<std::pair<std::int64_t, PhaseReading>> read_phase_csv(const std::filesystem::path& path,
                                                                  double delta);

// Checkpoint indices at the 1/3 and 2/3 points of each stage interval, where
// position is measured by log(step + 1). Duplicates within a stage collapse.
struct TertilePick {
  std::size_t index = 0;
  Stage stage = Stage::S1;
  int tertile = 1;  // 1 or 2
};
std::vector<TertilePick> tertile_checkpoints(const std::vector<StageInterval>& stages,
                                             const std::vector<std::int64_t>& steps);

struct LlcRecord {
  std::int64_t step = 0;
  std::string stage;  // stage label or "" when unscheduled
  int tertile = 0;
  LLCEstimate estimate;
  std::vector<ChainTrace> traces;
};

// Chain seeds derive from (run seed, checkpoint step), so a record does not
// depend on which other checkpoints were estimated.
LLCConfig llc_config_for(const LLCConfig& base, std::uint64_t run_seed, std::int64_t step);

// Writes llc.json and chains.csv.
void write_llc_outputs(const std::filesystem::path& dir, const LLCConfig& cfg,
                       const std::vector<LlcRecord>& records);
nlohmann::json llc_records_to_json(const LLCConfig& cfg, const std::vector<LlcRecord>& records);

// Per-stage medians and the opposing-staircase property.
struct StageStat {
  std::string label;
  std::size_t checkpoints = 0;
  double median_regret = 0.0;
  std::size_t llc_count = 0;
  std::optional<double> median_llc;
};

struct StaircaseCheck {
  bool ordered = false;            // P1 -> stage 2 -> P3
  bool regret_decreasing = false;  // strictly, across stages
  bool llc_increasing = false;     // strictly, across stages
  std::vector<StageStat> stages;
  bool pass() const { return ordered && regret_decreasing && llc_increasing; }
  nlohmann::json to_json() const;
};

StaircaseCheck check_staircase(const std::vector<CheckpointEntry>& metrics,
                               const PhaseAnalysis& phases, const std::vector<LlcRecord>& llc);
// Same check from the files of a finished run (metrics.csv, transitions.json, llc.json).
StaircaseCheck check_staircase_dir(const std::filesystem::path& run_dir);

// Writes staircase.csv and staircase.svg from metrics.csv, transitions.json
// and (optionally) llc.json. Throws IoError when metrics are missing.
void emit_plots(const std::filesystem::path& run_dir);

struct RunOutcome {
  std::uint64_t seed = 0;
  std::filesystem::path run_dir;
  bool ok = false;
  std::string error;
  int exit_code = 0;
  std::optional<StaircaseCheck> staircase;
};

// Full pipeline for one seed. Never throws for stage failures: the manifest
// records the failing stage and the artifacts written so far.
RunOutcome reproduce_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                          const std::filesystem::path& run_dir, int llc_workers);

// All seeds (in parallel up to the worker cap) plus summary.json in output_dir.
std::vector<RunOutcome> reproduce(const ExperimentConfig& cfg);

}  // namespace sltrl
