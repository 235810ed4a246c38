#pragma once

// Benchmark runner: tasks x ablations x trials, with per-trial records and a
// per-cell aggregate in the layout of the ablation table.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bsr/domain.hpp"
#include "bsr/env.hpp"
#include "bsr/policy.hpp"
#include "json.hpp"

namespace bsr {

struct Ablation {
  bool constrain = true;
  bool defer = true;
  std::string name() const;  // neither, constraints, deferred, both
};

const std::vector<Ablation>& all_ablations();

struct BenchmarkConfig {
  std::vector<std::string> tasks;  // empty means all tasks
  std::vector<Ablation> ablations; // empty means all four
  int trials = 25;
  std::uint64_t seed = 0;           // trial i uses seed + i
  int particles = 100;
  int jobs = 1;
  Scene scene;
  domain::DomainConfig domain;
  EnvConfig env;
  PolicyOptions policy;             // constrain/defer are overridden per ablation
};

nlohmann::json to_json(const BenchmarkConfig& config);
BenchmarkConfig benchmark_config_from_json(const nlohmann::json& j);

struct TrialRecord {
  std::string task;
  std::string ablation;
  int trial = 0;
  std::uint64_t seed = 0;
  bool success = false;
  std::string reason;            // goal, budget, no-plan, steps, or "fault: ..."
  double planning_time = 0.0;    // modeled seconds, never above the budget
  int replans = 0;               // planning episodes after the first
  int actions_executed = 0;
  int constrained_attempts = 0;
  int constrained_solved = 0;
  double wall = 0.0;             // seconds; not part of the deterministic output
  TrialResult detail;            // full trace, empty for faults
};

nlohmann::json to_json(const TrialRecord& r);

struct CellSummary {
  std::string task;
  std::string ablation;
  int trials = 0;
  int successes = 0;
  double success_rate = 0.0;        // percent
  double mean_success_time = 0.0;   // modeled seconds over successful trials, 0 if none
};

struct BenchmarkResult {
  std::vector<TrialRecord> trials;  // ordered by task, ablation, trial
  std::vector<CellSummary> cells;   // ordered by task, ablation
  const CellSummary& cell(const std::string& task, const std::string& ablation) const;
};

// Runs one trial; faults are caught and recorded as failures.
TrialRecord run_trial(const BenchmarkConfig& config, const std::string& task, const Ablation& ablation,
                      int trial);

BenchmarkResult run_benchmark(const BenchmarkConfig& config);

std::vector<CellSummary> summarize(const std::vector<TrialRecord>& trials);

// Writes trials.jsonl, table.csv, config.json and wall_times.csv into `dir`.
// Everything except wall_times.csv is a pure function of the config.
void write_results(const BenchmarkResult& result, const BenchmarkConfig& config,
                   const std::filesystem::path& dir);

// Table with one row per task and (success %, mean time) per ablation.
std::string format_table(const BenchmarkResult& result);

}  // namespace bsr
