#pragma once

// Replanning policy: determinize the belief, plan, execute the first action,
// update the belief, and repeat. Optionally constrains each new plan to follow
// the remainder of the previous one.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "bsr/domain.hpp"
#include "bsr/env.hpp"
#include "bsr/planner.hpp"
#include "bsr/tasks.hpp"

namespace bsr {

struct PolicyOptions {
  bool constrain = true;
  bool defer = true;
  double budget = 60.0;                 // modeled seconds per trial
  double constrained_fraction = 0.25;   // of the remaining budget
  int max_steps = 60;
  bool resample = false;
  double prune_weight = 1e-9;           // particles below this normalized weight are dropped
  plan::PlannerOptions planner;
};

// Plan skeleton: schema names with arguments that are either constants or
// shared symbols "@vN" standing for non-constant values.
struct SkeletonStep {
  std::string name;
  std::vector<std::string> args;
};
using Skeleton = std::vector<SkeletonStep>;

// Values in `unshared` get a fresh symbol at every occurrence.
Skeleton extract_skeleton(const std::vector<pl::GroundAction>& plan, const pl::Problem& problem,
                          const std::set<pl::Value>& unshared = {});

// Replaces the actions of `problem` by one copy per skeleton step that can
// only be applied in order and must agree with the skeleton.
void constrain_plan(pl::Problem& problem, const Skeleton& skeleton);

// Outcome of one constrained planning attempt.
struct ConstrainedAttempt {
  int episode = 0;
  Skeleton skeleton;
  bool solved = false;
  // Solution arguments as value labels, aligned with the skeleton.
  std::vector<SkeletonStep> solution;
};

struct EpisodeRecord {
  int episode = 0;
  std::string action;       // executed action, empty when none
  std::string command;      // command kind
  bool success = true;      // reported by the environment
  bool detected = false;
  int plan_length = 0;
  std::vector<std::string> plan;
  bool complete = true;
  bool constrained = false;  // plan came from the constrained attempt
  double modeled = 0.0;      // clock at the end of the episode
  // Current configuration labels and motion calls evaluated in the episode.
  std::string base_now, arm_now;
  std::vector<std::string> motion_inputs;
};

struct TrialResult {
  std::string task;
  std::uint64_t seed = 0;
  bool success = false;
  std::string reason;  // goal, no-plan, budget, steps
  int steps = 0;
  double modeled = 0.0;
  double wall = 0.0;
  FactoredBelief final_belief;
  LatentState final_latent;
  std::vector<EpisodeRecord> episodes;
  std::vector<ConstrainedAttempt> attempts;
};

TrialResult run_policy(const domain::KitchenDomain& domain, const TaskInstance& task,
                       EnvSimulator& env, const PolicyOptions& options, std::uint64_t seed);

}  // namespace bsr
