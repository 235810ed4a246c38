#pragma once

// Kitchen domain: goal specifications over beliefs, determinization of a
// factored belief into a planning problem with streams, and translation of
// planned actions into robot commands.

#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "bsr/belief.hpp"
#include "bsr/effort.hpp"
#include "bsr/obsmodel.hpp"
#include "bsr/planlang.hpp"
#include "bsr/world.hpp"

namespace bsr::domain {

struct GoalTerm {
  enum class Kind { in_region, joint_at, cooked, hand_empty };
  Kind kind = Kind::hand_empty;
  std::string object;      // in_region, cooked
  std::string region;      // surface id, in_region
  double threshold = 0.95;  // in_region
  std::string joint;       // joint_at
  double extension = 0.0;  // joint_at
  double tolerance = 0.01;  // joint_at

  static GoalTerm in(std::string object, std::string region, double threshold = 0.95);
  static GoalTerm joint_at(std::string joint, double extension, double tolerance = 0.01);
  static GoalTerm cooked(std::string object);
  static GoalTerm hand_empty();
};

struct GoalSpec {
  std::vector<GoalTerm> terms;
};

std::string to_string(const GoalSpec& goal);

// Direct evaluation of the goal on a belief.
bool goal_holds(const GoalSpec& goal, const FactoredBelief& b, const Scene& scene);

struct DomainConfig {
  SensorModel sensor;
  double delta = 0.1;       // observation region radius
  double epsilon = 0.05;    // per-occluder visibility slack
  double p_success = 0.95;  // manipulation success probability
  double manipulation_cost = 1.0;
  double detect_cost = 1.0;
  double base_move_cost = 2.0;
  double arm_move_cost = 1.0;
  double grasp_tolerance = 0.03;
  double localized_probability = 0.95;
  double kin_tolerance = 0.01;  // current arm accepted when this close to an IK solution
  double open_extension = 0.6;
  double min_open = 0.55;       // extensions at or above this count as open
  double base_step = 0.05;      // grid for sampled base positions
  double max_cost = 100.0;
  double placement_margin = 0.03;  // horizontal gap kept to estimated neighbours
  int placement_attempts = 25;
};

// Translation table filled in by determinize.
struct Determinized {
  pl::Problem problem;
  FactoredBelief belief;  // belief the problem was built from
};

class KitchenDomain {
 public:
  KitchenDomain(Scene scene, DomainConfig config);

  const Scene& scene() const { return scene_; }
  const DomainConfig& config() const { return config_; }
  const std::shared_ptr<pl::Vocabulary>& vocab() const { return vocab_; }

  // Builds the problem for one planning episode. Streams charge their work
  // to `clock` and draw randomness from `seed`.
  Determinized determinize(const FactoredBelief& b, const GoalSpec& goal, std::uint64_t seed,
                           EffortClock& clock) const;

  Command command(const Determinized& d, const pl::GroundAction& action) const;

  // Schemata the planner should schedule as early as possible.
  std::set<std::string> observation_actions() const { return {"detect"}; }

  // Plan ordering preferences: base moves ahead of arm moves whose targets
  // depend on them, then observations as early as possible.
  std::vector<std::string> early_actions() const { return {"move(base)", "detect"}; }

  // Number of movable objects, used by the detection bound.
  int movable_objects(const FactoredBelief& b) const;

 private:
  Scene scene_;
  DomainConfig config_;
  std::shared_ptr<pl::Vocabulary> vocab_;
};

// Stable 64-bit hash used to derive per-stream seeds.
std::uint64_t fnv1a(const std::string& text, std::uint64_t seed = 14695981039346656037ull);

Grasp top_grasp(const Scene& scene, const std::string& object);

}  // namespace bsr::domain
