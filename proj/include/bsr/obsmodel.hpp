#pragma once

// Determinized observation model: self-loop action costs, the per-occluder
// worst-case visibility bound, and the detection-probability lower bound that
// prices a detect action.

#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "bsr/belief.hpp"
#include "bsr/world.hpp"

namespace bsr {

inline constexpr double kInfiniteCost = std::numeric_limits<double>::infinity();

struct SelfLoopCosts {
  double success = 1.0;  // upper bound on the cost of a successful outcome
  double recover = 0.0;  // upper bound on the cost of returning after failure
  double p_success = 1.0;
};

// c + c'(1/p - 1); infinite when p = 0.
double determinized_cost(const SelfLoopCosts& c);

// A hypothesized detection: the observed pose z plus the finite region of
// support points (same frame as z) it is taken to come from.
struct ObservationHypothesis {
  std::string object;
  Pose z;
  std::vector<Pose> region;
  double epsilon = 0.05;
  double region_mass = 0.0;
};

// Joints used to place the hypothesis and occluders in the world.
double visibility_lower_bound(const ObservationHypothesis& obs, const ParticleBelief& occluder,
                              const JointMap& joints, const Scene& scene);
bool test_vis(const ObservationHypothesis& obs, const ParticleBelief& occluder,
              const JointMap& joints, const Scene& scene);
bool is_b_occluded(const ObservationHypothesis& obs,
                   const std::map<std::string, ParticleBelief>& occluders, const JointMap& joints,
                   const Scene& scene);

// Enumerates hypotheses one support particle at a time, heaviest first (ties
// in a seeded random order), each with the delta-ball region around it.
class ObservationSampler {
 public:
  ObservationSampler(ParticleBelief pb, double delta, double epsilon, std::mt19937_64& rng,
                     std::optional<std::string> frame = std::nullopt);
  std::optional<ObservationHypothesis> next();
  std::size_t remaining() const { return order_.size() - cursor_; }

 private:
  ParticleBelief pb_;
  double delta_;
  double epsilon_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

struct DetectionConstants {
  int n = 1;  // movable objects in the scene
  double p_fn = 0.1;
};

double detection_probability_bound(const ObservationHypothesis& obs, const DetectionConstants& k);

struct DetectCosts {
  double base = 1.0;
  double recover = 1.0;
};

double obs_cost(const ObservationHypothesis& obs, const DetectionConstants& k,
                const DetectCosts& costs = {});

}  // namespace bsr
