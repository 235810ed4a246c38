#pragma once

// Benchmark tasks: latent world, prior belief and goal for each trial.

#include <cstdint>
#include <string>
#include <vector>

#include "bsr/belief.hpp"
#include "bsr/domain.hpp"
#include "bsr/world.hpp"

namespace bsr {

struct TaskInstance {
  std::string name;
  LatentState latent;
  FactoredBelief belief;
  domain::GoalSpec goal;
};

const std::vector<std::string>& task_names();

// Deterministic in (name, seed). Throws std::invalid_argument for unknown names.
TaskInstance make_task(const std::string& name, const Scene& scene, int particles,
                       std::uint64_t seed);

// Uniform particles over the resting poses of the listed surfaces, split
// evenly between surfaces.
ParticleBelief uniform_prior(const Scene& scene, const std::string& object,
                             const std::vector<std::string>& surfaces, int particles,
                             std::mt19937_64& rng);

}  // namespace bsr
