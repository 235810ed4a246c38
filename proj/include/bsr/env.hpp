#pragma once

// Simulated world that executes commands on the latent state and returns
// observations.

#include <cstdint>
#include <random>

#include "bsr/belief.hpp"
#include "bsr/world.hpp"

namespace bsr {

struct EnvConfig {
  double base_sigma = 0.02;
  double arm_sigma = 0.005;
  double manipulation_success = 0.95;
};

class EnvSimulator {
 public:
  EnvSimulator(Scene scene, SensorModel sensor, EnvConfig config, LatentState initial,
               std::uint64_t seed);

  Observation step(const Command& command);
  const LatentState& state() const { return state_; }
  const Scene& scene() const { return scene_; }

  // Camera check against furniture and every unheld object in the latent state.
  bool visible(const std::string& object) const;

 private:
  bool manipulation_succeeds();
  bool ee_near(const Vec2& target, double tolerance) const;
  Observation observe(bool success) const;

  Scene scene_;
  SensorModel sensor_;
  EnvConfig config_;
  LatentState state_;
  std::mt19937_64 rng_;
};

}  // namespace bsr
