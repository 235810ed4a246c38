#pragma once

#include "bsr/belief.hpp"
#include "bsr/obsmodel.hpp"
#include "bsr/world.hpp"

namespace bsr::testing {

// Object D is believed to sit at x1 or x3 (weight 0.5 each, x2 has zero
// weight); A, B and C are known exactly and sit on the camera rays to x1, x2
// and x3 respectively.
struct OcclusionExample {
  Scene scene;
  Pose x1{kWorldFrame, {0.4, 0.5}};
  Pose x2{kWorldFrame, {1.0, 0.5}};
  Pose x3{kWorldFrame, {1.6, 0.5}};
  std::map<std::string, ParticleBelief> known;
  ParticleBelief d;

  OcclusionExample() {
    scene.camera.origin = {1.0, 3.0};
    scene.objects = {ObjectModel{"A", {0.1, 0.1}}, ObjectModel{"B", {0.1, 0.1}},
                     ObjectModel{"C", {0.1, 0.1}}, ObjectModel{"D", {0.05, 0.05}}};
    known["A"] = ParticleBelief{"A", {Particle{Pose{kWorldFrame, {0.7, 1.75}}, 1.0}}};
    known["B"] = ParticleBelief{"B", {Particle{Pose{kWorldFrame, {1.0, 1.75}}, 1.0}}};
    known["C"] = ParticleBelief{"C", {Particle{Pose{kWorldFrame, {1.3, 1.75}}, 1.0}}};
    d = ParticleBelief{"D", {Particle{x1, 0.5}, Particle{x2, 0.0}, Particle{x3, 0.5}}};
  }

  ObservationHypothesis hypothesis(std::vector<Pose> region, double epsilon = 0.0) const {
    ObservationHypothesis obs;
    obs.object = "D";
    obs.z = region.front();
    obs.region = std::move(region);
    obs.epsilon = epsilon;
    obs.region_mass = 0.0;
    for (const auto& p : d.particles)
      for (const auto& r : obs.region)
        if (p.pose == r) obs.region_mass += p.weight;
    return obs;
  }

  // Objects that fail the visibility test for the region.
  std::set<std::string> must_move(const ObservationHypothesis& obs) const {
    std::set<std::string> out;
    for (const auto& [name, pb] : known)
      if (!test_vis(obs, pb, {}, scene)) out.insert(name);
    return out;
  }
};

}  // namespace bsr::testing
