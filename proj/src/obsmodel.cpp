#include "bsr/obsmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bsr {

double determinized_cost(const SelfLoopCosts& c) {
  if (!(c.p_success > 0.0)) return kInfiniteCost;
  return c.success + (c.recover / c.p_success - c.recover);
}

double visibility_lower_bound(const ObservationHypothesis& obs, const ParticleBelief& occluder,
                              const JointMap& joints, const Scene& scene) {
  double worst = 1.0;
  for (const auto& x : obs.region) {
    const Vec2 target = forward_kinematics(scene, x, joints);
    double visible = 0.0;
    for (const auto& p : occluder.particles) {
      if (p.weight <= 0.0) {
        continue;
      }
      const Vec2 occ = forward_kinematics(scene, p.pose, joints);
      if (!blocks(scene, occluder.object, occ, target, scene.camera)) visible += p.weight;
    }
    worst = std::min(worst, visible);
  }
  return std::clamp(worst, 0.0, 1.0);
}

bool test_vis(const ObservationHypothesis& obs, const ParticleBelief& occluder,
              const JointMap& joints, const Scene& scene) {
  return visibility_lower_bound(obs, occluder, joints, scene) >= 1.0 - obs.epsilon;
}

bool is_b_occluded(const ObservationHypothesis& obs,
                   const std::map<std::string, ParticleBelief>& occluders, const JointMap& joints,
                   const Scene& scene) {
  for (const auto& [o2, pb2] : occluders) {
    if (o2 == obs.object) continue;
    if (!test_vis(obs, pb2, joints, scene)) return true;
  }
  return false;
}

ObservationSampler::ObservationSampler(ParticleBelief pb, double delta, double epsilon,
                                       std::mt19937_64& rng, std::optional<std::string> frame)
    : pb_(std::move(pb)), delta_(delta), epsilon_(epsilon) {
  for (std::size_t i = 0; i < pb_.particles.size(); ++i) {
    const auto& p = pb_.particles[i];
    if (p.weight > 0.0 && (!frame || p.pose.frame == *frame)) order_.push_back(i);
  }
  std::shuffle(order_.begin(), order_.end(), rng);
  std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
    return pb_.particles[a].weight > pb_.particles[b].weight;
  });
}

std::optional<ObservationHypothesis> ObservationSampler::next() {
  if (cursor_ >= order_.size()) return std::nullopt;
  const Particle& center = pb_.particles[order_[cursor_++]];
  ObservationHypothesis obs;
  obs.object = pb_.object;
  obs.z = center.pose;
  obs.epsilon = epsilon_;
  for (const auto& p : pb_.particles) {
    if (p.weight <= 0.0 || p.pose.frame != center.pose.frame) continue;
    if (distance(p.pose.position, center.pose.position) <= delta_) {
      obs.region.push_back(p.pose);
      obs.region_mass += p.weight;
    }
  }
  obs.region_mass = std::min(obs.region_mass, 1.0);
  return obs;
}

double detection_probability_bound(const ObservationHypothesis& obs, const DetectionConstants& k) {
  return (1.0 - k.p_fn) * obs.region_mass * std::pow(1.0 - obs.epsilon, k.n - 1);
}

double obs_cost(const ObservationHypothesis& obs, const DetectionConstants& k,
                const DetectCosts& costs) {
  return determinized_cost({costs.base, costs.recover, detection_probability_bound(obs, k)});
}

}  // namespace bsr
