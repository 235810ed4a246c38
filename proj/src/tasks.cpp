#include "bsr/tasks.hpp"

#include <stdexcept>

namespace bsr {

using domain::GoalTerm;

namespace {

RobotState initial_robot() {
  RobotState r;
  r.base = 1.0;
  r.arm = {0.0, -0.3};
  return r;
}

ParticleBelief known(const std::string& object, const Pose& pose) {
  return ParticleBelief{object, {Particle{pose, 1.0}}};
}

Pose uniform_pose(const Scene& scene, const std::string& surface, const std::string& object,
                  std::mt19937_64& rng) {
  const Surface& s = *scene.find_surface(surface);
  const double half = scene.object(object).half.x;
  std::uniform_real_distribution<double> x(s.x_min + half, s.x_max - half);
  return resting_pose(scene, s, object, x(rng));
}

bool hidden(const Scene& scene, const LatentState& w, const std::string& object) {
  const Vec2 target = forward_kinematics(scene, w.object_poses.at(object), w.joints);
  if (furniture_blocks(scene, target)) return true;
  for (const auto& [other, pose] : w.object_poses) {
    if (other == object) continue;
    if (blocks(scene, other, forward_kinematics(scene, pose, w.joints), target, scene.camera))
      return true;
  }
  return false;
}

std::vector<Placement> placements(const Scene& scene, const LatentState& w) {
  std::vector<Placement> out;
  for (const auto& [o, pose] : w.object_poses)
    out.push_back({o, forward_kinematics(scene, pose, w.joints)});
  return out;
}

void finish(TaskInstance& t) {
  t.belief.robot = t.latent.robot;
  t.belief.joints = t.latent.joints;
  t.belief.stove_on = t.latent.stove_on;
  t.belief.cooked = t.latent.cooked;
}

}  // namespace

const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names{"inspect", "stow", "swap", "cook"};
  return names;
}

ParticleBelief uniform_prior(const Scene& scene, const std::string& object,
                             const std::vector<std::string>& surfaces, int particles,
                             std::mt19937_64& rng) {
  if (particles <= 0 || surfaces.empty()) throw std::invalid_argument("empty prior");
  ParticleBelief pb{object, {}};
  const double w = 1.0 / particles;
  for (int i = 0; i < particles; ++i)
    pb.particles.push_back({uniform_pose(scene, surfaces[i % surfaces.size()], object, rng), w});
  return pb;
}

TaskInstance make_task(const std::string& name, const Scene& scene, int particles,
                       std::uint64_t seed) {
  std::mt19937_64 rng(domain::fnv1a(name, seed));
  TaskInstance t;
  t.name = name;
  t.latent.robot = initial_robot();
  for (const auto& j : scene.joints) t.latent.joints[j.id] = 0.0;

  if (name == "inspect" || name == "swap") {
    const std::string actual = name == "inspect" ? "bottom" : "top";
    t.latent.object_poses["block"] = uniform_pose(scene, actual, "block", rng);
    t.belief.poses["block"] = uniform_prior(scene, "block", {"top", "bottom"}, particles, rng);
    t.goal.terms = {GoalTerm::in("block", "bottom"), GoalTerm::joint_at("bottom", 0.0)};
  } else if (name == "stow") {
    std::uniform_real_distribution<double> extension(0.55, 0.6);
    t.latent.joints["top"] = extension(rng);
    t.latent.object_poses["sugar"] = uniform_pose(scene, "top", "sugar", rng);
    t.latent.object_poses["block"] = uniform_pose(scene, "counter", "block", rng);
    t.belief.poses["sugar"] = uniform_prior(scene, "sugar", {"top"}, particles, rng);
    t.belief.poses["block"] = uniform_prior(scene, "block", {"counter"}, particles, rng);
    t.goal.terms = {GoalTerm::in("block", "top"), GoalTerm::joint_at("top", 0.0)};
  } else if (name == "cook") {
    // Boxes anywhere on the counter; the block hides in the shadow of one.
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000) throw std::runtime_error("no hidden block placement");
      for (const auto& o : {"sugar", "cracker", "block"})
        t.latent.object_poses[o] = uniform_pose(scene, "counter", o, rng);
      if (collision_free(scene, placements(scene, t.latent)) && hidden(scene, t.latent, "block"))
        break;
    }
    for (const auto& o : {"sugar", "cracker"})
      t.belief.poses[o] = known(o, t.latent.object_poses[o]);
    ParticleBelief prior{"block", {}};
    LatentState probe = t.latent;
    while (static_cast<int>(prior.particles.size()) < particles) {
      probe.object_poses["block"] = uniform_pose(scene, "counter", "block", rng);
      if (collision_free(scene, placements(scene, probe)))
        prior.particles.push_back({probe.object_poses["block"], 1.0 / particles});
    }
    t.belief.poses["block"] = std::move(prior);
    t.goal.terms = {GoalTerm::cooked("block")};
  } else {
    throw std::invalid_argument("unknown task '" + name + "'");
  }
  finish(t);
  return t;
}

}  // namespace bsr
