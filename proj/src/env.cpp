#include "bsr/env.hpp"

#include <algorithm>
#include <cmath>

#include "bsr/log.hpp"

namespace bsr {

EnvSimulator::EnvSimulator(Scene scene, SensorModel sensor, EnvConfig config, LatentState initial,
                           std::uint64_t seed)
    : scene_(std::move(scene)),
      sensor_(std::move(sensor)),
      config_(config),
      state_(std::move(initial)),
      rng_(seed) {
  sensor_.camera = scene_.camera;
  sensor_.validate();
}

bool EnvSimulator::manipulation_succeeds() {
  return std::bernoulli_distribution(config_.manipulation_success)(rng_);
}

bool EnvSimulator::ee_near(const Vec2& target, double tolerance) const {
  return distance(end_effector(scene_.robot, state_.robot.base, state_.robot.arm), target) <= tolerance;
}

Observation EnvSimulator::observe(bool success) const {
  Observation o;
  o.success = success;
  o.robot = state_.robot;
  o.joints = state_.joints;
  o.stove_on = state_.stove_on;
  o.cooked = state_.cooked;
  return o;
}

bool EnvSimulator::visible(const std::string& object) const {
  auto it = state_.object_poses.find(object);
  if (it == state_.object_poses.end()) return false;
  const Vec2 target = forward_kinematics(scene_, it->second, state_.joints);
  if (furniture_blocks(scene_, target)) return false;
  for (const auto& [other, pose] : state_.object_poses) {
    if (other == object) continue;
    if (blocks(scene_, other, forward_kinematics(scene_, pose, state_.joints), target, scene_.camera))
      return false;
  }
  return true;
}

Observation EnvSimulator::step(const Command& c) {
  const RobotModel& robot = scene_.robot;
  switch (c.kind) {
    case CommandKind::move: {
      if (c.part == Part::base) {
        std::normal_distribution<double> noise(0.0, config_.base_sigma);
        state_.robot.base = std::clamp(c.target.at(0) + noise(rng_), robot.rail_min, robot.rail_max);
      } else {
        std::normal_distribution<double> noise(0.0, config_.arm_sigma);
        Vec2 arm{c.target.at(0) + noise(rng_), c.target.at(1) + noise(rng_)};
        arm.y = std::min(arm.y, 0.0);
        if (arm.norm() > robot.reach) arm = arm * (robot.reach / arm.norm());
        state_.robot.arm = arm;
      }
      return observe(true);
    }
    case CommandKind::pick: {
      auto it = state_.object_poses.find(c.object);
      if (state_.robot.holding || it == state_.object_poses.end()) return observe(false);
      const Vec2 world = forward_kinematics(scene_, it->second, state_.joints);
      const Vec2 ee = world - c.grasp.offset;
      if (!ee_near(ee, robot.grasp_tolerance) || !inverse_kinematics(scene_, state_.robot.base, ee))
        return observe(false);
      if (!manipulation_succeeds()) return observe(false);
      state_.object_poses.erase(it);
      state_.robot.holding = Held{c.object, c.grasp};
      return observe(true);
    }
    case CommandKind::place: {
      if (!state_.robot.holding || state_.robot.holding->object != c.object) return observe(false);
      const Vec2 target = forward_kinematics(scene_, c.pose, state_.joints);
      if (!ee_near(target - c.grasp.offset, robot.grasp_tolerance)) {
        log::debug("place ", c.object, ": gripper not at target");
        return observe(false);
      }
      if (!manipulation_succeeds()) return observe(false);
      const Surface* surface = nullptr;
      for (const auto& s : scene_.surfaces)
        if (s.frame == c.pose.frame && c.pose.position.x >= s.x_min && c.pose.position.x <= s.x_max)
          surface = &s;
      if (!surface) return observe(false);
      // The object drops from the actual gripper position onto the surface.
      const Vec2 ee = end_effector(robot, state_.robot.base, state_.robot.arm);
      const Pose local = attach(scene_, ee + c.grasp.offset, c.pose.frame, state_.joints);
      const double half = scene_.object(c.object).half.x;
      if (local.position.x - half < surface->x_min || local.position.x + half > surface->x_max) {
        log::debug("place ", c.object, ": off surface at x=", local.position.x);
        return observe(false);
      }
      const Pose rest = resting_pose(scene_, *surface, c.object, local.position.x);
      std::vector<Placement> all{{c.object, forward_kinematics(scene_, rest, state_.joints)}};
      for (const auto& [o, pose] : state_.object_poses)
        all.push_back({o, forward_kinematics(scene_, pose, state_.joints)});
      if (!collision_free(scene_, all)) {
        log::debug("place ", c.object, ": collision at x=", local.position.x);
        return observe(false);
      }
      state_.object_poses[c.object] = rest;
      state_.robot.holding.reset();
      return observe(true);
    }
    case CommandKind::pull:
    case CommandKind::push: {
      const PrismaticJoint* joint = scene_.find_joint(c.joint);
      if (!joint || state_.robot.holding) return observe(false);
      const double from = state_.joints[c.joint];
      if (!ee_near(joint->closed_origin + joint->axis * from + joint->handle, robot.handle_tolerance))
        return observe(false);
      // Stacked drawers: only one may be open at a time.
      if (c.kind == CommandKind::pull)
        for (const auto& [other, extension] : state_.joints)
          if (other != c.joint && extension > 1e-9) return observe(false);
      if (c.kind == CommandKind::push)
        for (const auto& [o, pose] : state_.object_poses)
          if (pose.frame == c.joint && scene_.object(o).tall(joint->clearance)) return observe(false);
      if (!manipulation_succeeds()) return observe(false);
      const double to = std::clamp(c.extension, 0.0, joint->max_extension);
      state_.joints[c.joint] = to;
      state_.robot.arm = state_.robot.arm + joint->axis * (to - from);
      return observe(true);
    }
    case CommandKind::press: {
      if (!scene_.stove || state_.robot.holding) return observe(false);
      if (!ee_near(scene_.stove->button, robot.grasp_tolerance)) return observe(false);
      if (!manipulation_succeeds()) return observe(false);
      state_.stove_on = !state_.stove_on;
      if (state_.stove_on) {
        const Surface* s = scene_.find_surface(scene_.stove->surface);
        const Box region = world_box(scene_, s->region(), state_.joints);
        for (const auto& [o, pose] : state_.object_poses)
          if (region.contains_closed(forward_kinematics(scene_, pose, state_.joints))) state_.cooked.insert(o);
      }
      return observe(true);
    }
    case CommandKind::detect: {
      Observation o = observe(true);
      if (!visible(c.object)) return o;
      if (!std::bernoulli_distribution(1.0 - sensor_.p_fn)(rng_)) return o;
      const Vec2 x = forward_kinematics(scene_, state_.object_poses.at(c.object), state_.joints);
      const Cov2& s = sensor_.covariance(c.object);
      // Cholesky factor of the 2x2 covariance.
      const double l11 = std::sqrt(s.xx);
      const double l21 = s.xy / l11;
      const double l22 = std::sqrt(s.yy - l21 * l21);
      std::normal_distribution<double> n(0.0, 1.0);
      const double u = n(rng_), v = n(rng_);
      o.detected = true;
      o.z = {x.x + l11 * u, x.y + l21 * u + l22 * v};
      return o;
    }
  }
  return observe(false);
}

}  // namespace bsr
