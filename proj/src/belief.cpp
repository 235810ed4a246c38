#include "bsr/belief.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bsr {

namespace {

constexpr double kPi = 3.14159265358979323846;

}  // namespace

double ParticleBelief::total_weight() const {
  double total = 0.0;
  for (const auto& p : particles) total += p.weight;
  return total;
}

const Particle& ParticleBelief::map() const {
  if (particles.empty()) throw DegenerateBelief("belief for '" + object + "' has no particles");
  std::size_t best = 0;
  for (std::size_t i = 1; i < particles.size(); ++i)
    if (particles[i].weight > particles[best].weight) best = i;
  return particles[best];
}

std::set<std::string> ParticleBelief::frames() const {
  std::set<std::string> out;
  for (const auto& p : particles)
    if (p.weight > 0.0) out.insert(p.pose.frame);
  return out;
}

double ParticleBelief::frame_mass(const std::string& frame) const {
  double mass = 0.0;
  for (const auto& p : particles)
    if (p.pose.frame == frame) mass += p.weight;
  return mass;
}

double ParticleBelief::effective_sample_size() const {
  double sq = 0.0;
  for (const auto& p : particles) sq += p.weight * p.weight;
  return sq > 0.0 ? 1.0 / sq : 0.0;
}

double gaussian_density(const Vec2& r, const Cov2& s) {
  const double det = s.det();
  const double inv_xx = s.yy / det;
  const double inv_xy = -s.xy / det;
  const double inv_yy = s.xx / det;
  const double mahal = r.x * r.x * inv_xx + 2.0 * r.x * r.y * inv_xy + r.y * r.y * inv_yy;
  return std::exp(-0.5 * mahal) / (2.0 * kPi * std::sqrt(det));
}

const Cov2& SensorModel::covariance(const std::string& object) const {
  auto it = per_object.find(object);
  return it == per_object.end() ? sigma : it->second;
}

void SensorModel::validate() const {
  if (!(p_fn >= 0.0 && p_fn < 1.0)) throw std::invalid_argument("p_fn must lie in [0, 1)");
  if (!sigma.positive_definite()) throw std::invalid_argument("sensor covariance must be SPD");
  for (const auto& [o, s] : per_object)
    if (!s.positive_definite()) throw std::invalid_argument("covariance for " + o + " must be SPD");
}

std::string to_string(CommandKind kind) {
  switch (kind) {
    case CommandKind::move: return "move";
    case CommandKind::pick: return "pick";
    case CommandKind::place: return "place";
    case CommandKind::pull: return "pull";
    case CommandKind::push: return "push";
    case CommandKind::press: return "press";
    case CommandKind::detect: return "detect";
  }
  return "?";
}

ParticleBelief normalize(ParticleBelief pb) {
  const double total = pb.total_weight();
  if (!(total > 0.0) || !std::isfinite(total))
    throw DegenerateBelief("belief for '" + pb.object + "' has zero total weight");
  for (auto& p : pb.particles) p.weight /= total;
  return pb;
}

double visibility(const Scene& scene, const SensorModel& sensor, const FactoredBelief& b,
                  const std::string& object, const Vec2& world_point) {
  if (furniture_blocks(scene, world_point)) return 0.0;
  for (const auto& [other, pb] : b.poses) {
    if (other == object || pb.particles.empty()) continue;
    const Vec2 occluder = forward_kinematics(scene, pb.map().pose, b.joints);
    if (blocks(scene, other, occluder, world_point, sensor.camera)) return 0.0;
  }
  return 1.0;
}

namespace {

const ParticleBelief& belief_for(const FactoredBelief& b, const std::string& object) {
  auto it = b.poses.find(object);
  if (it == b.poses.end())
    throw BeliefPreconditionError("no pose belief for '" + object + "' (held or unknown)");
  return it->second;
}

}  // namespace

FactoredBelief update_detection(const FactoredBelief& b, const std::string& object, const Vec2& z,
                                const SensorModel& sensor, const Scene& scene) {
  FactoredBelief out = b;
  ParticleBelief pb = belief_for(b, object);
  const Cov2& sigma = sensor.covariance(object);
  for (auto& p : pb.particles) {
    if (p.weight == 0.0) continue;
    const Vec2 x = forward_kinematics(scene, p.pose, b.joints);
    p.weight *= gaussian_density(z - x, sigma) * (1.0 - sensor.p_fn) *
                visibility(scene, sensor, b, object, x);
  }
  out.poses[object] = normalize(std::move(pb));
  return out;
}

FactoredBelief update_no_detection(const FactoredBelief& b, const std::string& object,
                                   const SensorModel& sensor, const Scene& scene) {
  FactoredBelief out = b;
  ParticleBelief pb = belief_for(b, object);
  for (auto& p : pb.particles) {
    const Vec2 x = forward_kinematics(scene, p.pose, b.joints);
    p.weight *= 1.0 - (1.0 - sensor.p_fn) * visibility(scene, sensor, b, object, x);
  }
  out.poses[object] = normalize(std::move(pb));
  return out;
}

double mass_in_region(const ParticleBelief& pb, const FramedBox& region, const Scene& scene,
                      const JointMap& joints) {
  const Box box = world_box(scene, region, joints);
  double mass = 0.0;
  for (const auto& p : pb.particles)
    if (box.contains_closed(forward_kinematics(scene, p.pose, joints))) mass += p.weight;
  return mass;
}

Pose mean_pose(const ParticleBelief& pb) {
  const auto frames = pb.frames();
  if (frames.size() != 1)
    throw BeliefPreconditionError("belief for '" + pb.object + "' spans several frames");
  Pose mean{*frames.begin(), {}};
  double total = 0.0;
  for (const auto& p : pb.particles) {
    if (p.weight <= 0.0) continue;
    mean.position = mean.position + p.pose.position * p.weight;
    total += p.weight;
  }
  mean.position = mean.position * (1.0 / total);
  return mean;
}

FactoredBelief transition_update(const FactoredBelief& b, const Command& command,
                                 const Scene& scene, const TransitionOptions& options) {
  FactoredBelief out = b;
  switch (command.kind) {
    case CommandKind::move:
      if (command.part == Part::base)
        out.robot.base = command.target.at(0);
      else
        out.robot.arm = {command.target.at(0), command.target.at(1)};
      break;
    case CommandKind::pick: {
      if (out.held) throw BeliefPreconditionError("hand is not empty");
      const ParticleBelief& pb = belief_for(b, command.object);
      const Vec2 target = forward_kinematics(scene, command.pose, b.joints);
      double near = 0.0;
      for (const auto& p : pb.particles)
        if (distance(forward_kinematics(scene, p.pose, b.joints), target) <= options.grasp_tolerance)
          near += p.weight;
      if (near < options.goal_probability)
        throw BeliefPreconditionError("belief for '" + command.object +
                                      "' is not concentrated at the grasp pose");
      out.poses.erase(command.object);
      out.held = Held{command.object, command.grasp};
      out.robot.holding = out.held;
      break;
    }
    case CommandKind::place: {
      if (!out.held || out.held->object != command.object)
        throw BeliefPreconditionError("not holding '" + command.object + "'");
      out.poses[command.object] = ParticleBelief{command.object, {Particle{command.pose, 1.0}}};
      out.held.reset();
      out.robot.holding.reset();
      break;
    }
    case CommandKind::pull:
    case CommandKind::push:
      if (!scene.find_joint(command.joint))
        throw BeliefPreconditionError("unknown joint '" + command.joint + "'");
      out.joints[command.joint] = command.extension;
      break;
    case CommandKind::press: {
      out.stove_on = !out.stove_on;
      if (out.stove_on && scene.stove) {
        const Surface* surface = scene.find_surface(scene.stove->surface);
        for (const auto& [o, pb] : out.poses)
          if (surface && mass_in_region(pb, surface->region(), scene, out.joints) >= 0.5)
            out.cooked.insert(o);
      }
      break;
    }
    case CommandKind::detect:
      break;
  }
  return out;
}

ParticleBelief resample_if_degenerate(const ParticleBelief& pb, std::mt19937_64& rng) {
  const std::size_t n = pb.particles.size();
  if (n == 0 || pb.effective_sample_size() >= 0.5 * static_cast<double>(n)) return pb;
  ParticleBelief normalized = normalize(pb);
  ParticleBelief out{pb.object, {}};
  out.particles.reserve(n);
  std::uniform_real_distribution<double> u(0.0, 1.0 / static_cast<double>(n));
  double target = u(rng);
  double cumulative = 0.0;
  std::size_t i = 0;
  for (std::size_t k = 0; k < n; ++k) {
    while (i + 1 < n && cumulative + normalized.particles[i].weight < target) {
      cumulative += normalized.particles[i].weight;
      ++i;
    }
    out.particles.push_back({normalized.particles[i].pose, 1.0 / static_cast<double>(n)});
    target += 1.0 / static_cast<double>(n);
  }
  return out;
}

// Serialization -------------------------------------------------------------

nlohmann::json to_json(const ParticleBelief& pb) {
  nlohmann::json particles = nlohmann::json::array();
  for (const auto& p : pb.particles)
    particles.push_back({{"frame", p.pose.frame},
                         {"pose", {p.pose.position.x, p.pose.position.y}},
                         {"weight", p.weight}});
  return {{"object", pb.object}, {"particles", particles}};
}

ParticleBelief particle_belief_from_json(const nlohmann::json& j) {
  ParticleBelief pb;
  pb.object = j.at("object").get<std::string>();
  for (const auto& p : j.at("particles")) {
    pb.particles.push_back({Pose{p.at("frame").get<std::string>(),
                                 {p.at("pose").at(0).get<double>(), p.at("pose").at(1).get<double>()}},
                            p.at("weight").get<double>()});
  }
  return pb;
}

nlohmann::json to_json(const FactoredBelief& b) {
  nlohmann::json j;
  j["poses"] = nlohmann::json::array();
  for (const auto& [o, pb] : b.poses) j["poses"].push_back(to_json(pb));
  if (b.held)
    j["held"] = {{"object", b.held->object},
                 {"grasp", {b.held->grasp.offset.x, b.held->grasp.offset.y}}};
  j["joints"] = b.joints;
  j["robot"] = {{"base", b.robot.base}, {"arm", {b.robot.arm.x, b.robot.arm.y}}};
  j["stove_on"] = b.stove_on;
  j["cooked"] = b.cooked;
  return j;
}

FactoredBelief factored_belief_from_json(const nlohmann::json& j) {
  FactoredBelief b;
  for (const auto& pj : j.at("poses")) {
    ParticleBelief pb = particle_belief_from_json(pj);
    b.poses[pb.object] = pb;
  }
  if (j.contains("held")) {
    const auto& h = j.at("held");
    b.held = Held{h.at("object").get<std::string>(),
                  Grasp{{h.at("grasp").at(0).get<double>(), h.at("grasp").at(1).get<double>()}}};
  }
  b.joints = j.at("joints").get<JointMap>();
  b.robot.base = j.at("robot").at("base").get<double>();
  b.robot.arm = {j.at("robot").at("arm").at(0).get<double>(), j.at("robot").at("arm").at(1).get<double>()};
  b.robot.holding = b.held;
  b.stove_on = j.value("stove_on", false);
  b.cooked = j.value("cooked", std::set<std::string>{});
  return b;
}

}  // namespace bsr
