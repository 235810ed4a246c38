#pragma once

// Factored belief: one particle filter per object pose, point estimates for
// the robot, the drawer joints and the stove.

#include <array>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "bsr/world.hpp"
#include "json.hpp"

namespace bsr {

struct Particle {
  Pose pose;
  double weight = 0.0;
};

struct ParticleBelief {
  std::string object;
  std::vector<Particle> particles;

  double total_weight() const;
  // Highest-weight particle; first one on ties.
  const Particle& map() const;
  std::set<std::string> frames() const;  // frames carrying positive weight
  double frame_mass(const std::string& frame) const;
  double effective_sample_size() const;
};

// Symmetric positive definite 2x2 matrix [[xx, xy], [xy, yy]].
struct Cov2 {
  double xx = 1e-4;
  double xy = 0.0;
  double yy = 1e-4;

  static Cov2 isotropic(double variance) { return {variance, 0.0, variance}; }
  double det() const { return xx * yy - xy * xy; }
  bool positive_definite() const { return xx > 0.0 && det() > 0.0; }
};

double gaussian_density(const Vec2& residual, const Cov2& sigma);

struct SensorModel {
  double p_fn = 0.1;
  Cov2 sigma = Cov2::isotropic(1e-4);
  std::map<std::string, Cov2> per_object;
  Camera camera;

  const Cov2& covariance(const std::string& object) const;
  void validate() const;
};

struct FactoredBelief {
  std::map<std::string, ParticleBelief> poses;
  std::optional<Held> held;
  JointMap joints;
  RobotState robot;
  bool stove_on = false;
  std::set<std::string> cooked;
};

class DegenerateBelief : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BeliefPreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Commands the executive sends to the robot; also the transition input for
// belief updates.
enum class CommandKind { move, pick, place, pull, push, press, detect };
std::string to_string(CommandKind kind);

struct Command {
  CommandKind kind = CommandKind::move;
  Part part = Part::base;
  std::vector<double> target;  // move: base {x} or arm offset {dx, dy}
  std::string object;          // pick, place, detect
  Grasp grasp;                 // pick, place
  Pose pose;                   // pick: believed object pose, place: target pose
  std::string joint;           // pull, push
  double extension = 0.0;      // pull, push: target extension
};

struct Observation {
  bool success = true;
  RobotState robot;
  JointMap joints;
  bool stove_on = false;
  std::set<std::string> cooked;
  // detect only
  bool detected = false;
  Vec2 z;
};

ParticleBelief normalize(ParticleBelief pb);

// Indicator that `world_point` is seen by the camera, using furniture and the
// point-estimate (MAP) poses of every other unheld object.
double visibility(const Scene& scene, const SensorModel& sensor, const FactoredBelief& b,
                  const std::string& object, const Vec2& world_point);

FactoredBelief update_detection(const FactoredBelief& b, const std::string& object, const Vec2& z,
                                const SensorModel& sensor, const Scene& scene);
FactoredBelief update_no_detection(const FactoredBelief& b, const std::string& object,
                                   const SensorModel& sensor, const Scene& scene);

struct TransitionOptions {
  double grasp_tolerance = 0.03;
  double goal_probability = 0.95;  // required mass near the commanded grasp pose
};

FactoredBelief transition_update(const FactoredBelief& b, const Command& command,
                                 const Scene& scene, const TransitionOptions& options = {});

double mass_in_region(const ParticleBelief& pb, const FramedBox& region, const Scene& scene,
                      const JointMap& joints);

// Mean world pose of the belief (all particles must share one frame).
Pose mean_pose(const ParticleBelief& pb);

// Systematic resampling when the effective sample size drops below N/2.
ParticleBelief resample_if_degenerate(const ParticleBelief& pb, std::mt19937_64& rng);

nlohmann::json to_json(const ParticleBelief& pb);
ParticleBelief particle_belief_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FactoredBelief& b);
FactoredBelief factored_belief_from_json(const nlohmann::json& j);

}  // namespace bsr
