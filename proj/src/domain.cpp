#include "bsr/domain.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace bsr::domain {

using pl::Atom;
using pl::Formula;
using pl::PredKind;
using pl::StreamOutput;
using pl::StreamSchema;
using pl::Term;
using pl::Value;

GoalTerm GoalTerm::in(std::string object, std::string region, double threshold) {
  GoalTerm t;
  t.kind = Kind::in_region;
  t.object = std::move(object);
  t.region = std::move(region);
  t.threshold = threshold;
  return t;
}

GoalTerm GoalTerm::joint_at(std::string joint, double extension, double tolerance) {
  GoalTerm t;
  t.kind = Kind::joint_at;
  t.joint = std::move(joint);
  t.extension = extension;
  t.tolerance = tolerance;
  return t;
}

GoalTerm GoalTerm::cooked(std::string object) {
  GoalTerm t;
  t.kind = Kind::cooked;
  t.object = std::move(object);
  return t;
}

GoalTerm GoalTerm::hand_empty() { return GoalTerm{}; }

std::string to_string(const GoalSpec& goal) {
  std::ostringstream out;
  for (std::size_t i = 0; i < goal.terms.size(); ++i) {
    const GoalTerm& t = goal.terms[i];
    if (i) out << " & ";
    switch (t.kind) {
      case GoalTerm::Kind::in_region:
        out << "BIn(" << t.object << ", " << t.region << ", " << t.threshold << ")";
        break;
      case GoalTerm::Kind::joint_at:
        out << "JointAt(" << t.joint << ", " << t.extension << ", " << t.tolerance << ")";
        break;
      case GoalTerm::Kind::cooked: out << "Cooked(" << t.object << ")"; break;
      case GoalTerm::Kind::hand_empty: out << "HandEmpty"; break;
    }
  }
  return out.str();
}

bool goal_holds(const GoalSpec& goal, const FactoredBelief& b, const Scene& scene) {
  for (const GoalTerm& t : goal.terms) {
    switch (t.kind) {
      case GoalTerm::Kind::in_region: {
        auto it = b.poses.find(t.object);
        const Surface* s = scene.find_surface(t.region);
        if (it == b.poses.end() || !s) return false;
        if (mass_in_region(it->second, s->region(), scene, b.joints) < t.threshold) return false;
        break;
      }
      case GoalTerm::Kind::joint_at: {
        auto it = b.joints.find(t.joint);
        if (it == b.joints.end() || std::abs(it->second - t.extension) > t.tolerance) return false;
        break;
      }
      case GoalTerm::Kind::cooked:
        if (!b.cooked.count(t.object)) return false;
        break;
      case GoalTerm::Kind::hand_empty:
        if (b.held) return false;
        break;
    }
  }
  return true;
}

std::uint64_t fnv1a(const std::string& text, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

Grasp top_grasp(const Scene& scene, const std::string& object) {
  return Grasp{{0.0, -scene.object(object).half.y}};
}

namespace {

const char* kPredicates[][3] = {
    // static facts
    {"Obj", "1", "s"}, {"Conf", "2", "s"}, {"BaseNow", "1", "s"}, {"Accessible", "2", "s"},
    {"Region", "1", "s"}, {"RegionFrame", "2", "s"}, {"SoleRegion", "2", "s"},
    {"Target", "2", "s"}, {"PlaceRegion", "2", "s"}, {"NearRegion", "2", "s"}, {"Estimated", "1", "s"}, {"Other", "2", "s"}, {"Tall", "1", "s"},
    {"Stove", "1", "s"}, {"StoveRegion", "2", "s"}, {"Opens", "3", "s"}, {"Closes", "3", "s"},
    {"Stroke", "3", "s"}, {"JointGoal", "2", "s"}, {"Grasp", "2", "s"}, {"PoseB", "2", "s"},
    {"PlacePose", "2", "s"}, {"InFrame", "2", "s"}, {"Supports", "2", "s"},
    {"Uncertain", "1", "s"}, {"Localized", "1", "s"}, {"BIn", "2", "s"}, {"ObsOf", "2", "s"},
    {"ObsB", "3", "s"}, {"ObsFrame", "2", "s"}, {"BeliefUpdate", "4", "s"}, {"BVis", "2", "s"},
    {"BaseReach", "4", "s"}, {"Kin", "5", "s"}, {"HandleKin", "6", "s"},
    {"ButtonKin", "3", "s"}, {"Motion", "4", "s"}, {"OtherJoint", "2", "s"}, {"Extended", "1", "s"},
    // fluents
    {"AtConf", "2", "f"}, {"AtAngle", "2", "f"}, {"HandEmpty", "0", "f"}, {"AtGrasp", "2", "f"},
    {"AtPoseB", "2", "f"}, {"Cooked", "1", "f"}, {"Applied", "1", "f"}, {"Bound", "1", "f"},
    {"Assigned", "2", "f"},
    // derived
    {"BOccluded", "2", "d"}, {"Obstructed", "1", "d"}, {"OtherOpen", "1", "d"},
    // functions
    {"MoveCost", "1", "n"}, {"ObsCost", "2", "n"},
};

PredKind kind_of(char c) {
  switch (c) {
    case 's': return PredKind::static_fact;
    case 'f': return PredKind::fluent;
    case 'd': return PredKind::derived;
    default: return PredKind::function;
  }
}

class FnGenerator : public pl::Generator {
 public:
  explicit FnGenerator(std::function<std::optional<StreamOutput>()> fn) : fn_(std::move(fn)) {}
  std::optional<StreamOutput> next() override { return fn_(); }

 private:
  std::function<std::optional<StreamOutput>()> fn_;
};

std::unique_ptr<pl::Generator> once(std::function<std::optional<StreamOutput>()> fn) {
  auto done = std::make_shared<bool>(false);
  return std::make_unique<FnGenerator>([fn = std::move(fn), done]() -> std::optional<StreamOutput> {
    if (*done) return std::nullopt;
    *done = true;
    return fn();
  });
}

StreamOutput out(std::vector<Value> values) { return StreamOutput{std::move(values), {}}; }

// Episode state shared by all stream implementations.
struct Context {
  const Scene* scene = nullptr;
  DomainConfig cfg;
  FactoredBelief belief;
  std::shared_ptr<pl::ValueStore> values;
  std::shared_ptr<pl::Vocabulary> vocab;
  EffortClock* clock = nullptr;
  std::uint64_t seed = 0;
  int n = 1;
  std::map<std::string, double> accessible;
  std::map<std::pair<std::string, std::string>, double> thresholds;
  Value base_now, arm_now;

  const std::string& name(Value v) const { return values->name(v); }
  const ParticleBelief& pb(Value v) const { return std::get<ParticleBelief>(values->payload(v)); }
  const ObservationHypothesis& obs(Value v) const {
    return std::get<ObservationHypothesis>(values->payload(v));
  }
  double scalar(Value v) const { return values->tuple(v).at(0); }
  Vec2 vec(Value v) const {
    const auto& t = values->tuple(v);
    return {t.at(0), t.at(1)};
  }

  Value base_conf(double x) const { return values->numeric({x}, "q"); }
  Value arm_conf(const Vec2& a) const { return values->numeric({a.x, a.y}, "aq"); }
  Value extension(double a) const { return values->numeric({a}, "a"); }

  JointMap joints_for(const std::string& frame) const {
    JointMap j = belief.joints;
    if (frame != kWorldFrame) j[frame] = accessible.at(frame);
    return j;
  }

  std::mt19937_64 rng(const std::string& stream, const std::vector<Value>& in) const {
    std::string key = stream;
    for (Value v : in) key += "|" + values->str(v);
    return std::mt19937_64(fnv1a(key, seed));
  }

  double threshold(const std::string& object, const std::string& region) const {
    auto it = thresholds.find({object, region});
    return it == thresholds.end() ? cfg.localized_probability : it->second;
  }

  // End-effector target for grasping the object at its belief mean.
  std::optional<Vec2> grasp_point(const std::string& object, const ParticleBelief& b) const {
    const auto frames = b.frames();
    if (frames.size() != 1) return std::nullopt;
    const Pose mean = mean_pose(b);
    const Vec2 world = forward_kinematics(*scene, mean, joints_for(mean.frame));
    return world - top_grasp(*scene, object).offset;
  }

  Vec2 handle_point(const std::string& joint, double extension) const {
    const PrismaticJoint* j = scene->find_joint(joint);
    return j->closed_origin + j->axis * extension + j->handle;
  }

  std::vector<double> base_candidates(const Vec2& target, std::mt19937_64& rng) const {
    const RobotModel& robot = scene->robot;
    std::vector<double> out;
    const double step = cfg.base_step;
    const int lo = static_cast<int>(std::ceil((std::max(robot.rail_min, target.x - robot.reach)) / step));
    const int hi = static_cast<int>(std::floor((std::min(robot.rail_max, target.x + robot.reach)) / step));
    for (int k = lo; k <= hi; ++k) {
      const double x = k * step;
      if (reachable(robot, x, target)) out.push_back(x);
    }
    std::shuffle(out.begin(), out.end(), rng);
    return out;
  }

  std::optional<Pose> pose_under_gripper(const std::string& object, const std::string& region) const {
    const Surface* surface = scene->find_surface(region);
    const JointMap joints = joints_for(surface->frame);
    if (surface->frame != kWorldFrame && std::abs(belief.joints.at(surface->frame) - joints.at(surface->frame)) > 1e-9)
      return std::nullopt;
    const Vec2 ee = end_effector(scene->robot, belief.robot.base, belief.robot.arm);
    const Vec2 held = ee + top_grasp(*scene, object).offset;
    const Pose local = attach(*scene, held, surface->frame, joints);
    const double half = scene->object(object).half.x;
    if (local.position.x - half < surface->x_min || local.position.x + half > surface->x_max)
      return std::nullopt;
    const Pose rest = resting_pose(*scene, *surface, object, local.position.x);
    if (std::abs(rest.position.y - local.position.y) > cfg.kin_tolerance) return std::nullopt;
    clock->charge(clock->costs().placement);
    // Half the sampling margin, so actuation noise after moving to a sampled
    // placement does not invalidate it.
    for (const auto& other : occupied(object, joints))
      if (!collision_free(*scene, {{object, forward_kinematics(*scene, rest, joints)}, other},
                          0.5 * cfg.placement_margin))
        return std::nullopt;
    return rest;
  }

  // Point estimates of the other objects, used to keep placements apart.
  std::vector<Placement> occupied(const std::string& object, const JointMap& joints) const {
    std::vector<Placement> out;
    for (const auto& [other, b] : belief.poses) {
      if (other == object || b.particles.empty()) continue;
      out.push_back({other, forward_kinematics(*scene, b.map().pose, joints)});
    }
    return out;
  }

  // Whether some resting pose of the object on the surface can be grasped
  // from the current base, probing evenly spaced positions.
  bool near_region(const std::string& object, const std::string& region) const {
    const Surface* surface = scene->find_surface(region);
    if (!surface) return false;
    const JointMap joints = joints_for(surface->frame);
    const double half = scene->object(object).half.x;
    const double lo = surface->x_min + half, hi = surface->x_max - half;
    constexpr int kProbes = 8;
    for (int k = 0; k < kProbes; ++k) {
      clock->charge(clock->costs().placement);
      const double x = lo + (hi - lo) * k / (kProbes - 1);
      const Pose pose = resting_pose(*scene, *surface, object, x);
      const Vec2 ee = forward_kinematics(*scene, pose, joints) - top_grasp(*scene, object).offset;
      if (inverse_kinematics(*scene, belief.robot.base, ee)) return true;
    }
    return false;
  }

  bool localized(const ParticleBelief& b) const {
    if (b.frames().size() != 1) return false;
    const Pose mean = mean_pose(b);
    double near = 0.0;
    for (const auto& p : b.particles)
      if (distance(p.pose.position, mean.position) <= cfg.grasp_tolerance) near += p.weight;
    clock->charge(clock->costs().particle * static_cast<double>(b.particles.size()));
    return near >= cfg.localized_probability;
  }

  // Arm configuration reaching `target` from base `bq`, preferring the
  // current arm configuration when it is already close enough.
  std::optional<Value> arm_for(double bq, const Vec2& target, bool allow_current) const {
    clock->charge(clock->costs().ik);
    if (allow_current) {
      const Vec2 ee = end_effector(scene->robot, bq, vec(arm_now));
      if (distance(ee, target) <= cfg.kin_tolerance) return arm_now;
    }
    auto arm = inverse_kinematics(*scene, bq, target);
    if (!arm) return std::nullopt;
    return arm_conf(*arm);
  }
};

using Ctx = std::shared_ptr<const Context>;

struct Builder {
  pl::Vocabulary& vocab;
  pl::ValueStore& values;

  Term t(const std::string& s) const {
    if (!s.empty() && s[0] == '?') return Term::variable(s);
    return Term::fixed(values.constant(s));
  }
  Atom a(const std::string& pred, std::initializer_list<std::string> args) const {
    Atom out{vocab.id(pred), {}};
    for (const auto& s : args) out.args.push_back(t(s));
    return out;
  }
  Formula f(const std::string& pred, std::initializer_list<std::string> args) const {
    return Formula::of(a(pred, args));
  }
};

std::vector<StreamSchema> make_streams(const Builder& B, const Ctx& ctx) {
  std::vector<StreamSchema> streams;
  auto add = [&](StreamSchema s) { streams.push_back(std::move(s)); };

  {
    StreamSchema s;
    s.name = "grasps";
    s.inputs = {"?o"};
    s.domain = {B.a("Obj", {"?o"})};
    s.outputs = {"?g"};
    s.certified = {B.a("Grasp", {"?o", "?g"})};
    s.eager = true;
    s.single_shot = true;
    s.generator = [ctx](const std::vector<Value>& in) {
      return once([ctx, in] { return std::optional(out({ctx->values->constant("g-" + ctx->name(in[0]))})); });
    };
    add(std::move(s));
  }
  {
    StreamSchema s;
    s.name = "sample-place";
    s.inputs = {"?o", "?r", "?j"};
    s.domain = {B.a("PlaceRegion", {"?o", "?r"}), B.a("RegionFrame", {"?r", "?j"})};
    s.outputs = {"?pb"};
    s.output_tags = {"pb"};
    s.certified = {B.a("PoseB", {"?o", "?pb"}),     B.a("PlacePose", {"?o", "?pb"}),
                   B.a("InFrame", {"?pb", "?j"}),    B.a("Supports", {"?pb", "?j"}),
                   B.a("Localized", {"?pb"}),        B.a("BIn", {"?pb", "?r"})};
    s.likelihood = pl::Likelihood::failable;
    s.generator = [ctx](const std::vector<Value>& in) {
      auto rng = std::make_shared<std::mt19937_64>(ctx->rng("sample-place", in));
      return std::make_unique<FnGenerator>([ctx, in, rng]() -> std::optional<StreamOutput> {
        const std::string object = ctx->name(in[0]);
        const Surface* surface = ctx->scene->find_surface(ctx->name(in[1]));
        const JointMap joints = ctx->joints_for(surface->frame);
        ctx->clock->charge(ctx->clock->costs().placement * ctx->cfg.placement_attempts);
        auto pose = sample_placement(*ctx->scene, *surface, object, ctx->occupied(object, joints), joints,
                                     *rng, ctx->cfg.placement_attempts, ctx->cfg.placement_margin);
        if (!pose) return std::nullopt;
        ParticleBelief placed{object, {Particle{*pose, 1.0}}};
        return out({ctx->values->opaque(std::move(placed), "pb")});
      });
    };
    add(std::move(s));
  }
  {
    // Placement reachable from the current base, sampled jointly with its arm
    // configuration.
    StreamSchema s;
    s.name = "sample-place-near";
    s.inputs = {"?o", "?r", "?j", "?g", "?bq"};
    s.domain = {B.a("NearRegion", {"?o", "?r"}), B.a("RegionFrame", {"?r", "?j"}),
                B.a("Grasp", {"?o", "?g"}), B.a("BaseNow", {"?bq"})};
    s.outputs = {"?pb", "?aq"};
    s.output_tags = {"pb", "aq"};
    s.certified = {B.a("PoseB", {"?o", "?pb"}),     B.a("PlacePose", {"?o", "?pb"}),
                   B.a("InFrame", {"?pb", "?j"}),    B.a("Supports", {"?pb", "?j"}),
                   B.a("Localized", {"?pb"}),        B.a("BIn", {"?pb", "?r"}),
                   B.a("Kin", {"?o", "?pb", "?g", "?bq", "?aq"}), B.a("Conf", {"arm", "?aq"})};
    s.likelihood = pl::Likelihood::failable;
    s.generator = [ctx](const std::vector<Value>& in) {
      auto rng = std::make_shared<std::mt19937_64>(ctx->rng("sample-place-near", in));
      return std::make_unique<FnGenerator>([ctx, in, rng]() -> std::optional<StreamOutput> {
        const std::string object = ctx->name(in[0]);
        const Surface* surface = ctx->scene->find_surface(ctx->name(in[1]));
        const JointMap joints = ctx->joints_for(surface->frame);
        const auto occupied = ctx->occupied(object, joints);
        const double bq = ctx->scalar(in[4]);
        for (int attempt = 0; attempt < ctx->cfg.placement_attempts; ++attempt) {
          ctx->clock->charge(ctx->clock->costs().placement);
          auto pose = sample_placement(*ctx->scene, *surface, object, occupied, joints, *rng, 1,
                                       ctx->cfg.placement_margin);
          if (!pose) continue;
          ParticleBelief placed{object, {Particle{*pose, 1.0}}};
          const auto target = ctx->grasp_point(object, placed);
          if (!target) continue;
          auto aq = ctx->arm_for(bq, *target, false);
          if (!aq) continue;
          return out({ctx->values->opaque(std::move(placed), "pb"), *aq});
        }
        return std::nullopt;
      });
    };
    add(std::move(s));
  }
  {
    // Pose under the gripper when already holding the object above the region.
    StreamSchema s;
    s.name = "sample-place";
    s.inputs = {"?o", "?r", "?j"};
    s.domain = {B.a("PlaceRegion", {"?o", "?r"}), B.a("RegionFrame", {"?r", "?j"})};
    s.outputs = {"?pb"};
    s.output_tags = {"pb"};
    s.certified = {B.a("PoseB", {"?o", "?pb"}),     B.a("PlacePose", {"?o", "?pb"}),
                   B.a("InFrame", {"?pb", "?j"}),    B.a("Supports", {"?pb", "?j"}),
                   B.a("Localized", {"?pb"}),        B.a("BIn", {"?pb", "?r"}),
                   B.a("Estimated", {"?pb"})};
    s.eager = true;
    s.real_inputs_only = true;
    s.single_shot = true;
    s.likelihood = pl::Likelihood::failable;
    s.generator = [ctx](const std::vector<Value>& in) {
      return once([ctx, in]() -> std::optional<StreamOutput> {
        const std::string object = ctx->name(in[0]);
        if (!ctx->belief.held || ctx->belief.held->object != object) return std::nullopt;
        auto pose = ctx->pose_under_gripper(object, ctx->name(in[1]));
        if (!pose) return std::nullopt;
        ParticleBelief placed{object, {Particle{*pose, 1.0}}};
        return out({ctx->values->opaque(std::move(placed), "pb")});
      });
    };
    add(std::move(s));
  }
  {
    StreamSchema s;
    s.name = "sample-obs";
    s.inputs = {"?o", "?pb", "?j"};
    s.domain = {B.a("PoseB", {"?o", "?pb"}), B.a("Uncertain", {"?pb"}), B.a("Supports", {"?pb", "?j"})};
    s.outputs = {"?obs"};
    s.output_tags = {"obs"};
    s.certified = {B.a("ObsOf", {"?o", "?obs"}), B.a("ObsB", {"?o", "?pb", "?obs"}),
                   B.a("ObsFrame", {"?obs", "?j"})};
    const int obs_cost = B.vocab.id("ObsCost");
    s.optimistic_functions = [ctx, obs_cost](const std::vector<Value>& in, const std::vector<Value>& outv) {
      ObservationHypothesis h;
      h.epsilon = ctx->cfg.epsilon;
      h.region_mass = ctx->pb(in[1]).frame_mass(ctx->name(in[2]));
      const double c = bsr::obs_cost(h, {ctx->n, ctx->cfg.sensor.p_fn},
                                     {ctx->cfg.detect_cost, ctx->cfg.detect_cost});
      return std::vector<std::pair<pl::Fact, double>>{{pl::Fact{obs_cost, {in[1], outv[0]}}, c}};
    };
    s.generator = [ctx, obs_cost](const std::vector<Value>& in) {
      auto rng = ctx->rng("sample-obs", in);
      auto sampler = std::make_shared<ObservationSampler>(ctx->pb(in[1]), ctx->cfg.delta,
                                                          ctx->cfg.epsilon, rng, ctx->name(in[2]));
      return std::make_unique<FnGenerator>([ctx, in, sampler, obs_cost]() -> std::optional<StreamOutput> {
        ctx->clock->charge(ctx->clock->costs().particle *
                           static_cast<double>(ctx->pb(in[1]).particles.size()));
        auto h = sampler->next();
        if (!h) return std::nullopt;
        const double c = bsr::obs_cost(*h, {ctx->n, ctx->cfg.sensor.p_fn},
                                       {ctx->cfg.detect_cost, ctx->cfg.detect_cost});
        const Value v = ctx->values->opaque(std::move(*h), "obs");
        StreamOutput o = out({v});
        o.functions.push_back({pl::Fact{obs_cost, {in[1], v}}, c});
        return o;
      });
    };
    add(std::move(s));
  }
  {
    StreamSchema s;
    s.name = "update-belief";
    s.inputs = {"?o", "?pb1", "?obs", "?j"};
    s.domain = {B.a("ObsB", {"?o", "?pb1", "?obs"}), B.a("ObsFrame", {"?obs", "?j"})};
    s.outputs = {"?pb2"};
    s.output_tags = {"pb"};
    s.certified = {B.a("BeliefUpdate", {"?o", "?pb1", "?obs", "?pb2"}), B.a("PoseB", {"?o", "?pb2"}),
                   B.a("InFrame", {"?pb2", "?j"}), B.a("Supports", {"?pb2", "?j"}),
                   B.a("Estimated", {"?pb2"})};
    s.eager = true;
    s.single_shot = true;
    s.generator = [ctx](const std::vector<Value>& in) {
      return once([ctx, in]() -> std::optional<StreamOutput> {
        const ParticleBelief& prior = ctx->pb(in[1]);
        const ObservationHypothesis& h = ctx->obs(in[2]);
        const Cov2& sigma = ctx->cfg.sensor.covariance(prior.object);
        ParticleBelief post{prior.object, {}};
        for (const auto& p : prior.particles) {
          if (p.weight <= 0.0 || p.pose.frame != h.z.frame) continue;
          const double w = p.weight * gaussian_density(h.z.position - p.pose.position, sigma);
          if (w > 0.0) post.particles.push_back({p.pose, w});
        }
        ctx->clock->charge(ctx->clock->costs().particle * static_cast<double>(prior.particles.size()));
        if (post.particles.empty()) return std::nullopt;
        return out({ctx->values->opaque(normalize(std::move(post)), "pb")});
      });
    };
    add(std::move(s));
  }
  {
    StreamSchema s;
    s.name = "test-localized";
    s.inputs = {"?o", "?pb"};
    s.domain = {B.a("PoseB", {"?o", "?pb"})};
    s.certified = {B.a("Localized", {"?pb"})};
    s.eager = true;
    s.single_shot = true;
    s.likelihood = pl::Likelihood::failable;
    s.generator = [ctx](const std::vector<Value>& in) {
      return once([ctx, in]() -> std::optional<StreamOutput> {
        if (!ctx->localized(ctx->pb(in[1]))) return std::nullopt;
        return out({});
      });
    };
    add(std::move(s));
  }
  auto bin_test = [ctx](Value object, Value pb, Value region) -> std::optional<StreamOutput> {
    const std::string o = ctx->name(object);
    const std::string r = ctx->name(region);
    const Surface* surface = ctx->scene->find_surface(r);
    const ParticleBelief& b = ctx->pb(pb);
    ctx->clock->charge(ctx->clock->costs().particle * static_cast<double>(b.particles.size()));
    if (mass_in_region(b, surface->region(), *ctx->scene, ctx->belief.joints) < ctx->threshold(o, r))
      return std::nullopt;
    return out({});
  };
  {
    StreamSchema s;
    s.name = "test-bin";
    s.inputs = {"?o", "?pb", "?r"};
    s.domain = {B.a("PoseB", {"?o", "?pb"}), B.a("Target", {"?o", "?r"})};
    s.certified = {B.a("BIn", {"?pb", "?r"})};
    s.eager = true;
    s.real_inputs_only = true;
    s.single_shot = true;
    s.likelihood = pl::Likelihood::failable;
    s.generator = [bin_test](const std::vector<Value>& in) {
      return once([bin_test, in] { return bin_test(in[0], in[1], in[2]); });
    };
    add(std::move(s));
  }
  {
    StreamSchema s;
    s.name = "test-bin";
    s.inputs = {"?o", "?pb1", "?obs", "?pb2", "?j", "?r"};
    s.domain = {B.a("BeliefUpdate", {"?o", "?pb1", "?obs", "?pb2"}), B.a("ObsFrame", {"?obs", "?j"}),
                B.a("SoleRegion", {"?j", "?r"}), B.a("Target", {"?o", "?r"})};
    s.certified = {B.a("BIn", {"?pb2", "?r"})};
    s.eager = true;
    s.single_shot = true;
    s.likelihood = pl::Likelihood::failable;
    s.generator = [bin_test](const std::vector<Value>& in) {
      return once([bin_test, in] { return bin_test(in[0], in[3], in[5]); });
    };
    add(std::move(s));
  }
  {
    StreamSchema s;
    s.name = "test-vis";
    s.inputs = {"?o", "?obs", "?o2", "?pb2"};
    s.domain = {B.a("ObsOf", {"?o", "?obs"}), B.a("Other", {"?o", "?o2"}), B.a("PoseB", {"?o2", "?pb2"})};
    s.certified = {B.a("BVis", {"?obs", "?pb2"})};
    s.eager = true;
    s.single_shot = true;
    s.likelihood = pl::Likelihood::failable;
    s.generator = [ctx](const std::vector<Value>& in) {
      return once([ctx, in]() -> std::optional<StreamOutput> {
        const ObservationHypothesis& h = ctx->obs(in[1]);
        const ParticleBelief& occluder = ctx->pb(in[3]);
        ctx->clock->charge(ctx->clock->costs().visibility *
                           static_cast<double>(h.region.size() * occluder.particles.size()));
        if (!test_vis(h, occluder, ctx->joints_for(h.z.frame), *ctx->scene)) return std::nullopt;
        return out({});
      });
    };
    add(std::move(s));
  }
  {
    StreamSchema s;
    s.name = "inv-reach";
    s.inputs = {"?o", "?pb", "?g"};
    s.domain = {B.a("PoseB", {"?o", "?pb"}), B.a("Localized", {"?pb"}), B.a("Grasp", {"?o", "?g"})};
    s.outputs = {"?bq"};
    s.output_tags = {"q"};
    s.certified = {B.a("BaseReach", {"?o", "?pb", "?g", "?bq"}), B.a("Conf", {"base", "?bq"})};
    s.generator = [ctx](const std::vector<Value>& in) {
      auto rng = ctx->rng("inv-reach", in);
      const auto target = ctx->grasp_point(ctx->name(in[0]), ctx->pb(in[1]));
      auto bases = std::make_shared<std::vector<double>>(
          target ? ctx->base_candidates(*target, rng) : std::vector<double>{});
      auto cursor = std::make_shared<std::size_t>(0);
      return std::make_unique<FnGenerator>([ctx, bases, cursor]() -> std::optional<StreamOutput> {
        ctx->clock->charge(ctx->clock->costs().ik);
        if (*cursor >= bases->size()) return std::nullopt;
        return out({ctx->base_conf((*bases)[(*cursor)++])});
      });
    };
    add(std::move(s));
  }
  auto kin = [ctx](const std::vector<Value>& in, bool allow_current) -> std::optional<StreamOutput> {
    const auto target = ctx->grasp_point(ctx->name(in[0]), ctx->pb(in[1]));
    if (!target) return std::nullopt;
    auto aq = ctx->arm_for(ctx->scalar(in[3]), *target, allow_current);
    if (!aq) return std::nullopt;
    return out({*aq});
  };
  {
    StreamSchema s;
    s.name = "inv-kin";
    s.inputs = {"?o", "?pb", "?g", "?bq"};
    s.domain = {B.a("BaseReach", {"?o", "?pb", "?g", "?bq"})};
    s.outputs = {"?aq"};
    s.output_tags = {"aq"};
    s.certified = {B.a("Kin", {"?o", "?pb", "?g", "?bq", "?aq"}), B.a("Conf", {"arm", "?aq"})};
    s.single_shot = true;
    s.likelihood = pl::Likelihood::failable;
    s.generator = [kin](const std::vector<Value>& in) {
      return once([kin, in] { return kin(in, false); });
    };
    add(std::move(s));
  }
  {
    StreamSchema s;
    s.name = "inv-kin";
    s.inputs = {"?o", "?pb", "?g", "?bq"};
    s.domain = {B.a("PoseB", {"?o", "?pb"}), B.a("Estimated", {"?pb"}), B.a("Localized", {"?pb"}),
                B.a("Grasp", {"?o", "?g"}), B.a("BaseNow", {"?bq"})};
    s.outputs = {"?aq"};
    s.output_tags = {"aq"};
    s.certified = {B.a("Kin", {"?o", "?pb", "?g", "?bq", "?aq"}), B.a("Conf", {"arm", "?aq"})};
    s.eager = true;
    s.single_shot = true;
    s.likelihood = pl::Likelihood::failable;
    s.generator = [kin](const std::vector<Value>& in) {
      return once([kin, in] { return kin(in, true); });
    };
    add(std::move(s));
  }
  auto handle = [ctx](Value joint, Value a1, Value a2, double bq,
                      bool allow_current) -> std::optional<std::pair<Value, Value>> {
    const std::string j = ctx->name(joint);
    auto aq1 = ctx->arm_for(bq, ctx->handle_point(j, ctx->scalar(a1)), allow_current);
    if (!aq1) return std::nullopt;
    auto aq2 = ctx->arm_for(bq, ctx->handle_point(j, ctx->scalar(a2)), false);
    if (!aq2) return std::nullopt;
    return std::pair{*aq1, *aq2};
  };
  {
    StreamSchema s;
    s.name = "handle-reach";
    s.inputs = {"?j", "?a1", "?a2"};
    s.domain = {B.a("Stroke", {"?j", "?a1", "?a2"})};
    s.outputs = {"?bq", "?aq1", "?aq2"};
    s.output_tags = {"q", "aq", "aq"};
    s.certified = {B.a("HandleKin", {"?j", "?a1", "?a2", "?bq", "?aq1", "?aq2"}),
                   B.a("Conf", {"base", "?bq"}), B.a("Conf", {"arm", "?aq1"}),
                   B.a("Conf", {"arm", "?aq2"})};
    s.generator = [ctx, handle](const std::vector<Value>& in) {
      auto rng = ctx->rng("handle-reach", in);
      const Vec2 target = ctx->handle_point(ctx->name(in[0]), ctx->scalar(in[1]));
      auto bases = std::make_shared<std::vector<double>>(ctx->base_candidates(target, rng));
      auto cursor = std::make_shared<std::size_t>(0);
      return std::make_unique<FnGenerator>([ctx, in, bases, cursor, handle]() -> std::optional<StreamOutput> {
        while (*cursor < bases->size()) {
          const double bq = (*bases)[(*cursor)++];
          if (auto arms = handle(in[0], in[1], in[2], bq, false))
            return out({ctx->base_conf(bq), arms->first, arms->second});
        }
        return std::nullopt;
      });
    };
    add(std::move(s));
  }
  {
    StreamSchema s;
    s.name = "handle-reach";
    s.inputs = {"?j", "?a1", "?a2", "?bq"};
    s.domain = {B.a("Stroke", {"?j", "?a1", "?a2"}), B.a("BaseNow", {"?bq"})};
    s.outputs = {"?aq1", "?aq2"};
    s.output_tags = {"aq", "aq"};
    s.certified = {B.a("HandleKin", {"?j", "?a1", "?a2", "?bq", "?aq1", "?aq2"}),
                   B.a("Conf", {"arm", "?aq1"}), B.a("Conf", {"arm", "?aq2"})};
    s.eager = true;
    s.real_inputs_only = true;
    s.single_shot = true;
    s.likelihood = pl::Likelihood::failable;
    s.generator = [ctx, handle](const std::vector<Value>& in) {
      return once([ctx, in, handle]() -> std::optional<StreamOutput> {
        auto arms = handle(in[0], in[1], in[2], ctx->scalar(in[3]), true);
        if (!arms) return std::nullopt;
        return out({arms->first, arms->second});
      });
    };
    add(std::move(s));
  }
  auto button = [ctx](double bq, bool allow_current) -> std::optional<Value> {
    return ctx->arm_for(bq, ctx->scene->stove->button, allow_current);
  };
  {
    StreamSchema s;
    s.name = "button-reach";
    s.inputs = {"?s"};
    s.domain = {B.a("Stove", {"?s"})};
    s.outputs = {"?bq", "?aq"};
    s.output_tags = {"q", "aq"};
    s.certified = {B.a("ButtonKin", {"?s", "?bq", "?aq"}), B.a("Conf", {"base", "?bq"}),
                   B.a("Conf", {"arm", "?aq"})};
    s.generator = [ctx, button](const std::vector<Value>& in) {
      auto rng = ctx->rng("button-reach", in);
      auto bases = std::make_shared<std::vector<double>>(ctx->base_candidates(ctx->scene->stove->button, rng));
      auto cursor = std::make_shared<std::size_t>(0);
      return std::make_unique<FnGenerator>([ctx, bases, cursor, button]() -> std::optional<StreamOutput> {
        while (*cursor < bases->size()) {
          const double bq = (*bases)[(*cursor)++];
          if (auto aq = button(bq, false)) return out({ctx->base_conf(bq), *aq});
        }
        return std::nullopt;
      });
    };
    add(std::move(s));
  }
  {
    StreamSchema s;
    s.name = "button-reach";
    s.inputs = {"?s", "?bq"};
    s.domain = {B.a("Stove", {"?s"}), B.a("BaseNow", {"?bq"})};
    s.outputs = {"?aq"};
    s.output_tags = {"aq"};
    s.certified = {B.a("ButtonKin", {"?s", "?bq", "?aq"}), B.a("Conf", {"arm", "?aq"})};
    s.eager = true;
    s.real_inputs_only = true;
    s.single_shot = true;
    s.likelihood = pl::Likelihood::failable;
    s.generator = [ctx, button](const std::vector<Value>& in) {
      return once([ctx, in, button]() -> std::optional<StreamOutput> {
        auto aq = button(ctx->scalar(in[1]), true);
        if (!aq) return std::nullopt;
        return out({*aq});
      });
    };
    add(std::move(s));
  }
  {
    StreamSchema s;
    s.name = "motion";
    s.inputs = {"?r", "?q1", "?q2"};
    s.domain = {B.a("Conf", {"?r", "?q1"}), B.a("Conf", {"?r", "?q2"})};
    s.outputs = {"?t"};
    s.output_tags = {"t"};
    s.certified = {B.a("Motion", {"?r", "?q1", "?t", "?q2"})};
    s.deferrable = true;
    s.single_shot = true;
    s.admissible = [](const std::vector<Value>& in) { return in[1] != in[2]; };
    s.generator = [ctx](const std::vector<Value>& in) {
      return once([ctx, in]() -> std::optional<StreamOutput> {
        const Part part = part_from_string(ctx->name(in[0]));
        auto path = interpolate_motion(*ctx->scene, part, ctx->values->tuple(in[1]),
                                       ctx->values->tuple(in[2]));
        const std::size_t steps = path ? path->size() : 1;
        ctx->clock->charge(ctx->clock->costs().motion_step * static_cast<double>(steps));
        if (!path) return std::nullopt;
        return out({ctx->values->opaque(pl::Trajectory{part, std::move(*path)}, "t")});
      });
    };
    add(std::move(s));
  }
  return streams;
}

std::vector<pl::ActionSchema> make_actions(const Builder& B, double manip) {
  std::vector<pl::ActionSchema> actions;
  auto action = [&](std::string name, std::vector<std::string> params, std::vector<Formula> pre,
                    std::vector<Atom> add, std::vector<Atom> del, pl::CostExpr cost) {
    pl::ActionSchema a;
    a.name = std::move(name);
    a.params = std::move(params);
    a.pre = Formula::all(std::move(pre));
    a.add = std::move(add);
    a.del = std::move(del);
    a.cost = std::move(cost);
    actions.push_back(std::move(a));
  };
  const pl::CostExpr unit{manip, std::nullopt};

  action("move", {"?r", "?q1", "?t", "?q2"},
         {B.f("AtConf", {"?r", "?q1"}), B.f("Motion", {"?r", "?q1", "?t", "?q2"})},
         {B.a("AtConf", {"?r", "?q2"})}, {B.a("AtConf", {"?r", "?q1"})},
         pl::CostExpr{0.0, B.a("MoveCost", {"?r"})});
  action("pick", {"?o", "?pb", "?g", "?bq", "?aq", "?j", "?a"},
         {B.f("Kin", {"?o", "?pb", "?g", "?bq", "?aq"}), B.f("InFrame", {"?pb", "?j"}),
          B.f("Accessible", {"?j", "?a"}), B.f("AtPoseB", {"?o", "?pb"}), B.f("HandEmpty", {}),
          B.f("AtConf", {"base", "?bq"}), B.f("AtConf", {"arm", "?aq"}), B.f("AtAngle", {"?j", "?a"})},
         {B.a("AtGrasp", {"?o", "?g"})}, {B.a("AtPoseB", {"?o", "?pb"}), B.a("HandEmpty", {})}, unit);
  action("place", {"?o", "?pb", "?g", "?bq", "?aq", "?j", "?a"},
         {B.f("PlacePose", {"?o", "?pb"}), B.f("Kin", {"?o", "?pb", "?g", "?bq", "?aq"}),
          B.f("InFrame", {"?pb", "?j"}), B.f("Accessible", {"?j", "?a"}), B.f("AtGrasp", {"?o", "?g"}),
          B.f("AtConf", {"base", "?bq"}), B.f("AtConf", {"arm", "?aq"}), B.f("AtAngle", {"?j", "?a"})},
         {B.a("AtPoseB", {"?o", "?pb"}), B.a("HandEmpty", {})}, {B.a("AtGrasp", {"?o", "?g"})}, unit);
  const std::vector<std::string> handle_params{"?j", "?a1", "?a2", "?bq", "?aq1", "?aq2"};
  auto handle_pre = [&](const char* stroke) {
    return std::vector<Formula>{B.f(stroke, {"?j", "?a1", "?a2"}),
                                B.f("HandleKin", {"?j", "?a1", "?a2", "?bq", "?aq1", "?aq2"}),
                                B.f("AtAngle", {"?j", "?a1"}), B.f("HandEmpty", {}),
                                B.f("AtConf", {"base", "?bq"}), B.f("AtConf", {"arm", "?aq1"})};
  };
  const std::vector<Atom> handle_add{B.a("AtAngle", {"?j", "?a2"}), B.a("AtConf", {"arm", "?aq2"})};
  const std::vector<Atom> handle_del{B.a("AtAngle", {"?j", "?a1"}), B.a("AtConf", {"arm", "?aq1"})};
  auto pull_pre = handle_pre("Opens");
  pull_pre.push_back(Formula::negate(B.f("OtherOpen", {"?j"})));
  action("pull", handle_params, pull_pre, handle_add, handle_del, unit);
  auto push_pre = handle_pre("Closes");
  push_pre.push_back(Formula::negate(B.f("Obstructed", {"?j"})));
  action("push", handle_params, push_pre, handle_add, handle_del, unit);
  action("press", {"?s", "?o", "?pb", "?r", "?bq", "?aq"},
         {B.f("StoveRegion", {"?s", "?r"}), B.f("ButtonKin", {"?s", "?bq", "?aq"}),
          B.f("PoseB", {"?o", "?pb"}),
          B.f("AtConf", {"base", "?bq"}), B.f("AtConf", {"arm", "?aq"}), B.f("HandEmpty", {}),
          B.f("AtPoseB", {"?o", "?pb"}), B.f("BIn", {"?pb", "?r"})},
         {B.a("Cooked", {"?o"})}, {}, unit);
  action("detect", {"?o", "?pb1", "?obs", "?pb2", "?j", "?a"},
         {B.f("BeliefUpdate", {"?o", "?pb1", "?obs", "?pb2"}), B.f("ObsFrame", {"?obs", "?j"}),
          B.f("Accessible", {"?j", "?a"}), B.f("AtPoseB", {"?o", "?pb1"}), B.f("AtAngle", {"?j", "?a"}),
          Formula::negate(B.f("BOccluded", {"?o", "?obs"}))},
         {B.a("AtPoseB", {"?o", "?pb2"})}, {B.a("AtPoseB", {"?o", "?pb1"})},
         pl::CostExpr{0.0, B.a("ObsCost", {"?pb1", "?obs"})});
  return actions;
}

std::vector<pl::DerivedPredicate> make_derived(const Builder& B) {
  return {
      {B.vocab.id("BOccluded"), {"?o", "?obs"},
       Formula::exists({"?o2", "?pb2"},
                       Formula::all({B.f("Other", {"?o", "?o2"}), B.f("AtPoseB", {"?o2", "?pb2"}),
                                     Formula::negate(B.f("BVis", {"?obs", "?pb2"}))}))},
      {B.vocab.id("Obstructed"), {"?j"},
       Formula::exists({"?o", "?pb"},
                       Formula::all({B.f("AtPoseB", {"?o", "?pb"}), B.f("InFrame", {"?pb", "?j"}),
                                     B.f("Tall", {"?o"})}))},
      {B.vocab.id("OtherOpen"), {"?j"},
       Formula::exists({"?j2", "?a"},
                       Formula::all({B.f("OtherJoint", {"?j", "?j2"}), B.f("AtAngle", {"?j2", "?a"}),
                                     B.f("Extended", {"?a"})}))},
  };
}

}  // namespace

KitchenDomain::KitchenDomain(Scene scene, DomainConfig config)
    : scene_(std::move(scene)), config_(std::move(config)), vocab_(std::make_shared<pl::Vocabulary>()) {
  config_.sensor.camera = scene_.camera;
  config_.sensor.validate();
  for (const auto& p : kPredicates) vocab_->declare(p[0], std::stoi(p[1]), kind_of(p[2][0]));
}

int KitchenDomain::movable_objects(const FactoredBelief& b) const {
  return static_cast<int>(b.poses.size()) + (b.held ? 1 : 0);
}

Determinized KitchenDomain::determinize(const FactoredBelief& b, const GoalSpec& goal,
                                        std::uint64_t seed, EffortClock& clock) const {
  Determinized d;
  d.belief = b;
  pl::Problem& p = d.problem;
  p.vocab = vocab_;
  p.values = std::make_shared<pl::ValueStore>();
  p.max_cost = config_.max_cost;

  auto ctx = std::make_shared<Context>();
  ctx->scene = &scene_;
  ctx->cfg = config_;
  ctx->belief = b;
  ctx->values = p.values;
  ctx->vocab = vocab_;
  ctx->clock = &clock;
  ctx->seed = seed;
  ctx->n = movable_objects(b);
  for (const auto& j : scene_.joints) {
    auto it = b.joints.find(j.id);
    const double current = it == b.joints.end() ? 0.0 : it->second;
    ctx->accessible[j.id] = current >= config_.min_open ? current : config_.open_extension;
  }
  ctx->base_now = ctx->base_conf(b.robot.base);
  ctx->arm_now = ctx->arm_conf(b.robot.arm);

  const Builder B{*vocab_, *p.values};
  auto C = [&](const std::string& s) { return p.values->constant(s); };
  auto fact = [&](const std::string& pred, std::vector<Value> args) {
    p.init.push_back(pl::Fact{vocab_->id(pred), std::move(args)});
  };

  // Objects, grasps and pose beliefs.
  std::vector<std::string> objects;
  for (const auto& [o, pb] : b.poses) objects.push_back(o);
  if (b.held) objects.push_back(b.held->object);
  std::sort(objects.begin(), objects.end());
  const double tallest_clearance = [&] {
    double c = std::numeric_limits<double>::infinity();
    for (const auto& j : scene_.joints) c = std::min(c, j.clearance);
    return c;
  }();
  for (const auto& o : objects) {
    fact("Obj", {C(o)});
    if (scene_.object(o).tall(tallest_clearance)) fact("Tall", {C(o)});
    for (const auto& o2 : objects)
      if (o2 != o) fact("Other", {C(o), C(o2)});
    fact("PlaceRegion", {C(o), C("counter")});
  }
  for (const auto& [o, pb] : b.poses) {
    const Value v = p.values->opaque(pb, "pb");
    fact("PoseB", {C(o), v});
    fact("AtPoseB", {C(o), v});
    fact("Estimated", {v});
    const auto frames = pb.frames();
    for (const auto& f : frames) fact("Supports", {v, C(f)});
    if (frames.size() == 1) fact("InFrame", {v, C(*frames.begin())});
    if (!ctx->localized(pb)) fact("Uncertain", {v});
  }
  if (b.held)
    fact("AtGrasp", {C(b.held->object), C("g-" + b.held->object)});
  else
    fact("HandEmpty", {});
  for (const auto& o : b.cooked) fact("Cooked", {C(o)});

  // Robot.
  fact("Conf", {C("base"), ctx->base_now});
  fact("Conf", {C("arm"), ctx->arm_now});
  fact("BaseNow", {ctx->base_now});
  fact("AtConf", {C("base"), ctx->base_now});
  fact("AtConf", {C("arm"), ctx->arm_now});
  p.functions[pl::Fact{vocab_->id("MoveCost"), {C("base")}}] = config_.base_move_cost;
  p.functions[pl::Fact{vocab_->id("MoveCost"), {C("arm")}}] = config_.arm_move_cost;

  // Frames and joints.
  const Value zero = ctx->extension(0.0);
  fact("Accessible", {C(kWorldFrame), zero});
  fact("AtAngle", {C(kWorldFrame), zero});
  for (const auto& j : scene_.joints) {
    auto it = b.joints.find(j.id);
    const double current = it == b.joints.end() ? 0.0 : it->second;
    const Value now = ctx->extension(current);
    const Value open = ctx->extension(ctx->accessible[j.id]);
    fact("AtAngle", {C(j.id), now});
    fact("Accessible", {C(j.id), open});
    if (current > 1e-9) fact("Extended", {now});
    fact("Extended", {open});
    for (const auto& other : scene_.joints)
      if (other.id != j.id) fact("OtherJoint", {C(j.id), C(other.id)});
    // A drawer can be reopened after closing it.
    for (Value from : {now, zero}) {
      if (from == open) continue;
      fact("Opens", {C(j.id), from, open});
      fact("Stroke", {C(j.id), from, open});
    }
    for (Value from : {now, open}) {
      if (from == zero) continue;
      if (from == now && from != open && current < 1e-9) continue;
      fact("Closes", {C(j.id), from, zero});
      fact("Stroke", {C(j.id), from, zero});
    }
  }
  std::map<std::string, int> regions_per_frame;
  for (const auto& s : scene_.surfaces) ++regions_per_frame[s.frame];
  for (const auto& s : scene_.surfaces) {
    fact("Region", {C(s.id)});
    fact("RegionFrame", {C(s.id), C(s.frame)});
    if (s.frame != kWorldFrame && regions_per_frame[s.frame] == 1) fact("SoleRegion", {C(s.frame), C(s.id)});
  }
  if (scene_.stove) {
    fact("Stove", {C(scene_.stove->id)});
    fact("StoveRegion", {C(scene_.stove->id), C(scene_.stove->surface)});
  }

  // Goal.
  std::vector<Formula> parts;
  int var = 0;
  for (const GoalTerm& t : goal.terms) {
    switch (t.kind) {
      case GoalTerm::Kind::in_region: {
        fact("Target", {C(t.object), C(t.region)});
        fact("PlaceRegion", {C(t.object), C(t.region)});
        ctx->thresholds[{t.object, t.region}] = t.threshold;
        const std::string pb = "?pb" + std::to_string(var++);
        parts.push_back(Formula::exists(
            {pb}, Formula::all({B.f("AtPoseB", {t.object, pb}), B.f("BIn", {pb, t.region})})));
        break;
      }
      case GoalTerm::Kind::joint_at: {
        auto it = b.joints.find(t.joint);
        const double current = it == b.joints.end() ? 0.0 : it->second;
        fact("JointGoal", {C(t.joint), ctx->extension(t.extension)});
        if (std::abs(current - t.extension) <= t.tolerance)
          fact("JointGoal", {C(t.joint), ctx->extension(current)});
        const std::string a = "?a" + std::to_string(var++);
        parts.push_back(Formula::exists(
            {a}, Formula::all({B.f("AtAngle", {t.joint, a}), B.f("JointGoal", {t.joint, a})})));
        break;
      }
      case GoalTerm::Kind::cooked:
        if (scene_.stove) {
          fact("Target", {C(t.object), C(scene_.stove->surface)});
          fact("PlaceRegion", {C(t.object), C(scene_.stove->surface)});
        }
        parts.push_back(B.f("Cooked", {t.object}));
        break;
      case GoalTerm::Kind::hand_empty: parts.push_back(B.f("HandEmpty", {})); break;
    }
  }
  p.goal = Formula::all(std::move(parts));
  const int place_region = vocab_->id("PlaceRegion");
  std::vector<pl::Fact> near;
  for (const auto& f : p.init)
    if (f.pred == place_region && ctx->near_region(p.values->name(f.args[0]), p.values->name(f.args[1])))
      near.push_back(pl::Fact{vocab_->id("NearRegion"), f.args});
  p.init.insert(p.init.end(), near.begin(), near.end());
  std::sort(p.init.begin(), p.init.end());
  p.init.erase(std::unique(p.init.begin(), p.init.end()), p.init.end());

  p.actions = make_actions(B, determinized_cost({config_.manipulation_cost, config_.manipulation_cost,
                                                 config_.p_success}));
  p.derived = make_derived(B);
  p.streams = make_streams(B, ctx);
  return d;
}

Command KitchenDomain::command(const Determinized& d, const pl::GroundAction& action) const {
  const pl::Problem& p = d.problem;
  const pl::ValueStore& vs = *p.values;
  const std::string& name = p.actions.at(static_cast<std::size_t>(action.schema)).name;
  const auto& a = action.args;
  auto pb = [&](Value v) -> const ParticleBelief& { return std::get<ParticleBelief>(vs.payload(v)); };
  Command c;
  if (name == "move") {
    c.kind = CommandKind::move;
    c.part = part_from_string(vs.name(a.at(0)));
    c.target = vs.tuple(a.at(3));
  } else if (name == "pick" || name == "place") {
    c.kind = name == "pick" ? CommandKind::pick : CommandKind::place;
    c.object = vs.name(a.at(0));
    c.grasp = top_grasp(scene_, c.object);
    c.pose = name == "pick" ? mean_pose(pb(a.at(1))) : pb(a.at(1)).particles.at(0).pose;
  } else if (name == "pull" || name == "push") {
    c.kind = name == "pull" ? CommandKind::pull : CommandKind::push;
    c.joint = vs.name(a.at(0));
    c.extension = vs.tuple(a.at(2)).at(0);
  } else if (name == "press") {
    c.kind = CommandKind::press;
  } else if (name == "detect") {
    c.kind = CommandKind::detect;
    c.object = vs.name(a.at(0));
  } else {
    throw pl::PlanError("no command for action " + name);
  }
  return c;
}

}  // namespace bsr::domain
