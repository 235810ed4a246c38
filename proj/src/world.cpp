#include "bsr/world.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

namespace bsr {

const PrismaticJoint* Scene::find_joint(const std::string& id) const {
  for (const auto& j : joints)
    if (j.id == id) return &j;
  return nullptr;
}

const Surface* Scene::find_surface(const std::string& id) const {
  for (const auto& s : surfaces)
    if (s.id == id) return &s;
  return nullptr;
}

const ObjectModel& Scene::object(const std::string& id) const {
  for (const auto& o : objects)
    if (o.id == id) return o;
  throw WorldError("unknown object '" + id + "'");
}

bool Scene::has_frame(const std::string& frame) const {
  return frame == kWorldFrame || find_joint(frame) != nullptr;
}

Vec2 frame_origin(const Scene& scene, const std::string& frame, const JointMap& joints) {
  if (frame == kWorldFrame) return {};
  const PrismaticJoint* joint = scene.find_joint(frame);
  if (!joint) throw WorldError("unknown frame '" + frame + "'");
  double extension = 0.0;
  if (auto it = joints.find(frame); it != joints.end()) extension = it->second;
  return joint->closed_origin + joint->axis * extension;
}

Vec2 forward_kinematics(const Scene& scene, const Pose& pose, const JointMap& joints) {
  return frame_origin(scene, pose.frame, joints) + pose.position;
}

Pose attach(const Scene& scene, const Vec2& world, const std::string& frame, const JointMap& joints) {
  return {frame, world - frame_origin(scene, frame, joints)};
}

Box world_box(const Scene& scene, const FramedBox& fb, const JointMap& joints) {
  return {frame_origin(scene, fb.frame, joints) + fb.box.center, fb.box.half};
}

bool segment_hits_box(const Vec2& a, const Vec2& b, const Box& box) {
  // Slab clipping against the open box; the surviving parameter interval
  // must have positive length for the open segment to enter the interior.
  double t_lo = 0.0;
  double t_hi = 1.0;
  const double start[2] = {a.x, a.y};
  const double delta[2] = {b.x - a.x, b.y - a.y};
  const double lo[2] = {box.center.x - box.half.x, box.center.y - box.half.y};
  const double hi[2] = {box.center.x + box.half.x, box.center.y + box.half.y};
  for (int axis = 0; axis < 2; ++axis) {
    if (delta[axis] == 0.0) {
      if (!(start[axis] > lo[axis] && start[axis] < hi[axis])) return false;
      continue;
    }
    double t1 = (lo[axis] - start[axis]) / delta[axis];
    double t2 = (hi[axis] - start[axis]) / delta[axis];
    if (t1 > t2) std::swap(t1, t2);
    t_lo = std::max(t_lo, t1);
    t_hi = std::min(t_hi, t2);
    if (!(t_lo < t_hi)) return false;
  }
  return t_lo < t_hi;
}

bool blocks(const Scene& scene, const std::string& occluder, const Vec2& occluder_world,
            const Vec2& target_world, const Camera& camera) {
  return segment_hits_box(camera.origin, target_world, object_box(scene, occluder, occluder_world));
}

bool furniture_blocks(const Scene& scene, const Vec2& target_world) {
  for (const auto& [name, box] : scene.furniture)
    if (segment_hits_box(scene.camera.origin, target_world, box)) return true;
  return false;
}

Box object_box(const Scene& scene, const std::string& object, const Vec2& world) {
  return {world, scene.object(object).half};
}

bool collision_free(const Scene& scene, const std::vector<Placement>& placements, double margin) {
  for (std::size_t i = 0; i < placements.size(); ++i) {
    Box bi = object_box(scene, placements[i].object, placements[i].world);
    bi.half.x += margin;
    for (std::size_t j = i + 1; j < placements.size(); ++j) {
      if (placements[i].object == placements[j].object) continue;
      if (bi.overlaps(object_box(scene, placements[j].object, placements[j].world))) return false;
    }
  }
  return true;
}

Pose resting_pose(const Scene& scene, const Surface& surface, const std::string& object, double x) {
  return {surface.frame, {x, surface.height + scene.object(object).half.y}};
}

std::optional<Pose> sample_placement(const Scene& scene, const Surface& surface,
                                     const std::string& object,
                                     const std::vector<Placement>& occupied, const JointMap& joints,
                                     std::mt19937_64& rng, int attempts, double margin) {
  const ObjectModel& model = scene.object(object);
  const double lo = surface.x_min + model.half.x;
  const double hi = surface.x_max - model.half.x;
  if (hi < lo) return std::nullopt;
  std::uniform_real_distribution<double> dist(lo, hi);
  for (int attempt = 0; attempt < attempts; ++attempt) {
    Pose pose = resting_pose(scene, surface, object, dist(rng));
    Box candidate = object_box(scene, object, forward_kinematics(scene, pose, joints));
    candidate.half.x += margin;
    bool free = true;
    for (const auto& other : occupied) {
      if (other.object == object) continue;
      if (candidate.overlaps(object_box(scene, other.object, other.world))) {
        free = false;
        break;
      }
    }
    if (free) return pose;
  }
  return std::nullopt;
}

Vec2 shoulder(const RobotModel& robot, double base) { return {base, robot.rail_y}; }

Vec2 end_effector(const RobotModel& robot, double base, const Vec2& arm) {
  return shoulder(robot, base) + arm;
}

bool reachable(const RobotModel& robot, double base, const Vec2& world) {
  return distance(shoulder(robot, base), world) <= robot.reach;
}

std::optional<Vec2> inverse_kinematics(const Scene& scene, double base, const Vec2& ee_world) {
  const RobotModel& robot = scene.robot;
  if (base < robot.rail_min || base > robot.rail_max) return std::nullopt;
  if (!reachable(robot, base, ee_world)) return std::nullopt;
  const Vec2 above = ee_world + Vec2{0.0, robot.approach};
  for (const auto& [name, box] : scene.furniture) {
    if (box.contains(ee_world) || segment_hits_box(ee_world, above, box)) return std::nullopt;
  }
  return ee_world - shoulder(robot, base);
}

std::string to_string(Part part) { return part == Part::base ? "base" : "arm"; }

Part part_from_string(const std::string& s) {
  if (s == "base") return Part::base;
  if (s == "arm") return Part::arm;
  throw WorldError("unknown robot part '" + s + "'");
}

namespace {

bool valid_configuration(const Scene& scene, Part part, const std::vector<double>& q) {
  const RobotModel& robot = scene.robot;
  if (part == Part::base) return q.size() == 1 && q[0] >= robot.rail_min && q[0] <= robot.rail_max;
  return q.size() == 2 && std::hypot(q[0], q[1]) <= robot.reach + 1e-9 && q[1] <= 0.0;
}

}  // namespace

std::optional<std::vector<std::vector<double>>> interpolate_motion(
    const Scene& scene, Part part, const std::vector<double>& q1, const std::vector<double>& q2,
    double resolution) {
  if (q1.size() != q2.size()) throw WorldError("configuration dimension mismatch");
  double length = 0.0;
  for (std::size_t i = 0; i < q1.size(); ++i) length += (q2[i] - q1[i]) * (q2[i] - q1[i]);
  length = std::sqrt(length);
  const int steps = std::max(1, static_cast<int>(std::ceil(length / resolution)));
  std::vector<std::vector<double>> path;
  path.reserve(steps + 1);
  for (int s = 0; s <= steps; ++s) {
    const double t = static_cast<double>(s) / steps;
    std::vector<double> q(q1.size());
    for (std::size_t i = 0; i < q1.size(); ++i) q[i] = q1[i] + t * (q2[i] - q1[i]);
    if (!valid_configuration(scene, part, q)) return std::nullopt;
    path.push_back(std::move(q));
  }
  return path;
}

bool motion_collision_free(const Scene& scene, Part part, const std::vector<double>& q1,
                           const std::vector<double>& q2, double resolution) {
  return interpolate_motion(scene, part, q1, q2, resolution).has_value();
}

// Scene files ---------------------------------------------------------------

namespace {

nlohmann::json vec_json(const Vec2& v) { return nlohmann::json::array({v.x, v.y}); }
Vec2 vec_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }
nlohmann::json box_json(const Box& b) {
  return {{"center", vec_json(b.center)}, {"half_extents", vec_json(b.half)}};
}
Box box_from(const nlohmann::json& j) {
  Box b{vec_from(j.at("center")), vec_from(j.at("half_extents"))};
  if (!(b.half.x > 0.0 && b.half.y > 0.0)) throw WorldError("box half-extents must be positive");
  return b;
}

}  // namespace

nlohmann::json scene_to_json(const Scene& scene) {
  nlohmann::json j;
  j["units"] = "meters";
  j["camera"] = {{"origin", vec_json(scene.camera.origin)}};
  const RobotModel& r = scene.robot;
  j["robot"] = {{"rail_y", r.rail_y},
                {"rail_limits", {r.rail_min, r.rail_max}},
                {"reach", r.reach},
                {"approach", r.approach},
                {"grasp_tolerance", r.grasp_tolerance},
                {"handle_tolerance", r.handle_tolerance}};
  j["furniture"] = nlohmann::json::array();
  for (const auto& [name, box] : scene.furniture) {
    auto entry = box_json(box);
    entry["id"] = name;
    j["furniture"].push_back(entry);
  }
  j["joints"] = nlohmann::json::array();
  for (const auto& jt : scene.joints) {
    j["joints"].push_back({{"id", jt.id},
                           {"closed_origin", vec_json(jt.closed_origin)},
                           {"axis", vec_json(jt.axis)},
                           {"max_extension", jt.max_extension},
                           {"interior", box_json(jt.interior)},
                           {"handle", vec_json(jt.handle)},
                           {"clearance", jt.clearance}});
  }
  j["surfaces"] = nlohmann::json::array();
  for (const auto& s : scene.surfaces) {
    j["surfaces"].push_back({{"id", s.id},
                             {"frame", s.frame},
                             {"x_range", {s.x_min, s.x_max}},
                             {"height", s.height}});
  }
  j["objects"] = nlohmann::json::array();
  for (const auto& o : scene.objects)
    j["objects"].push_back({{"id", o.id}, {"half_extents", vec_json(o.half)}});
  if (scene.stove) {
    j["stove"] = {{"id", scene.stove->id},
                  {"surface", scene.stove->surface},
                  {"button", vec_json(scene.stove->button)}};
  }
  return j;
}

Scene scene_from_json(const nlohmann::json& j) {
  Scene scene;
  scene.camera.origin = vec_from(j.at("camera").at("origin"));
  if (j.contains("robot")) {
    const auto& r = j.at("robot");
    scene.robot.rail_y = r.value("rail_y", scene.robot.rail_y);
    if (r.contains("rail_limits")) {
      scene.robot.rail_min = r.at("rail_limits").at(0).get<double>();
      scene.robot.rail_max = r.at("rail_limits").at(1).get<double>();
    }
    scene.robot.reach = r.value("reach", scene.robot.reach);
    scene.robot.approach = r.value("approach", scene.robot.approach);
    scene.robot.grasp_tolerance = r.value("grasp_tolerance", scene.robot.grasp_tolerance);
    scene.robot.handle_tolerance = r.value("handle_tolerance", scene.robot.handle_tolerance);
  }
  for (const auto& f : j.value("furniture", nlohmann::json::array()))
    scene.furniture.emplace_back(f.at("id").get<std::string>(), box_from(f));
  for (const auto& jt : j.value("joints", nlohmann::json::array())) {
    PrismaticJoint joint;
    joint.id = jt.at("id").get<std::string>();
    joint.closed_origin = vec_from(jt.at("closed_origin"));
    joint.axis = vec_from(jt.at("axis"));
    joint.max_extension = jt.at("max_extension").get<double>();
    joint.interior = box_from(jt.at("interior"));
    joint.handle = vec_from(jt.at("handle"));
    joint.clearance = jt.at("clearance").get<double>();
    if (joint.id == kWorldFrame) throw WorldError("joint id 'world' is reserved");
    scene.joints.push_back(joint);
  }
  for (const auto& s : j.value("surfaces", nlohmann::json::array())) {
    Surface surface;
    surface.id = s.at("id").get<std::string>();
    surface.frame = s.value("frame", kWorldFrame);
    surface.x_min = s.at("x_range").at(0).get<double>();
    surface.x_max = s.at("x_range").at(1).get<double>();
    surface.height = s.at("height").get<double>();
    scene.surfaces.push_back(surface);
  }
  for (const auto& o : j.value("objects", nlohmann::json::array())) {
    ObjectModel model{o.at("id").get<std::string>(), vec_from(o.at("half_extents"))};
    if (!(model.half.x > 0.0 && model.half.y > 0.0))
      throw WorldError("object half-extents must be positive");
    scene.objects.push_back(model);
  }
  if (j.contains("stove")) {
    const auto& s = j.at("stove");
    scene.stove = Stove{s.at("id").get<std::string>(), s.at("surface").get<std::string>(),
                        vec_from(s.at("button"))};
  }
  for (const auto& s : scene.surfaces)
    if (!scene.has_frame(s.frame)) throw WorldError("surface '" + s.id + "' has unknown frame");
  return scene;
}

Scene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw WorldError("cannot open scene file '" + path + "'");
  return scene_from_json(nlohmann::json::parse(in));
}

Scene make_kitchen_scene() {
  Scene scene;
  scene.camera.origin = {2.0, 1.5};
  scene.robot = RobotModel{};
  scene.robot.rail_y = 1.2;
  scene.robot.reach = 1.3;
  scene.furniture = {
      {"counter", Box{{0.6, 0.4}, {0.6, 0.4}}},
      {"stove", Box{{1.5, 0.4}, {0.2, 0.4}}},
      {"cabinet", Box{{2.7, 0.4}, {0.3, 0.4}}},
  };
  for (const auto& [id, y] : {std::pair<std::string, double>{"top", 0.42}, {"bottom", 0.04}}) {
    PrismaticJoint joint;
    joint.id = id;
    joint.closed_origin = {2.4, y};
    joint.axis = {-1.0, 0.0};
    joint.max_extension = 0.6;
    joint.interior = Box{{0.27, 0.14}, {0.25, 0.12}};
    joint.handle = {-0.03, 0.14};
    joint.clearance = 0.15;
    scene.joints.push_back(joint);
  }
  scene.surfaces = {
      Surface{"counter", kWorldFrame, 0.05, 1.15, 0.8},
      Surface{"stove", kWorldFrame, 1.35, 1.65, 0.8},
      Surface{"top", "top", 0.04, 0.50, 0.02},
      Surface{"bottom", "bottom", 0.04, 0.50, 0.02},
  };
  scene.objects = {
      ObjectModel{"block", {0.03, 0.03}},
      ObjectModel{"sugar", {0.04, 0.09}},
      ObjectModel{"cracker", {0.05, 0.12}},
  };
  scene.stove = Stove{"stove", "stove", {1.72, 0.6}};
  return scene;
}

}  // namespace bsr
