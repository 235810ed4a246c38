#pragma once

// Planar kitchen model: a side view of the camera plane (x horizontal,
// y vertical). Furniture is a set of static boxes, drawers are prismatic
// frames that slide their interior out from under the cabinet body, and the
// robot is a gantry base on a rail with a point end-effector.

#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace bsr {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Vec2& o) const { return x == o.x && y == o.y; }
  double norm() const { return std::hypot(x, y); }
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

inline const std::string kWorldFrame = "world";

struct Pose {
  std::string frame = kWorldFrame;
  Vec2 position;

  bool operator==(const Pose& o) const { return frame == o.frame && position == o.position; }
};

struct Box {
  Vec2 center;
  Vec2 half;

  Vec2 lo() const { return center - half; }
  Vec2 hi() const { return center + half; }
  // Strict interior test.
  bool contains(const Vec2& p) const {
    return std::abs(p.x - center.x) < half.x && std::abs(p.y - center.y) < half.y;
  }
  // Closed test, used for region membership.
  bool contains_closed(const Vec2& p, double tol = 1e-12) const {
    return std::abs(p.x - center.x) <= half.x + tol && std::abs(p.y - center.y) <= half.y + tol;
  }
  // Open interiors overlap; touching boxes do not.
  bool overlaps(const Box& o) const {
    return std::abs(center.x - o.center.x) < half.x + o.half.x &&
           std::abs(center.y - o.center.y) < half.y + o.half.y;
  }
};

// A box expressed in some frame (world or a drawer).
struct FramedBox {
  std::string frame = kWorldFrame;
  Box box;
};

struct PrismaticJoint {
  std::string id;
  Vec2 closed_origin;       // world position of the frame at extension 0
  Vec2 axis{-1.0, 0.0};     // unit sliding direction
  double max_extension = 0.0;
  Box interior;             // in joint frame
  Vec2 handle;              // in joint frame
  double clearance = 0.0;   // tallest object that still lets the drawer close
};

using JointMap = std::map<std::string, double>;

struct ObjectModel {
  std::string id;
  Vec2 half;
  bool tall(double clearance) const { return 2.0 * half.y > clearance; }
};

// A horizontal support on which objects rest, in the given frame.
struct Surface {
  std::string id;
  std::string frame = kWorldFrame;
  double x_min = 0.0;
  double x_max = 0.0;
  double height = 0.0;  // local y of the support plane

  // Region occupied by resting objects, used for containment goals.
  FramedBox region(double ceiling = 0.3) const {
    return {frame, Box{{0.5 * (x_min + x_max), height + 0.5 * ceiling},
                       {0.5 * (x_max - x_min), 0.5 * ceiling}}};
  }
};

struct Grasp {
  Vec2 offset;  // object pose relative to the end-effector
};

struct RobotModel {
  double rail_y = 1.2;
  double rail_min = 0.0;
  double rail_max = 3.0;
  double reach = 1.05;
  double approach = 0.1;        // vertical approach segment length for grasps
  double grasp_tolerance = 0.03;
  double handle_tolerance = 0.03;
};

struct Held {
  std::string object;
  Grasp grasp;
};

struct RobotState {
  double base = 0.0;
  Vec2 arm;  // end-effector offset from the shoulder (base, rail_y)
  std::optional<Held> holding;
};

struct Camera {
  Vec2 origin;
};

struct Stove {
  std::string id;
  std::string surface;  // id of the Surface that heats
  Vec2 button;          // world point the end-effector presses
};

struct Scene {
  std::vector<std::pair<std::string, Box>> furniture;  // static occluders
  std::vector<PrismaticJoint> joints;
  std::vector<Surface> surfaces;
  std::vector<ObjectModel> objects;
  std::optional<Stove> stove;
  RobotModel robot;
  Camera camera;

  const PrismaticJoint* find_joint(const std::string& id) const;
  const Surface* find_surface(const std::string& id) const;
  const ObjectModel& object(const std::string& id) const;
  bool has_frame(const std::string& frame) const;
};

struct LatentState {
  RobotState robot;
  JointMap joints;
  std::map<std::string, Pose> object_poses;
  bool stove_on = false;
  std::set<std::string> cooked;
};

class WorldError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Frames -------------------------------------------------------------------

Vec2 frame_origin(const Scene& scene, const std::string& frame, const JointMap& joints);
Vec2 forward_kinematics(const Scene& scene, const Pose& pose, const JointMap& joints);
Pose attach(const Scene& scene, const Vec2& world, const std::string& frame, const JointMap& joints);
Box world_box(const Scene& scene, const FramedBox& fb, const JointMap& joints);

// Occlusion ----------------------------------------------------------------

// True iff the open segment (a, b) meets the open interior of the box.
bool segment_hits_box(const Vec2& a, const Vec2& b, const Box& box);

// True iff the occluder's box at occluder_world lies between camera and target.
bool blocks(const Scene& scene, const std::string& occluder, const Vec2& occluder_world,
            const Vec2& target_world, const Camera& camera);

// True iff furniture hides the target point from the camera.
bool furniture_blocks(const Scene& scene, const Vec2& target_world);

// Placement and kinematics -------------------------------------------------

struct Placement {
  std::string object;
  Vec2 world;
};

Box object_box(const Scene& scene, const std::string& object, const Vec2& world);
// `margin` widens every box horizontally, keeping that much gap between objects.
bool collision_free(const Scene& scene, const std::vector<Placement>& placements, double margin = 0.0);

// Local pose of an object resting on the surface at local x.
Pose resting_pose(const Scene& scene, const Surface& surface, const std::string& object, double x);

// Draws up to `attempts` resting poses on the surface that keep all boxes
// at least `margin` apart from `occupied`; std::nullopt once the attempts are
// exhausted.
std::optional<Pose> sample_placement(const Scene& scene, const Surface& surface,
                                     const std::string& object,
                                     const std::vector<Placement>& occupied, const JointMap& joints,
                                     std::mt19937_64& rng, int attempts = 25, double margin = 0.0);

Vec2 shoulder(const RobotModel& robot, double base);
Vec2 end_effector(const RobotModel& robot, double base, const Vec2& arm);
bool reachable(const RobotModel& robot, double base, const Vec2& world);

// Arm offset placing the end-effector at `ee_world` from `base`, provided the
// point is inside the reach disk and the vertical approach segment above it
// is clear of furniture.
std::optional<Vec2> inverse_kinematics(const Scene& scene, double base, const Vec2& ee_world);

enum class Part { base, arm };
std::string to_string(Part part);
Part part_from_string(const std::string& s);

// Straight-line interpolation at `resolution`; returns the waypoints when
// every one is valid for the part.
std::optional<std::vector<std::vector<double>>> interpolate_motion(
    const Scene& scene, Part part, const std::vector<double>& q1, const std::vector<double>& q2,
    double resolution = 0.01);
bool motion_collision_free(const Scene& scene, Part part, const std::vector<double>& q1,
                           const std::vector<double>& q2, double resolution = 0.01);

// Scene files ---------------------------------------------------------------

nlohmann::json scene_to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j);
Scene load_scene(const std::string& path);

// The desk-scale kitchen: counter, stove, and a two-drawer cabinet.
Scene make_kitchen_scene();

}  // namespace bsr
