#include "bsr/domain.hpp"
#include "bsr/planner.hpp"
#include "bsr/tasks.hpp"
#include "doctest.h"

using namespace bsr;
using namespace bsr::domain;

namespace {

FactoredBelief known_world(const LatentState& w) {
  FactoredBelief b;
  for (const auto& [o, pose] : w.object_poses) b.poses[o] = ParticleBelief{o, {Particle{pose, 1.0}}};
  b.robot = w.robot;
  b.joints = w.joints;
  return b;
}

std::vector<std::string> plan_names(const pl::Problem& p, const std::vector<pl::GroundAction>& plan) {
  std::vector<std::string> out;
  for (const auto& a : plan) out.push_back(p.actions.at(static_cast<std::size_t>(a.schema)).name);
  return out;
}

std::optional<plan::Solution> plan_for(const KitchenDomain& dom, const FactoredBelief& b, const GoalSpec& goal,
                                       Determinized& d) {
  EffortClock clock;
  d = dom.determinize(b, goal, 5, clock);
  plan::PlannerOptions opts;
  opts.early_actions = dom.early_actions();
  return plan::solve(d.problem, opts, clock);
}

}  // namespace

TEST_CASE("fnv1a matches the reference hash") {
  CHECK(fnv1a("") == 14695981039346656037ull);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a("a", 1) != fnv1a("a", 2));
}

TEST_CASE("goal terms evaluate against the belief") {
  const Scene scene = make_kitchen_scene();
  FactoredBelief b;
  b.joints = {{"top", 0.0}, {"bottom", 0.3}};
  const Surface& counter = *scene.find_surface("counter");
  const Surface& stove = *scene.find_surface("stove");
  b.poses["block"] = ParticleBelief{"block", {Particle{resting_pose(scene, counter, "block", 0.5), 0.96},
                                              Particle{resting_pose(scene, stove, "block", 1.5), 0.04}}};
  CHECK(goal_holds({{GoalTerm::in("block", "counter")}}, b, scene));
  CHECK_FALSE(goal_holds({{GoalTerm::in("block", "counter", 0.97)}}, b, scene));
  CHECK_FALSE(goal_holds({{GoalTerm::in("block", "stove")}}, b, scene));
  CHECK(goal_holds({{GoalTerm::joint_at("top", 0.0)}}, b, scene));
  CHECK_FALSE(goal_holds({{GoalTerm::joint_at("bottom", 0.0)}}, b, scene));
  CHECK(goal_holds({{GoalTerm::joint_at("bottom", 0.305)}}, b, scene));
  CHECK_FALSE(goal_holds({{GoalTerm::cooked("block")}}, b, scene));
  b.cooked.insert("block");
  CHECK(goal_holds({{GoalTerm::cooked("block")}}, b, scene));
  CHECK(goal_holds({{GoalTerm::hand_empty()}}, b, scene));
  b.held = Held{"sugar", top_grasp(scene, "sugar")};
  CHECK_FALSE(goal_holds({{GoalTerm::hand_empty()}}, b, scene));
  CHECK(goal_holds({}, b, scene));
}

TEST_CASE("a satisfied goal yields the empty plan") {
  const Scene scene = make_kitchen_scene();
  const KitchenDomain dom(scene, {});
  const TaskInstance t = make_task("stow", scene, 10, 0);
  Determinized d;
  auto sol = plan_for(dom, known_world(t.latent), {{GoalTerm::in("block", "counter")}}, d);
  REQUIRE(sol);
  CHECK(sol->plan.empty());
}

TEST_CASE("a known block in the closed drawer needs pull, pick, place and push") {
  const Scene scene = make_kitchen_scene();
  const KitchenDomain dom(scene, {});
  const TaskInstance t = make_task("inspect", scene, 10, 1);
  const GoalSpec goal{{GoalTerm::in("block", "counter"), GoalTerm::joint_at("bottom", 0.0)}};
  Determinized d;
  auto sol = plan_for(dom, known_world(t.latent), goal, d);
  REQUIRE(sol);
  const auto names = plan_names(d.problem, sol->plan);
  auto at = [&](const std::string& n) {
    return std::find(names.begin(), names.end(), n) - names.begin();
  };
  REQUIRE(at("pull") < static_cast<long>(names.size()));
  CHECK(at("pull") < at("pick"));
  CHECK(at("pick") < at("place"));
  CHECK(at("place") < at("push"));
  // The first action is fully bound and translates to a command.
  const Command c = dom.command(d, sol->plan.front());
  if (c.kind == CommandKind::move) CHECK_FALSE(c.target.empty());
}

TEST_CASE("determinize is reproducible for a fixed seed") {
  const Scene scene = make_kitchen_scene();
  const TaskInstance t = make_task("swap", scene, 30, 2);
  std::vector<std::string> runs[2];
  for (auto& names : runs) {
    const KitchenDomain dom(scene, {});
    EffortClock clock;
    Determinized d = dom.determinize(t.belief, t.goal, 9, clock);
    auto sol = plan::solve(d.problem, {}, clock);
    REQUIRE(sol);
    for (const auto& a : sol->plan) names.push_back(pl::str(a, d.problem));
  }
  CHECK(runs[0] == runs[1]);
}

TEST_CASE("an uncertain block is observed before it is picked") {
  const Scene scene = make_kitchen_scene();
  const KitchenDomain dom(scene, {});
  const TaskInstance t = make_task("stow", scene, 50, 4);
  Determinized d;
  auto sol = plan_for(dom, t.belief, t.goal, d);
  REQUIRE(sol);
  const auto names = plan_names(d.problem, sol->plan);
  const auto detect = std::find(names.begin(), names.end(), "detect");
  const auto pick = std::find(names.begin(), names.end(), "pick");
  REQUIRE(detect != names.end());
  CHECK(detect < pick);
}
