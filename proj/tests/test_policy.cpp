#include <map>

#include "bsr/policy.hpp"
#include "doctest.h"

using namespace bsr;

namespace {

struct Planned {
  domain::Determinized d;
  std::vector<pl::GroundAction> plan;
};

Planned plan_task(const domain::KitchenDomain& dom, const TaskInstance& t) {
  EffortClock clock;
  Planned p{dom.determinize(t.belief, t.goal, 3, clock), {}};
  plan::PlannerOptions opts;
  opts.early_actions = dom.early_actions();
  auto sol = plan::solve(p.d.problem, opts, clock);
  REQUIRE(sol);
  p.plan = sol->plan;
  return p;
}

// Checks that arguments of the solution agree with the skeleton: constants
// match and each shared symbol binds one value.
bool follows(const Skeleton& skeleton, const std::vector<SkeletonStep>& solution) {
  if (skeleton.size() > solution.size()) return false;
  std::map<std::string, std::string> bound;
  for (std::size_t i = 0; i < skeleton.size(); ++i) {
    if (skeleton[i].name != solution[i].name || skeleton[i].args.size() != solution[i].args.size())
      return false;
    for (std::size_t k = 0; k < skeleton[i].args.size(); ++k) {
      const std::string& s = skeleton[i].args[k];
      if (s.rfind("@", 0) != 0) {
        if (s != solution[i].args[k]) return false;
        continue;
      }
      auto [it, fresh] = bound.try_emplace(s, solution[i].args[k]);
      if (!fresh && it->second != solution[i].args[k]) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("skeletons keep constants and share repeated values") {
  const Scene scene = make_kitchen_scene();
  const domain::KitchenDomain dom(scene, {});
  const Planned p = plan_task(dom, make_task("inspect", scene, 40, 0));
  const pl::Problem& problem = p.d.problem;
  const Skeleton sk = extract_skeleton(p.plan, problem);
  REQUIRE(sk.size() == p.plan.size());
  std::map<pl::Value, std::string> symbol_of;
  std::map<std::string, pl::Value> value_of;
  for (std::size_t i = 0; i < sk.size(); ++i) {
    CHECK(sk[i].name == problem.actions.at(static_cast<std::size_t>(p.plan[i].schema)).name);
    for (std::size_t k = 0; k < sk[i].args.size(); ++k) {
      const pl::Value v = p.plan[i].args[k];
      const std::string& s = sk[i].args[k];
      if (v.kind == pl::ValueKind::constant) {
        CHECK(s == problem.values->name(v));
        continue;
      }
      REQUIRE(s.rfind("@v", 0) == 0);
      auto [a, fa] = symbol_of.try_emplace(v, s);
      CHECK(a->second == s);
      auto [b, fb] = value_of.try_emplace(s, v);
      CHECK(b->second == v);
    }
  }
}

TEST_CASE("unshared values get a fresh symbol at every occurrence") {
  const Scene scene = make_kitchen_scene();
  const domain::KitchenDomain dom(scene, {});
  const Planned p = plan_task(dom, make_task("stow", scene, 40, 1));
  std::set<pl::Value> unshared;
  for (const auto& a : p.plan)
    for (pl::Value v : a.args)
      if (v.kind != pl::ValueKind::constant) unshared.insert(v);
  const Skeleton sk = extract_skeleton(p.plan, p.d.problem, unshared);
  std::map<std::string, int> uses;
  for (const auto& s : sk)
    for (const auto& arg : s.args)
      if (arg.rfind("@", 0) == 0) ++uses[arg];
  CHECK_FALSE(uses.empty());
  for (const auto& [sym, n] : uses) CHECK(n == 1);
}

TEST_CASE("constrained problems only admit plans that follow the skeleton") {
  const Scene scene = make_kitchen_scene();
  const domain::KitchenDomain dom(scene, {});
  const TaskInstance t = make_task("inspect", scene, 40, 2);
  const Planned p = plan_task(dom, t);
  const Skeleton sk = extract_skeleton(p.plan, p.d.problem);

  EffortClock clock;
  domain::Determinized d = dom.determinize(t.belief, t.goal, 3, clock);
  constrain_plan(d.problem, sk);
  CHECK(d.problem.actions.size() == sk.size());
  plan::PlannerOptions opts;
  opts.early_actions = dom.early_actions();
  auto sol = plan::solve(d.problem, opts, clock);
  REQUIRE(sol);
  std::vector<SkeletonStep> steps;
  for (const auto& a : sol->plan) {
    SkeletonStep s{d.problem.actions.at(static_cast<std::size_t>(a.schema)).name, {}};
    for (pl::Value v : a.args) s.args.push_back(d.problem.values->str(v));
    steps.push_back(std::move(s));
  }
  CHECK(steps.size() == sk.size());
  CHECK(follows(sk, steps));
}

TEST_CASE("constraining with a bad skeleton throws") {
  const Scene scene = make_kitchen_scene();
  const domain::KitchenDomain dom(scene, {});
  EffortClock clock;
  const TaskInstance t = make_task("inspect", scene, 10, 0);
  domain::Determinized d = dom.determinize(t.belief, t.goal, 1, clock);
  CHECK_THROWS_AS(constrain_plan(d.problem, {}), pl::PlanError);
  pl::Problem copy = d.problem;
  CHECK_THROWS_AS(constrain_plan(copy, {{"teleport", {}}}), pl::PlanError);
  CHECK_THROWS_AS(constrain_plan(d.problem, {{"detect", {"@v0"}}}), pl::PlanError);
}

TEST_CASE("policy runs end with the goal holding under the final belief") {
  const Scene scene = make_kitchen_scene();
  for (bool constrain : {false, true}) {
    const domain::KitchenDomain dom(scene, {});
    const TaskInstance t = make_task("inspect", scene, 50, 4);
    EnvSimulator env(scene, dom.config().sensor, {}, t.latent, 4);
    PolicyOptions o;
    o.constrain = constrain;
    const TrialResult r = run_policy(dom, t, env, o, 4);
    CHECK(r.success);
    CHECK(r.reason == "goal");
    CHECK(domain::goal_holds(t.goal, r.final_belief, scene));
    CHECK(r.modeled <= o.budget);
    CHECK(r.steps == static_cast<int>(r.episodes.size()) - 1);
    for (const auto& a : r.attempts)
      if (a.solved) CHECK(follows(a.skeleton, a.solution));
    if (!constrain) CHECK(r.attempts.empty());
  }
}

TEST_CASE("a zero budget fails before planning") {
  const Scene scene = make_kitchen_scene();
  const domain::KitchenDomain dom(scene, {});
  const TaskInstance t = make_task("cook", scene, 20, 0);
  EnvSimulator env(scene, dom.config().sensor, {}, t.latent, 0);
  PolicyOptions o;
  o.budget = 0.0;
  const TrialResult r = run_policy(dom, t, env, o, 0);
  CHECK_FALSE(r.success);
  CHECK(r.reason == "budget");
  CHECK(r.steps == 0);
}
