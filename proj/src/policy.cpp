#include "bsr/policy.hpp"

#include <chrono>
#include <map>
#include <set>

namespace bsr {

using pl::Formula;
using pl::Term;

Skeleton extract_skeleton(const std::vector<pl::GroundAction>& plan, const pl::Problem& problem,
                          const std::set<pl::Value>& unshared) {
  Skeleton out;
  std::map<pl::Value, std::string> symbols;
  int next = 0;
  for (const auto& a : plan) {
    SkeletonStep step{problem.actions.at(static_cast<std::size_t>(a.schema)).name, {}};
    for (pl::Value v : a.args) {
      if (v.kind == pl::ValueKind::constant) {
        step.args.push_back(problem.values->name(v));
        continue;
      }
      if (unshared.count(v)) {
        step.args.push_back("@v" + std::to_string(next++));
        continue;
      }
      auto [it, fresh] = symbols.try_emplace(v, "");
      if (fresh) it->second = "@v" + std::to_string(next++);
      step.args.push_back(it->second);
    }
    out.push_back(std::move(step));
  }
  return out;
}

void constrain_plan(pl::Problem& problem, const Skeleton& skeleton) {
  if (skeleton.empty()) throw pl::PlanError("cannot constrain to an empty skeleton");
  pl::Vocabulary& vocab = *problem.vocab;
  pl::ValueStore& values = *problem.values;
  const int applied = vocab.id("Applied");
  const int bound = vocab.id("Bound");
  const int assigned = vocab.id("Assigned");
  auto step_value = [&](std::size_t i) { return values.constant("step" + std::to_string(i)); };

  std::vector<pl::ActionSchema> copies;
  for (std::size_t i = 0; i < skeleton.size(); ++i) {
    const SkeletonStep& s = skeleton[i];
    const pl::ActionSchema* base = nullptr;
    for (const auto& a : problem.actions)
      if (a.name == s.name) base = &a;
    if (!base) throw pl::PlanError("skeleton refers to unknown action " + s.name);
    if (base->params.size() != s.args.size()) throw pl::PlanError("skeleton arity mismatch for " + s.name);

    pl::ActionSchema copy = *base;
    std::vector<Formula> pre{base->pre};
    pre.push_back(Formula::negate(Formula::of({applied, {Term::fixed(step_value(i))}})));
    if (i > 0) pre.push_back(Formula::of({applied, {Term::fixed(step_value(i - 1))}}));
    copy.add.push_back({applied, {Term::fixed(step_value(i))}});
    for (std::size_t k = 0; k < s.args.size(); ++k) {
      const std::string& p = base->params[k];
      const std::string& arg = s.args[k];
      if (arg.rfind("@", 0) != 0) {
        pre.push_back(Formula::equal(Term::variable(p), Term::fixed(values.constant(arg))));
        continue;
      }
      const Term symbol = Term::fixed(values.constant(arg));
      pre.push_back(Formula::imply(Formula::of({bound, {symbol}}),
                                   Formula::of({assigned, {symbol, Term::variable(p)}})));
      copy.add.push_back({bound, {symbol}});
      copy.add.push_back({assigned, {symbol, Term::variable(p)}});
    }
    copy.pre = Formula::all(std::move(pre));
    copies.push_back(std::move(copy));
  }
  problem.actions = std::move(copies);
  problem.goal = Formula::all(
      {problem.goal, Formula::of({applied, {Term::fixed(step_value(skeleton.size() - 1))}})});
}

namespace {

struct NamedFact {
  std::string pred;
  std::vector<std::string> args;
};

void update_belief(FactoredBelief& b, const Command& c, const Observation& o,
                   const domain::KitchenDomain& domain, const FactoredBelief& prior) {
  const Scene& scene = domain.scene();
  const SensorModel& sensor = domain.config().sensor;
  if (c.kind == CommandKind::detect) {
    try {
      b = o.detected ? update_detection(b, c.object, o.z, sensor, scene)
                     : update_no_detection(b, c.object, sensor, scene);
    } catch (const DegenerateBelief&) {
      // Fall back to the prior support with uniform weights.
      ParticleBelief reset = prior.poses.at(c.object);
      for (auto& p : reset.particles) p.weight = 1.0 / static_cast<double>(reset.particles.size());
      b.poses[c.object] = std::move(reset);
    }
  } else if (o.success) {
    try {
      b = transition_update(b, c, scene,
                            {domain.config().grasp_tolerance, domain.config().localized_probability});
    } catch (const BeliefPreconditionError&) {
    }
  }
  b.robot = o.robot;
  b.held = o.robot.holding;
  if (b.held) b.poses.erase(b.held->object);
  b.joints = o.joints;
  b.stove_on = o.stove_on;
  b.cooked = o.cooked;
}

ParticleBelief prune(const ParticleBelief& pb, double threshold) {
  const double total = pb.total_weight();
  if (total <= 0.0) return pb;
  ParticleBelief out{pb.object, {}};
  for (const auto& p : pb.particles)
    if (p.weight / total >= threshold) out.particles.push_back(p);
  if (out.particles.empty()) return pb;
  return normalize(std::move(out));
}

}  // namespace

TrialResult run_policy(const domain::KitchenDomain& domain, const TaskInstance& task,
                       EnvSimulator& env, const PolicyOptions& options, std::uint64_t seed) {
  const auto wall_start = std::chrono::steady_clock::now();
  TrialResult r;
  r.task = task.name;
  r.seed = seed;
  EffortClock clock;
  FactoredBelief b = task.belief;
  Skeleton tail;
  std::vector<NamedFact> f_prev;
  std::mt19937_64 resample_rng(domain::fnv1a("resample", seed));

  for (int episode = 0;; ++episode) {
    if (r.steps >= options.max_steps) {
      r.reason = "steps";
      break;
    }
    if (clock.now() >= options.budget) {
      r.reason = "budget";
      break;
    }
    EpisodeRecord rec;
    rec.episode = episode;
    const std::uint64_t episode_seed = domain::fnv1a(task.name + "/" + std::to_string(episode), seed);
    domain::Determinized d = domain.determinize(b, task.goal, episode_seed, clock);
    rec.base_now = d.problem.values->str(d.problem.values->numeric({b.robot.base}, "q"));
    rec.arm_now = d.problem.values->str(d.problem.values->numeric({b.robot.arm.x, b.robot.arm.y}, "aq"));

    plan::PlannerOptions popts = options.planner;
    popts.defer = options.defer;
    popts.early_actions = domain.early_actions();
    plan::StreamLog log;
    log.episode = episode;
    std::optional<plan::Solution> sol;

    if (options.constrain && !tail.empty()) {
      pl::Problem constrained = d.problem;
      for (const auto& f : f_prev) {
        pl::Fact g{constrained.vocab->id(f.pred), {}};
        for (const auto& a : f.args) g.args.push_back(constrained.values->constant(a));
        constrained.init.push_back(std::move(g));
      }
      constrain_plan(constrained, tail);
      popts.deadline = clock.now() + options.constrained_fraction * (options.budget - clock.now());
      sol = plan::solve(constrained, popts, clock, &log);
      ConstrainedAttempt attempt;
      attempt.episode = episode;
      attempt.skeleton = tail;
      attempt.solved = sol.has_value();
      if (sol) {
        for (const auto& a : sol->plan) {
          SkeletonStep s{constrained.actions.at(static_cast<std::size_t>(a.schema)).name, {}};
          for (pl::Value v : a.args) s.args.push_back(constrained.values->str(v));
          attempt.solution.push_back(std::move(s));
        }
        d.problem = std::move(constrained);
        rec.constrained = true;
      }
      r.attempts.push_back(std::move(attempt));
    }
    if (!sol) {
      popts.deadline = options.budget;
      sol = plan::solve(d.problem, popts, clock, &log);
    }
    for (const auto& call : log.calls)
      if (call.stream == "motion") rec.motion_inputs.push_back(call.inputs);
    rec.modeled = clock.now();

    if (!sol) {
      r.reason = clock.now() >= options.budget ? "budget" : "no-plan";
      r.episodes.push_back(std::move(rec));
      break;
    }
    if (sol->plan.empty()) {
      r.success = true;
      r.reason = "goal";
      r.episodes.push_back(std::move(rec));
      break;
    }

    const pl::GroundAction& first = sol->plan.front();
    rec.action = pl::str(first, d.problem);
    rec.plan_length = static_cast<int>(sol->plan.size());
    for (const auto& a : sol->plan) rec.plan.push_back(pl::str(a, d.problem));
    rec.complete = sol->complete;
    const Command command = domain.command(d, first);
    rec.command = to_string(command.kind);
    const Observation obs = env.step(command);
    rec.success = obs.success;
    rec.detected = obs.detected;
    update_belief(b, command, obs, domain, task.belief);
    for (auto& [o, pb] : b.poses) {
      pb = prune(pb, options.prune_weight);
      if (options.resample) pb = resample_if_degenerate(pb, resample_rng);
    }
    ++r.steps;

    // The executed action's values describe a state that noise may have
    // changed, so they are not carried over as shared symbols.
    const std::set<pl::Value> executed(first.args.begin(), first.args.end());
    tail = extract_skeleton({sol->plan.begin() + 1, sol->plan.end()}, d.problem, executed);
    f_prev.clear();
    for (const auto& f : sol->preimage) {
      bool constant = true;
      for (pl::Value v : f.args) constant = constant && v.kind == pl::ValueKind::constant;
      if (!constant) continue;
      NamedFact nf{d.problem.vocab->at(f.pred).name, {}};
      for (pl::Value v : f.args) nf.args.push_back(d.problem.values->name(v));
      f_prev.push_back(std::move(nf));
    }
    r.episodes.push_back(std::move(rec));
  }

  r.modeled = clock.now();
  r.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  r.final_belief = std::move(b);
  r.final_latent = env.state();
  return r;
}

}  // namespace bsr
