// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "bsr/benchmark.hpp"
#include "bsr/obsmodel.hpp"
#include "bsr/planner.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace bsr;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const Outcome& o) {
  std::cout << (o.pass ? "PASS" : "FAIL") << " " << id << " " << title;
  if (!o.detail.empty()) std::cout << ": " << o.detail;
  std::cout << std::endl;
  if (!o.pass) ++failures;
}

template <typename... Args>
std::string cat(const Args&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

Outcome self_loop() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> cost(0.5, 5.0), prob(0.3, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const SelfLoopCosts c{cost(rng), cost(rng), prob(rng)};
    const double mc = oracle::self_loop_mean_cost(c.success, c.recover, c.p_success, 100000, rng);
    worst = std::max(worst, std::abs(mc - determinized_cost(c)) / mc);
  }
  const double t = seconds_since(start);
  return {worst < 0.02 && t < 10.0, cat("max relative error ", worst, ", ", t, " s")};
}

// Regions drawn from the sampler at a few radii, plus every single support point.
std::vector<ObservationHypothesis> regions(const oracle::DiscreteScene& s, double epsilon,
                                           std::mt19937_64& rng) {
  std::vector<ObservationHypothesis> out;
  for (double delta : {0.0, 0.15, 0.4, 10.0}) {
    ObservationSampler sampler(s.target, delta, epsilon, rng);
    while (auto h = sampler.next()) out.push_back(*h);
  }
  return out;
}

Outcome factored_bound() {
  const auto start = Clock::now();
  std::mt19937_64 rng(202);
  int violations = 0, independent = 0, checked = 0;
  for (int scene = 0; scene < 50; ++scene) {
    const auto s = oracle::random_discrete_scene(rng);
    for (const auto& h : regions(s, 0.0, rng)) {
      double product = 1.0;
      for (const auto& occ : s.occluders) product *= visibility_lower_bound(h, occ, {}, s.scene);
      for (const auto& x : h.region) {
        ++checked;
        if (product > oracle::exact_visibility(s, x.position) + 1e-12) ++violations;
        // Diagnostic only: the same check with independent occluders.
        if (product > oracle::exact_visibility(s, x.position, false) + 1e-12) ++independent;
      }
    }
  }
  const double t = seconds_since(start);
  return {violations == 0 && checked > 0 && t < 30.0,
          cat(checked, " region points, ", violations, " violations (", independent,
              " with independent occluders), ", t, " s")};
}

Outcome detection_bound() {
  std::mt19937_64 scenes(202);
  std::mt19937_64 rng(303);
  int violations = 0, independent = 0, checked = 0;
  double worst = -1.0;
  for (int scene = 0; scene < 50; ++scene) {
    const auto s = oracle::random_discrete_scene(scenes);
    std::map<std::string, ParticleBelief> occluders;
    for (const auto& o : s.occluders) occluders[o.object] = o;
    const int n = static_cast<int>(s.occluders.size()) + 1;
    for (double epsilon : {0.0, 0.05, 0.2}) {
      ObservationSampler sampler(s.target, 0.3, epsilon, rng);
      auto h = sampler.next();
      while (h && is_b_occluded(*h, occluders, {}, s.scene)) h = sampler.next();
      if (!h) continue;
      for (double p_fn : {0.0, 0.1, 0.3}) {
        ++checked;
        const double bound = detection_probability_bound(*h, {n, p_fn});
        const auto f = oracle::sampled_detection(s, h->region, p_fn, 100000, rng);
        // Sampling noise: four standard errors, plus a floor for frequencies near 0 or 1.
        const double slack = 4.0 * std::max(f.std_error, 1e-3);
        worst = std::max(worst, bound - f.mean);
        if (bound > f.mean + slack) ++violations;
        // Diagnostic only: exact detection probability with independent occluders.
        if (bound > oracle::exact_detection(s, h->region, p_fn, false) + 1e-12) ++independent;
      }
    }
  }
  return {violations == 0 && checked > 0,
          cat(checked, " cases, ", violations, " violations (", independent,
              " with independent occluders), max bound - frequency ", worst)};
}

Outcome must_move() {
  const auto start = Clock::now();
  const testing::OcclusionExample fig;
  using S = std::set<std::string>;
  const S all = fig.must_move(fig.hypothesis({fig.x1, fig.x2, fig.x3}));
  const S two = fig.must_move(fig.hypothesis({fig.x1, fig.x3}));
  const S one = fig.must_move(fig.hypothesis({fig.x1}));
  const double t = seconds_since(start);
  auto str = [](const S& s) {
    std::string out = "{";
    for (const auto& x : s) out += (out.size() > 1 ? "," : "") + x;
    return out + "}";
  };
  return {all == S{"A", "B", "C"} && two == S{"A", "C"} && one == S{"A"} && t < 1.0,
          cat(str(all), " ", str(two), " ", str(one))};
}

Outcome histogram_filter() {
  const oracle::CellWorld world;
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.2);
  double worst = 0.0;
  for (int sequence = 0; sequence < 50; ++sequence) {
    std::array<double, 5> prior{};
    double total = 0.0;
    for (double& v : prior) total += (v = 0.1 + u(rng));
    for (double& v : prior) v /= total;
    FactoredBelief b = world.particle_prior(prior);
    auto h = prior;
    const int truth = std::uniform_int_distribution<int>(0, 3)(rng);
    for (int step = 0; step < 20; ++step) {
      if (u(rng) < 0.5) {
        const Vec2 z{world.cells[truth].x + noise(rng), world.cells[truth].y + noise(rng)};
        b = update_detection(b, "target", z, world.sensor, world.scene);
        h = oracle::histogram_detection(world, h, z);
      } else {
        b = update_no_detection(b, "target", world.sensor, world.scene);
        h = oracle::histogram_no_detection(world, h);
      }
      const auto mass = world.cell_mass(b.poses.at("target"));
      for (int i = 0; i < 5; ++i) worst = std::max(worst, std::abs(mass[i] - h[i]));
    }
  }
  return {worst <= 1e-9, cat("max per-cell difference ", worst)};
}

bool follows(const Skeleton& skeleton, const std::vector<SkeletonStep>& solution, std::string& why) {
  if (solution.size() < skeleton.size()) {
    why = "solution shorter than skeleton";
    return false;
  }
  std::map<std::string, std::string> bound;
  for (std::size_t i = 0; i < skeleton.size(); ++i) {
    const auto& s = skeleton[i];
    const auto& a = solution[i];
    if (s.name != a.name || s.args.size() != a.args.size()) {
      why = cat("step ", i, ": ", s.name, " vs ", a.name);
      return false;
    }
    for (std::size_t k = 0; k < s.args.size(); ++k) {
      if (s.args[k].rfind("@", 0) != 0) {
        if (s.args[k] != a.args[k]) {
          why = cat("step ", i, " constant ", s.args[k], " vs ", a.args[k]);
          return false;
        }
        continue;
      }
      auto [it, fresh] = bound.try_emplace(s.args[k], a.args[k]);
      if (!fresh && it->second != a.args[k]) {
        why = cat("symbol ", s.args[k], " bound to ", it->second, " and ", a.args[k]);
        return false;
      }
    }
  }
  return true;
}

Outcome skeleton_preservation(const BenchmarkResult& r) {
  int episodes = 0, violations = 0;
  std::string first;
  for (const auto& t : r.trials) {
    for (const auto& a : t.detail.attempts) {
      if (!a.solved) continue;
      ++episodes;
      std::string why;
      if (!follows(a.skeleton, a.solution, why)) {
        ++violations;
        if (first.empty()) first = cat(" (", t.task, " seed ", t.seed, ": ", why, ")");
      }
    }
  }
  return {episodes >= 100 && violations == 0,
          cat(episodes, " constrained episodes, ", violations, " violations", first)};
}

// Pick fixture: move the base, move the arm, then pick. Grasps and base
// reach must be bound before the base motion; inverse kinematics and the
// arm motion can wait.
struct PickFixture {
  pl::Problem p;

  PickFixture() {
    using namespace pl;
    p.vocab = std::make_shared<Vocabulary>();
    p.values = std::make_shared<ValueStore>();
    auto& v = *p.vocab;
    const int obj = v.declare("Obj", 1, PredKind::static_fact);
    const int grasp = v.declare("Grasp", 2, PredKind::static_fact);
    const int reach = v.declare("Reach", 3, PredKind::static_fact);
    const int kin = v.declare("Kin", 4, PredKind::static_fact);
    const int bconf = v.declare("BConf", 1, PredKind::static_fact);
    const int aconf = v.declare("AConf", 1, PredKind::static_fact);
    const int btraj = v.declare("BTraj", 3, PredKind::static_fact);
    const int atraj = v.declare("ATraj", 3, PredKind::static_fact);
    const int at_base = v.declare("AtBase", 1, PredKind::fluent);
    const int at_arm = v.declare("AtArm", 1, PredKind::fluent);
    const int holding = v.declare("Holding", 1, PredKind::fluent);
    auto var = [](const char* n) { return Term::variable(n); };
    auto values = p.values;

    const Value o = values->constant("cup");
    const Value q0 = values->numeric({0.0}, "q");
    const Value a0 = values->numeric({0.0, 0.0}, "aq");
    p.init = {{obj, {o}}, {bconf, {q0}}, {aconf, {a0}}, {at_base, {q0}}, {at_arm, {a0}}};

    auto stream = [&](std::string name, std::vector<std::string> in, std::vector<Atom> dom,
                      std::vector<std::string> out, std::vector<std::string> tags, std::vector<Atom> cert,
                      bool deferrable, std::function<Value(const std::vector<Value>&)> make) {
      StreamSchema s;
      s.name = std::move(name);
      s.inputs = std::move(in);
      s.domain = std::move(dom);
      s.outputs = std::move(out);
      s.output_tags = std::move(tags);
      s.certified = std::move(cert);
      s.deferrable = deferrable;
      s.generator = [make](const std::vector<Value>& args) {
        struct G : Generator {
          std::function<Value(const std::vector<Value>&)> make;
          std::vector<Value> args;
          bool done = false;
          std::optional<StreamOutput> next() override {
            if (done) return std::nullopt;
            done = true;
            return StreamOutput{{make(args)}, {}};
          }
        };
        auto g = std::make_unique<G>();
        g->make = make;
        g->args = args;
        return g;
      };
      p.streams.push_back(std::move(s));
    };
    stream("grasps", {"?o"}, {Atom{obj, {var("?o")}}}, {"?g"}, {"g"}, {Atom{grasp, {var("?o"), var("?g")}}},
           false, [values](const std::vector<Value>&) { return values->numeric({0.0, -0.05}, "g"); });
    stream("inv-reach", {"?o", "?g"}, {Atom{grasp, {var("?o"), var("?g")}}}, {"?q"}, {"q"},
           {Atom{reach, {var("?o"), var("?g"), var("?q")}}, Atom{bconf, {var("?q")}}}, false,
           [values](const std::vector<Value>&) { return values->numeric({1.0}, "q"); });
    stream("inv-kin", {"?o", "?g", "?q"}, {Atom{reach, {var("?o"), var("?g"), var("?q")}}}, {"?a"}, {"aq"},
           {Atom{kin, {var("?o"), var("?g"), var("?q"), var("?a")}}, Atom{aconf, {var("?a")}}}, true,
           [values](const std::vector<Value>&) { return values->numeric({0.3, -0.4}, "aq"); });
    stream("motion(base)", {"?q1", "?q2"}, {Atom{bconf, {var("?q1")}}, Atom{bconf, {var("?q2")}}}, {"?t"},
           {"t"}, {Atom{btraj, {var("?q1"), var("?t"), var("?q2")}}}, true,
           [values](const std::vector<Value>&) { return values->opaque(Trajectory{}, "t"); });
    stream("motion(arm)", {"?a1", "?a2"}, {Atom{aconf, {var("?a1")}}, Atom{aconf, {var("?a2")}}}, {"?t"},
           {"t"}, {Atom{atraj, {var("?a1"), var("?t"), var("?a2")}}}, true,
           [values](const std::vector<Value>&) { return values->opaque(Trajectory{}, "t"); });

    ActionSchema move_base;
    move_base.name = "move-base";
    move_base.params = {"?q1", "?t", "?q2"};
    move_base.pre = Formula::all({Formula::of(Atom{at_base, {var("?q1")}}),
                                  Formula::of(Atom{btraj, {var("?q1"), var("?t"), var("?q2")}})});
    move_base.add = {Atom{at_base, {var("?q2")}}};
    move_base.del = {Atom{at_base, {var("?q1")}}};
    move_base.cost = CostExpr{2.0, std::nullopt};

    ActionSchema move_arm;
    move_arm.name = "move-arm";
    move_arm.params = {"?a1", "?t", "?a2"};
    move_arm.pre = Formula::all({Formula::of(Atom{at_arm, {var("?a1")}}),
                                 Formula::of(Atom{atraj, {var("?a1"), var("?t"), var("?a2")}})});
    move_arm.add = {Atom{at_arm, {var("?a2")}}};
    move_arm.del = {Atom{at_arm, {var("?a1")}}};
    move_arm.cost = CostExpr{1.0, std::nullopt};

    ActionSchema pick;
    pick.name = "pick";
    pick.params = {"?o", "?g", "?q", "?a"};
    pick.pre = Formula::all({Formula::of(Atom{kin, {var("?o"), var("?g"), var("?q"), var("?a")}}),
                             Formula::of(Atom{at_base, {var("?q")}}), Formula::of(Atom{at_arm, {var("?a")}})});
    pick.add = {Atom{holding, {var("?o")}}};
    pick.cost = CostExpr{1.0, std::nullopt};

    p.actions = {move_base, move_arm, pick};
    p.goal = Formula::of(Atom{holding, {Term::fixed(o)}});
  }
};

Outcome deferral_fixture() {
  PickFixture f;
  EffortClock clock;
  plan::PlannerOptions opts;
  plan::StreamSession session(f.p, opts, clock, nullptr);
  session.evaluate_eager();
  session.optimistic_layer(4);
  const plan::Task task = session.ground();
  const auto found = plan::search(task, f.p.max_cost, {}, clock);
  if (!found.plan) return {false, "no plan for the fixture"};
  const auto sp = session.extract_stream_plan(task, *found.plan);
  const auto sched = session.schedule_deferred(sp, true);
  auto names = [&](const std::vector<int>& ids) {
    std::set<std::string> out;
    for (int i : ids) out.insert(f.p.streams.at(static_cast<std::size_t>(session.instances().at(i).schema)).name);
    return out;
  };
  const auto now = names(sched.now), deferred = names(sched.deferred);
  using S = std::set<std::string>;
  const bool ok = now == S{"grasps", "inv-reach", "motion(base)"} && deferred == S{"inv-kin", "motion(arm)"} &&
                  sched.now.size() == 3 && sched.deferred.size() == 2;
  auto str = [](const S& s) {
    std::string out;
    for (const auto& x : s) out += (out.empty() ? "" : ",") + x;
    return "{" + out + "}";
  };
  return {ok, cat("now ", str(now), " deferred ", str(deferred))};
}

// Fields of "move(part, q1, t, q2)".
std::vector<std::string> action_args(const std::string& action) {
  std::vector<std::string> out;
  const auto open = action.find('('), close = action.rfind(')');
  if (open == std::string::npos || close == std::string::npos) return out;
  std::stringstream ss(action.substr(open + 1, close - open - 1));
  for (std::string item; std::getline(ss, item, ',');) {
    item.erase(0, item.find_first_not_of(' '));
    out.push_back(item);
  }
  return out;
}

Outcome deferral_benchmark(const BenchmarkResult& r) {
  int motions = 0, violations = 0, executed_moves = 0;
  std::string first;
  for (const auto& t : r.trials) {
    if (t.ablation != "deferred" && t.ablation != "both") continue;
    for (const auto& e : t.detail.episodes) {
      std::set<std::string> evaluated;
      for (const auto& m : e.motion_inputs) {
        ++motions;
        evaluated.insert(m);
        std::stringstream ss(m);
        std::string part, q1, q2;
        ss >> part >> q1 >> q2;
        const std::string& now = part == "base" ? e.base_now : e.arm_now;
        if (q1 != now) {
          ++violations;
          if (first.empty()) first = cat(" (", t.task, " seed ", t.seed, " episode ", e.episode, ": ", m, ")");
        }
      }
      if (e.action.rfind("move(", 0) == 0) {
        ++executed_moves;
        const auto a = action_args(e.action);
        if (a.size() == 4 && !evaluated.count(a[0] + " " + a[1] + " " + a[3])) {
          ++violations;
          if (first.empty()) first = cat(" (", t.task, " seed ", t.seed, ": executed ", e.action, " without its motion)");
        }
      }
    }
  }
  return {violations == 0 && motions > 0,
          cat(motions, " motion evaluations, ", executed_moves, " executed moves, ", violations, " violations", first)};
}

Outcome table_trends(const BenchmarkResult& r, double wall) {
  std::vector<std::string> problems;
  for (const auto& task : task_names()) {
    const auto& both = r.cell(task, "both");
    const auto& neither = r.cell(task, "neither");
    if (both.success_rate < neither.success_rate)
      problems.push_back(cat(task, " both ", both.success_rate, "% < neither ", neither.success_rate, "%"));
  }
  for (const char* task : {"swap", "cook"})
    if (r.cell(task, "both").success_rate < 80.0)
      problems.push_back(cat(task, " both ", r.cell(task, "both").success_rate, "% < 80%"));
  const double tb = r.cell("inspect", "both").mean_success_time;
  const double tn = r.cell("inspect", "neither").mean_success_time;
  if (tb > 1.2 * tn) problems.push_back(cat("inspect time both ", tb, " > 1.2 x neither ", tn));
  if (wall > 90.0 * 60.0) problems.push_back(cat("suite took ", wall, " s"));
  std::string detail;
  for (const auto& task : task_names())
    detail += cat(task, " ", r.cell(task, "neither").success_rate, "->", r.cell(task, "both").success_rate, "% ");
  detail += cat("inspect time ", tn, "->", tb, " s, suite ", wall, " s");
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

Outcome policy_correctness(const BenchmarkResult& r, const Scene& scene) {
  int successes = 0, violations = 0;
  for (const auto& t : r.trials) {
    if (!t.success) continue;
    ++successes;
    const TaskInstance instance = make_task(t.task, scene, 1, t.seed);
    if (!domain::goal_holds(instance.goal, t.detail.final_belief, scene)) ++violations;
  }
  return {successes > 0 && violations == 0, cat(successes, " successful trials, ", violations, " violations")};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism(const BenchmarkResult& first, const BenchmarkConfig& config) {
  const auto root = std::filesystem::temp_directory_path() / "bsr_acceptance";
  std::filesystem::remove_all(root);
  write_results(first, config, root / "a");
  write_results(run_benchmark(config), config, root / "b");
  std::vector<std::string> differing;
  for (const char* file : {"trials.jsonl", "table.csv", "config.json"})
    if (slurp(root / "a" / file) != slurp(root / "b" / file)) differing.push_back(file);
  std::filesystem::remove_all(root);
  std::string detail = differing.empty() ? "trials.jsonl, table.csv and config.json identical" : "differ:";
  for (const auto& d : differing) detail += " " + d;
  return {differing.empty(), detail};
}

}  // namespace

int main() {
  auto guarded = [](int id, const std::string& title, const std::function<Outcome()>& f) {
    try {
      report(id, title, f());
    } catch (const std::exception& e) {
      report(id, title, {false, cat("exception: ", e.what())});
    }
  };
  guarded(1, "self-loop determinization", self_loop);
  guarded(2, "factored visibility bound", factored_bound);
  guarded(3, "detection bound", detection_bound);
  guarded(4, "must-move sets", must_move);
  guarded(5, "histogram filter equivalence", histogram_filter);

  BenchmarkConfig config;
  config.scene = make_kitchen_scene();
  const auto start = Clock::now();
  BenchmarkResult result;
  try {
    result = run_benchmark(config);
  } catch (const std::exception& e) {
    for (int id : {6, 7, 8, 9, 10}) report(id, "benchmark", {false, cat("exception: ", e.what())});
    return 1;
  }
  const double wall = seconds_since(start);
  std::cout << format_table(result) << std::flush;

  guarded(6, "skeleton preservation", [&] { return skeleton_preservation(result); });
  guarded(7, "deferral", [&] {
    Outcome a = deferral_fixture(), b = deferral_benchmark(result);
    return Outcome{a.pass && b.pass, a.detail + "; " + b.detail};
  });
  guarded(8, "ablation trends", [&] { return table_trends(result, wall); });
  guarded(9, "policy correctness", [&] { return policy_correctness(result, config.scene); });
  guarded(10, "determinism", [&] { return determinism(result, config); });
  return failures == 0 ? 0 : 1;
}
