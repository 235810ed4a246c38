#include "bsr/planner.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <queue>
#include <unordered_map>

#include "bsr/log.hpp"

namespace bsr::plan {

using pl::Atom;
using pl::Bindings;
using pl::Formula;
using pl::PlanError;
using pl::PredKind;
using pl::ValueKind;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kGoalPred = -1;

using FactIndex = std::map<int, std::vector<const Fact*>>;

FactIndex index_facts(const std::vector<const std::vector<Fact>*>& sources) {
  FactIndex idx;
  for (const auto* src : sources)
    for (const auto& f : *src) idx[f.pred].push_back(&f);
  return idx;
}

bool unify(const Atom& a, const Fact& f, Bindings& b, std::vector<std::string>& added) {
  if (a.args.size() != f.args.size()) return false;
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    const auto& t = a.args[i];
    if (!t.is_var()) {
      if (t.value != f.args[i]) return false;
      continue;
    }
    auto it = b.find(t.var);
    if (it == b.end()) {
      b.emplace(t.var, f.args[i]);
      added.push_back(t.var);
    } else if (it->second != f.args[i]) {
      return false;
    }
  }
  return true;
}

template <typename Callback>
void join(std::vector<const Atom*> atoms, const FactIndex& idx, Bindings& b, Callback&& cb) {
  if (atoms.empty()) {
    cb(b);
    return;
  }
  std::size_t best = 0;
  long best_score = -1;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    long bound = 0;
    for (const auto& t : atoms[i]->args) bound += (!t.is_var() || b.count(t.var)) ? 1 : 0;
    auto it = idx.find(atoms[i]->pred);
    const long size = it == idx.end() ? 0 : static_cast<long>(it->second.size());
    const long score = bound * 1000000 - size;
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  const Atom* a = atoms[best];
  atoms.erase(atoms.begin() + static_cast<long>(best));
  auto it = idx.find(a->pred);
  if (it == idx.end()) return;
  for (const Fact* f : it->second) {
    std::vector<std::string> added;
    if (unify(*a, *f, b, added)) join(atoms, idx, b, cb);
    for (const auto& v : added) b.erase(v);
  }
}

void flatten(const Formula& f, std::vector<const Formula*>& out) {
  if (f.op == Formula::Op::conjunction) {
    for (const auto& c : f.children) flatten(c, out);
  } else if (f.op != Formula::Op::truth) {
    out.push_back(&f);
  }
}

std::string join_values(const std::vector<Value>& vs, const pl::ValueStore& store) {
  std::string out;
  for (std::size_t i = 0; i < vs.size(); ++i) out += (i ? " " : "") + store.str(vs[i]);
  return out;
}

Bindings stream_bindings(const pl::StreamSchema& s, const std::vector<Value>& in,
                         const std::vector<Value>& out) {
  Bindings b;
  for (std::size_t i = 0; i < s.inputs.size(); ++i) b[s.inputs[i]] = in.at(i);
  for (std::size_t i = 0; i < s.outputs.size(); ++i) b[s.outputs[i]] = out.at(i);
  return b;
}

// Dynamic bitset over atom ids.
struct Bits {
  std::vector<std::uint64_t> w;
  explicit Bits(std::size_t n = 0) : w((n + 63) / 64, 0) {}
  bool test(int i) const { return (w[static_cast<std::size_t>(i) >> 6] >> (i & 63)) & 1u; }
  void set(int i) { w[static_cast<std::size_t>(i) >> 6] |= (std::uint64_t{1} << (i & 63)); }
  void reset(int i) { w[static_cast<std::size_t>(i) >> 6] &= ~(std::uint64_t{1} << (i & 63)); }
};

struct BitsHash {
  std::size_t operator()(const std::vector<std::uint64_t>& v) const {
    std::uint64_t h = 1469598103934665603ull;
    for (auto x : v) {
      h ^= x;
      h *= 1099511628211ull;
      h ^= h >> 29;
    }
    return static_cast<std::size_t>(h);
  }
};

bool applicable(const CompiledAction& a, const Bits& s) {
  for (int p : a.pre)
    if (!s.test(p)) return false;
  for (int p : a.pre_not)
    if (s.test(p)) return false;
  for (const auto& [p, q] : a.implies)
    if (s.test(p) && !s.test(q)) return false;
  return true;
}

void apply_bits(const CompiledAction& a, Bits& s) {
  for (int d : a.del) s.reset(d);
  for (int d : a.add) s.set(d);
}

class RelaxedHeuristic {
 public:
  RelaxedHeuristic(const Task& task, Heuristic kind) : task_(task), kind_(kind) {
    const std::size_t n = task.atoms.size();
    by_pre_.resize(n);
    for (std::size_t i = 0; i < task.actions.size(); ++i) {
      const auto& a = task.actions[i];
      if (a.pre.empty()) free_.push_back(static_cast<int>(i));
      for (int p : a.pre) by_pre_[static_cast<std::size_t>(p)].push_back(static_cast<int>(i));
    }
    cost_.resize(n);
    supporter_.resize(n);
    remaining_.resize(task.actions.size());
    acc_.resize(task.actions.size());
  }

  double operator()(const Bits& s) {
    if (kind_ == Heuristic::blind) return 0.0;
    if (kind_ == Heuristic::goal_count) {
      double h = 0;
      for (int g : task_.goal) h += s.test(g) ? 0 : 1;
      return h;
    }
    std::fill(cost_.begin(), cost_.end(), kInf);
    std::fill(supporter_.begin(), supporter_.end(), -1);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    for (std::size_t i = 0; i < task_.atoms.size(); ++i)
      if (s.test(static_cast<int>(i))) {
        cost_[i] = 0.0;
        queue.push({0.0, static_cast<int>(i)});
      }
    for (std::size_t i = 0; i < task_.actions.size(); ++i) {
      remaining_[i] = static_cast<int>(task_.actions[i].pre.size());
      acc_[i] = 0.0;
    }
    auto fire = [&](int ai) {
      const auto& a = task_.actions[static_cast<std::size_t>(ai)];
      const double v = acc_[static_cast<std::size_t>(ai)] + a.cost;
      for (int q : a.add) {
        auto& c = cost_[static_cast<std::size_t>(q)];
        if (v < c) {
          c = v;
          supporter_[static_cast<std::size_t>(q)] = ai;
          queue.push({v, q});
        }
      }
    };
    for (int ai : free_) fire(ai);
    int goals_left = static_cast<int>(task_.goal.size());
    std::vector<char> popped(task_.atoms.size(), 0);
    while (!queue.empty() && goals_left > 0) {
      auto [c, p] = queue.top();
      queue.pop();
      if (popped[static_cast<std::size_t>(p)] || c > cost_[static_cast<std::size_t>(p)]) continue;
      popped[static_cast<std::size_t>(p)] = 1;
      if (std::find(task_.goal.begin(), task_.goal.end(), p) != task_.goal.end()) --goals_left;
      for (int ai : by_pre_[static_cast<std::size_t>(p)]) {
        auto& acc = acc_[static_cast<std::size_t>(ai)];
        acc = kind_ == Heuristic::hmax ? std::max(acc, c) : acc + c;
        if (--remaining_[static_cast<std::size_t>(ai)] == 0) fire(ai);
      }
    }
    double h = kind_ == Heuristic::hmax ? 0.0 : 0.0;
    for (int g : task_.goal) {
      const double c = cost_[static_cast<std::size_t>(g)];
      if (c == kInf) return kInf;
      h = kind_ == Heuristic::hmax ? std::max(h, c) : h + c;
    }
    if (kind_ != Heuristic::hff) return h;
    // Relaxed plan extraction.
    std::vector<char> marked(task_.actions.size(), 0);
    std::vector<char> seen(task_.atoms.size(), 0);
    std::vector<int> stack(task_.goal.begin(), task_.goal.end());
    double ff = 0.0;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      if (seen[static_cast<std::size_t>(p)]) continue;
      seen[static_cast<std::size_t>(p)] = 1;
      const int ai = supporter_[static_cast<std::size_t>(p)];
      if (ai < 0 || marked[static_cast<std::size_t>(ai)]) continue;
      marked[static_cast<std::size_t>(ai)] = 1;
      const auto& a = task_.actions[static_cast<std::size_t>(ai)];
      ff += a.cost;
      for (int q : a.pre) stack.push_back(q);
    }
    return ff;
  }

 private:
  const Task& task_;
  Heuristic kind_;
  std::vector<std::vector<int>> by_pre_;
  std::vector<int> free_;
  std::vector<double> cost_;
  std::vector<int> supporter_;
  std::vector<int> remaining_;
  std::vector<double> acc_;
};

}  // namespace

bool valid_plan(const Task& task, const std::vector<int>& plan) {
  Bits state(task.atoms.size());
  for (int a : task.init) state.set(a);
  for (int i : plan) {
    const auto& a = task.actions.at(static_cast<std::size_t>(i));
    if (!applicable(a, state)) return false;
    apply_bits(a, state);
  }
  for (int g : task.goal)
    if (!state.test(g)) return false;
  return true;
}

void hoist_actions(const Task& task, const Problem& problem, const std::vector<std::string>& early,
                   std::vector<int>& plan) {
  auto matches = [&](const std::string& pattern, const GroundAction& a) {
    const std::string& name = problem.actions.at(static_cast<std::size_t>(a.schema)).name;
    if (pattern == name) return true;
    if (a.args.empty() || a.args[0].kind != ValueKind::constant) return false;
    return pattern == name + "(" + problem.values->name(a.args[0]) + ")";
  };
  for (const auto& pattern : early) {
    for (std::size_t k = 1; k < plan.size(); ++k) {
      const auto& a = task.actions[static_cast<std::size_t>(plan[k])];
      if (a.goal_action || !matches(pattern, a.action)) continue;
      for (std::size_t j = 0; j < k; ++j) {
        std::vector<int> moved = plan;
        moved.erase(moved.begin() + static_cast<std::ptrdiff_t>(k));
        moved.insert(moved.begin() + static_cast<std::ptrdiff_t>(j), plan[k]);
        if (valid_plan(task, moved)) {
          plan = std::move(moved);
          break;
        }
      }
    }
  }
}

// Search -----------------------------------------------------------------------

SearchResult search(const Task& task, double cost_bound, const SearchOptions& options,
                    EffortClock& clock) {
  SearchResult result;
  const std::size_t n = task.atoms.size();
  Bits init(n);
  for (int a : task.init) init.set(a);

  auto is_goal = [&](const Bits& s) {
    for (int g : task.goal)
      if (!s.test(g)) return false;
    return true;
  };

  std::vector<std::vector<int>> by_first(n);
  std::vector<int> no_pre;
  for (std::size_t i = 0; i < task.actions.size(); ++i) {
    const auto& a = task.actions[i];
    if (a.pre.empty())
      no_pre.push_back(static_cast<int>(i));
    else
      by_first[static_cast<std::size_t>(a.pre.front())].push_back(static_cast<int>(i));
  }

  RelaxedHeuristic heuristic(task, options.heuristic);
  struct Node {
    Bits state;
    double g;
    int parent;
    int action;
  };
  std::vector<Node> nodes;
  std::unordered_map<std::vector<std::uint64_t>, double, BitsHash> best_g;
  using Entry = std::tuple<double, double, int>;  // f, h, node id
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;

  const double h0 = heuristic(init);
  if (h0 == kInf) return result;
  nodes.push_back({init, 0.0, -1, -1});
  best_g[init.w] = 0.0;
  open.push({options.weight * h0, h0, 0});

  while (!open.empty()) {
    auto [f, h, id] = open.top();
    open.pop();
    const Node node = nodes[static_cast<std::size_t>(id)];
    if (node.g > best_g[node.state.w]) continue;
    if (is_goal(node.state)) {
      std::vector<int> plan;
      for (int cur = id; nodes[static_cast<std::size_t>(cur)].parent >= 0;
           cur = nodes[static_cast<std::size_t>(cur)].parent)
        plan.push_back(nodes[static_cast<std::size_t>(cur)].action);
      std::reverse(plan.begin(), plan.end());
      result.plan = std::move(plan);
      result.cost = node.g;
      return result;
    }
    if (result.expansions >= options.max_expansions || clock.now() > options.deadline) {
      result.budget_hit = true;
      return result;
    }
    ++result.expansions;
    clock.charge(clock.costs().expansion);

    auto expand = [&](int ai) {
      const auto& a = task.actions[static_cast<std::size_t>(ai)];
      if (!applicable(a, node.state)) return;
      const double g = node.g + a.cost;
      if (g > cost_bound + 1e-9) return;
      Bits next = node.state;
      apply_bits(a, next);
      auto it = best_g.find(next.w);
      if (it != best_g.end() && it->second <= g) return;
      const double hn = heuristic(next);
      if (hn == kInf) {
        best_g[next.w] = g;
        return;
      }
      best_g[next.w] = g;
      nodes.push_back({std::move(next), g, id, ai});
      open.push({g + options.weight * hn, hn, static_cast<int>(nodes.size() - 1)});
    };
    for (int ai : no_pre) expand(ai);
    for (std::size_t p = 0; p < n; ++p)
      if (node.state.test(static_cast<int>(p)))
        for (int ai : by_first[p]) expand(ai);
  }
  return result;
}

// Stream session ---------------------------------------------------------------

StreamSession::StreamSession(Problem& problem, const PlannerOptions& options, EffortClock& clock,
                             StreamLog* log)
    : problem_(problem), options_(options), clock_(clock), log_(log) {
  for (const auto& f : problem.init)
    if (problem.vocab->at(f.pred).kind == PredKind::static_fact) add_real(f);
  real_functions_ = problem.functions;
}

bool StreamSession::add_real(const Fact& f) {
  if (!real_set_.insert(f).second) return false;
  real_facts_.push_back(f);
  return true;
}

StreamSession::Record& StreamSession::record(const Key& key) { return records_[key]; }

bool StreamSession::deferrable(int instance) const {
  const auto& inst = instances_.at(static_cast<std::size_t>(instance));
  return problem_.streams.at(static_cast<std::size_t>(inst.schema)).deferrable;
}

std::optional<pl::StreamOutput> StreamSession::call(const Key& key) {
  const auto& schema = problem_.streams.at(static_cast<std::size_t>(key.first));
  Record& rec = record(key);
  if (schema.single_shot && rec.calls > 0) return rec.cached;
  if (!rec.generator) rec.generator = schema.generator(key.second);
  const double before = clock_.now();
  const auto wall_start = std::chrono::steady_clock::now();
  clock_.charge(clock_.costs().stream_call);
  std::optional<pl::StreamOutput> out = rec.generator->next();
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  ++rec.calls;
  rec.disabled = true;
  if (!out || schema.single_shot) rec.exhausted = true;
  if (schema.single_shot) rec.cached = out;
  if (log_) {
    StreamCall c;
    c.episode = log_->episode;
    c.stream = schema.name;
    c.inputs = join_values(key.second, *problem_.values);
    if (out) c.outputs = join_values(out->values, *problem_.values);
    c.success = out.has_value();
    c.modeled = clock_.now() - before;
    c.wall = wall;
    log_->calls.push_back(std::move(c));
  }
  if (out) {
    const Bindings b = stream_bindings(schema, key.second, out->values);
    for (const auto& a : schema.certified) add_real(pl::ground(a, b));
    for (const auto& [f, v] : out->functions) real_functions_[f] = v;
  }
  return out;
}

void StreamSession::evaluate_eager() {
  bool changed = true;
  while (changed) {
    changed = false;
    const FactIndex idx = index_facts({&real_facts_});
    std::vector<Key> pending;
    for (std::size_t si = 0; si < problem_.streams.size(); ++si) {
      const auto& s = problem_.streams[si];
      if (!s.eager) continue;
      std::vector<const Atom*> atoms;
      for (const auto& a : s.domain) atoms.push_back(&a);
      Bindings b;
      join(atoms, idx, b, [&](const Bindings& bb) {
        std::vector<Value> in;
        for (const auto& v : s.inputs) in.push_back(bb.at(v));
        if (s.admissible && !s.admissible(in)) return;
        Key key{static_cast<int>(si), in};
        auto it = records_.find(key);
        if (it != records_.end() && it->second.calls > 0) return;
        pending.push_back(std::move(key));
      });
    }
    std::sort(pending.begin(), pending.end());
    pending.erase(std::unique(pending.begin(), pending.end()), pending.end());
    for (const auto& key : pending) {
      const std::size_t before = real_facts_.size();
      call(key);
      if (real_facts_.size() != before) changed = true;
    }
  }
}

std::vector<Fact> StreamSession::optimistic_layer(int levels) {
  instances_.clear();
  fact_source_.clear();
  optimistic_facts_.clear();
  optimistic_functions_.clear();
  std::set<Key> seen;
  std::set<Fact> present = real_set_;

  bool grew = true;
  while (grew) {
    grew = false;
    std::vector<const std::vector<Fact>*> sources{&real_facts_, &optimistic_facts_};
    const FactIndex idx = index_facts(sources);
    std::vector<StreamInstance> created;
    for (std::size_t si = 0; si < problem_.streams.size(); ++si) {
      const auto& s = problem_.streams[si];
      std::vector<const Atom*> atoms;
      for (const auto& a : s.domain) atoms.push_back(&a);
      Bindings b;
      join(atoms, idx, b, [&](const Bindings& bb) {
        std::vector<Value> in;
        int level = 0;
        bool real = true;
        for (const auto& v : s.inputs) {
          const Value x = bb.at(v);
          in.push_back(x);
          level = std::max(level, problem_.values->level(x));
          real = real && x.kind != ValueKind::optimistic;
        }
        if (s.real_inputs_only && !real) return;
        if (s.admissible && !s.admissible(in)) return;
        level += s.eager ? 0 : 1;
        if (level > levels) return;
        Key key{static_cast<int>(si), in};
        if (seen.count(key)) return;
        if (real) {
          if (s.eager || s.real_inputs_only) return;
          auto it = records_.find(key);
          if (it != records_.end()) {
            const Record& r = it->second;
            if (r.disabled || r.exhausted || r.calls >= options_.generator_budget) return;
          }
        }
        seen.insert(key);
        StreamInstance inst;
        inst.schema = static_cast<int>(si);
        inst.inputs = in;
        inst.level = level;
        for (const auto& a : s.domain) inst.domain.push_back(pl::ground(a, bb));
        created.push_back(std::move(inst));
      });
    }
    for (auto& inst : created) {
      const int id = static_cast<int>(instances_.size());
      const auto& s = problem_.streams[static_cast<std::size_t>(inst.schema)];
      for (std::size_t k = 0; k < s.outputs.size(); ++k) {
        const std::string tag = k < s.output_tags.size() ? s.output_tags[k] : s.outputs[k].substr(1);
        inst.outputs.push_back(problem_.values->optimistic(id, static_cast<int>(k), inst.level, tag));
      }
      const Bindings b = stream_bindings(s, inst.inputs, inst.outputs);
      for (const auto& a : s.certified) {
        Fact f = pl::ground(a, b);
        inst.certified.push_back(f);
        if (present.insert(f).second) {
          fact_source_[f] = id;
          optimistic_facts_.push_back(f);
          grew = true;
        }
      }
      if (s.optimistic_functions)
        for (auto& [f, v] : s.optimistic_functions(inst.inputs, inst.outputs)) {
          inst.functions.emplace_back(f, v);
          if (!real_functions_.count(f)) optimistic_functions_[f] = v;
        }
      clock_.charge(clock_.costs().instance);
      instances_.push_back(std::move(inst));
    }
  }
  return optimistic_facts_;
}

bool StreamSession::reenable() {
  bool any = false;
  for (auto& [key, r] : records_) {
    if (r.disabled && !r.exhausted && r.calls < options_.generator_budget) {
      r.disabled = false;
      any = true;
    }
  }
  return any;
}

// Grounding --------------------------------------------------------------------

namespace {

struct PendingDerived {
  std::size_t action;
  int pred;
  std::vector<Value> args;
};

struct Grounder {
  const Problem& problem;
  const std::set<Fact>& statics;
  const FactIndex& index;
  const std::map<Fact, double>& real_functions;
  const std::map<Fact, double>& optimistic_functions;
  Task& task;
  EffortClock& clock;
  std::vector<PendingDerived> pending;

  int intern(const Fact& f) {
    auto it = task.atom_ids.find(f);
    if (it != task.atom_ids.end()) return it->second;
    const int id = static_cast<int>(task.atoms.size());
    task.atoms.push_back(f);
    task.atom_ids[f] = id;
    return id;
  }

  PredKind kind(int pred) const { return problem.vocab->at(pred).kind; }

  std::optional<double> function_value(const Fact& f) const {
    auto it = real_functions.find(f);
    if (it != real_functions.end()) return it->second;
    auto jt = optimistic_functions.find(f);
    if (jt != optimistic_functions.end()) return jt->second;
    return std::nullopt;
  }

  void ground_schema(int schema_id, const pl::ActionSchema& schema, bool goal_action) {
    std::vector<const Formula*> lits;
    flatten(schema.pre, lits);
    std::vector<const Atom*> positives;
    for (const Formula* l : lits)
      if (l->op == Formula::Op::atom && kind(l->atom.pred) == PredKind::static_fact)
        positives.push_back(&l->atom);
    Bindings b;
    join(positives, index, b, [&](const Bindings& bb) { emit(schema_id, schema, goal_action, lits, bb); });
  }

  void emit(int schema_id, const pl::ActionSchema& schema, bool goal_action,
            const std::vector<const Formula*>& lits, const Bindings& b) {
    for (const auto& p : schema.params)
      if (!b.count(p))
        throw PlanError("parameter " + p + " of " + schema.name +
                        " is not bound by a static precondition");
    CompiledAction ca;
    ca.goal_action = goal_action;
    ca.action.schema = schema_id;
    for (const auto& p : schema.params) ca.action.args.push_back(b.at(p));
    std::vector<std::pair<int, std::vector<Value>>> derived;
    for (const Formula* l : lits) {
      switch (l->op) {
        case Formula::Op::atom: {
          const Fact f = pl::ground(l->atom, b);
          const PredKind k = kind(f.pred);
          if (k == PredKind::static_fact)
            ca.static_pre.push_back(f);
          else if (k == PredKind::fluent)
            ca.pre.push_back(intern(f));
          else
            throw PlanError("positive derived or function literal in precondition");
          break;
        }
        case Formula::Op::negation: {
          const Formula& inner = l->children.at(0);
          if (inner.op != Formula::Op::atom) throw PlanError("negation of a non-atom");
          const Fact f = pl::ground(inner.atom, b);
          const PredKind k = kind(f.pred);
          if (k == PredKind::static_fact) {
            if (statics.count(f)) return;
          } else if (k == PredKind::fluent) {
            ca.pre_not.push_back(intern(f));
          } else if (k == PredKind::derived) {
            derived.emplace_back(f.pred, f.args);
          } else {
            throw PlanError("negated function literal");
          }
          break;
        }
        case Formula::Op::equality:
          if (pl::resolve(l->lhs, b) != pl::resolve(l->rhs, b)) return;
          break;
        case Formula::Op::implication: {
          const Formula& p = l->children.at(0);
          const Formula& q = l->children.at(1);
          if (p.op != Formula::Op::atom || q.op != Formula::Op::atom)
            throw PlanError("implication must relate two atoms");
          ca.implies.emplace_back(intern(pl::ground(p.atom, b)), intern(pl::ground(q.atom, b)));
          break;
        }
        default: throw PlanError("unsupported precondition form in " + schema.name);
      }
    }
    double cost = schema.cost.constant;
    if (schema.cost.function) {
      auto v = function_value(pl::ground(*schema.cost.function, b));
      if (!v) return;
      cost += *v;
    }
    if (cost < 0.0) throw PlanError("negative action cost");
    ca.cost = cost;
    for (const auto& a : schema.del) ca.del.push_back(intern(pl::ground(a, b)));
    for (const auto& a : schema.add) ca.add.push_back(intern(pl::ground(a, b)));
    if (goal_action) ca.add.push_back(intern(Fact{kGoalPred, {}}));
    auto dedupe = [](std::vector<int>& v) {
      std::vector<int> out;
      for (int x : v)
        if (std::find(out.begin(), out.end(), x) == out.end()) out.push_back(x);
      v = std::move(out);
    };
    dedupe(ca.pre);
    dedupe(ca.pre_not);
    for (auto& [pred, args] : derived) pending.push_back({task.actions.size(), pred, args});
    clock.charge(clock.costs().grounded_action);
    task.actions.push_back(std::move(ca));
  }

  void compile_derived() {
    std::set<int> universe(task.init.begin(), task.init.end());
    for (const auto& a : task.actions) universe.insert(a.add.begin(), a.add.end());
    for (const auto& p : pending) {
      const pl::DerivedPredicate* d = nullptr;
      for (const auto& cand : problem.derived)
        if (cand.pred == p.pred) d = &cand;
      if (!d) throw PlanError("undefined derived predicate");
      Bindings base;
      for (std::size_t i = 0; i < d->params.size(); ++i) base[d->params[i]] = p.args.at(i);
      const Formula& body = d->body.op == Formula::Op::exists ? d->body.children.at(0) : d->body;
      std::vector<const Formula*> lits;
      flatten(body, lits);
      const Atom* fluent = nullptr;
      for (const Formula* l : lits)
        if (l->op == Formula::Op::atom && kind(l->atom.pred) == PredKind::fluent) {
          if (fluent) throw PlanError("derived body must contain exactly one fluent atom");
          fluent = &l->atom;
        }
      if (!fluent) throw PlanError("derived body must contain exactly one fluent atom");
      CompiledAction& ca = task.actions[p.action];
      for (int atom : universe) {
        const Fact& fact = task.atoms[static_cast<std::size_t>(atom)];
        if (fact.pred != fluent->pred) continue;
        Bindings b = base;
        std::vector<std::string> added;
        if (!unify(*fluent, fact, b, added)) continue;
        bool body_possible = true;
        std::vector<Fact> supports;
        for (const Formula* l : lits) {
          if (&l->atom == fluent) continue;
          if (l->op == Formula::Op::atom) {
            if (!statics.count(pl::ground(l->atom, b))) body_possible = false;
          } else if (l->op == Formula::Op::negation) {
            const Fact f = pl::ground(l->children.at(0).atom, b);
            if (statics.count(f)) supports.push_back(f);
          } else if (l->op == Formula::Op::equality) {
            if (pl::resolve(l->lhs, b) != pl::resolve(l->rhs, b)) body_possible = false;
          } else {
            throw PlanError("unsupported literal in derived body");
          }
        }
        if (!body_possible) continue;
        if (supports.empty()) {
          if (std::find(ca.pre_not.begin(), ca.pre_not.end(), atom) == ca.pre_not.end())
            ca.pre_not.push_back(atom);
        } else {
          for (auto& f : supports) ca.guarded.emplace_back(atom, f);
        }
      }
    }
  }
};

pl::ActionSchema goal_schema(const Formula& goal) {
  pl::ActionSchema s;
  s.name = "goal";
  std::vector<Formula> parts;
  std::vector<const Formula*> items;
  flatten(goal, items);
  for (const Formula* item : items) {
    if (item->op == Formula::Op::exists) {
      for (const auto& v : item->vars) s.params.push_back(v);
      std::vector<const Formula*> inner;
      flatten(item->children.at(0), inner);
      for (const Formula* i : inner) parts.push_back(*i);
    } else {
      parts.push_back(*item);
    }
  }
  s.pre = Formula::all(std::move(parts));
  return s;
}

}  // namespace

Task StreamSession::ground() const {
  Task task;
  std::set<Fact> statics = real_set_;
  statics.insert(optimistic_facts_.begin(), optimistic_facts_.end());
  const FactIndex idx = index_facts({&real_facts_, &optimistic_facts_});
  Grounder g{problem_, statics, idx, real_functions_, optimistic_functions_, task, clock_, {}};
  for (const auto& f : problem_.init)
    if (problem_.vocab->at(f.pred).kind == PredKind::fluent) task.init.push_back(g.intern(f));
  std::sort(task.init.begin(), task.init.end());
  for (std::size_t i = 0; i < problem_.actions.size(); ++i)
    g.ground_schema(static_cast<int>(i), problem_.actions[i], false);
  g.ground_schema(-1, goal_schema(problem_.goal), true);
  g.compile_derived();
  task.goal.push_back(g.intern(Fact{kGoalPred, {}}));
  return task;
}

// Stream plans -----------------------------------------------------------------

StreamPlan StreamSession::extract_stream_plan(const Task& task, const std::vector<int>& plan) const {
  StreamPlan sp;
  Bits state(task.atoms.size());
  for (int a : task.init) state.set(a);
  std::set<int> chosen;
  std::set<Fact> preimage;
  for (std::size_t step = 0; step < plan.size(); ++step) {
    const auto& a = task.actions[static_cast<std::size_t>(plan[step])];
    std::vector<Fact> needed = a.static_pre;
    for (const auto& [atom, f] : a.guarded)
      if (state.test(atom)) needed.push_back(f);
    std::set<int> here;
    for (const auto& f : needed) {
      preimage.insert(f);
      auto it = fact_source_.find(f);
      if (it != fact_source_.end()) here.insert(it->second);
    }
    for (const auto& v : a.action.args)
      if (v.kind == ValueKind::optimistic) here.insert(problem_.values->source_instance(v));
    if (step == 0 && !a.goal_action) sp.first_action = here;
    chosen.insert(here.begin(), here.end());
    apply_bits(a, state);
  }
  // Close over producers of inputs and domain facts.
  std::vector<int> work(chosen.begin(), chosen.end());
  std::set<std::pair<int, int>> edges;
  while (!work.empty()) {
    const int id = work.back();
    work.pop_back();
    const auto& inst = instances_.at(static_cast<std::size_t>(id));
    std::set<int> deps;
    for (const auto& v : inst.inputs)
      if (v.kind == ValueKind::optimistic) deps.insert(problem_.values->source_instance(v));
    for (const auto& f : inst.domain) {
      auto it = fact_source_.find(f);
      if (it != fact_source_.end()) deps.insert(it->second);
    }
    for (int d : deps) {
      edges.insert({d, id});
      if (chosen.insert(d).second) work.push_back(d);
    }
  }
  sp.instances.assign(chosen.begin(), chosen.end());
  sp.edges.assign(edges.begin(), edges.end());
  sp.preimage.assign(preimage.begin(), preimage.end());
  return sp;
}

Schedule StreamSession::schedule_deferred(const StreamPlan& sp, bool defer) const {
  Schedule out;
  if (!defer) {
    out.now = sp.instances;
    return out;
  }
  auto close = [&](std::set<int>& ids) {
    bool grew = true;
    while (grew) {
      grew = false;
      for (const auto& [from, to] : sp.edges)
        if (ids.count(to) && ids.insert(from).second) grew = true;
    }
  };
  std::set<int> needed;
  for (int id : sp.instances)
    if (!deferrable(id)) needed.insert(id);
  close(needed);
  std::set<int> now = needed;
  now.insert(sp.first_action.begin(), sp.first_action.end());
  close(now);
  // Streams only the first action needs are bound last, so a failure among
  // the others never wastes them.
  for (int id : sp.instances)
    if (needed.count(id)) out.now.push_back(id);
  for (int id : sp.instances) {
    if (needed.count(id)) continue;
    (now.count(id) ? out.now : out.deferred).push_back(id);
  }
  return out;
}

StreamSession::BindResult StreamSession::bind_and_retry(const std::vector<int>& ordered) {
  BindResult result;
  for (int id : ordered) {
    const auto& inst = instances_.at(static_cast<std::size_t>(id));
    std::vector<Value> in;
    for (const auto& v : inst.inputs) {
      Value x = v;
      if (x.kind == ValueKind::optimistic) {
        auto it = result.bindings.find(x);
        if (it == result.bindings.end()) throw PlanError("stream plan is not closed over inputs");
        x = it->second;
      }
      in.push_back(x);
    }
    const Key key{inst.schema, in};
    Record& rec = record(key);
    const auto& schema = problem_.streams.at(static_cast<std::size_t>(inst.schema));
    const bool reusable = schema.single_shot && rec.calls > 0 && rec.cached;
    if (!reusable && (rec.exhausted || rec.calls >= options_.generator_budget)) {
      rec.exhausted = true;
      result.success = false;
      result.failed = id;
      return result;
    }
    auto out = call(key);
    if (!out) {
      if (log::enabled(log::Level::debug)) {
        std::string args;
        for (Value v : in) args += (args.empty() ? "" : ", ") + problem_.values->str(v);
        log::debug("stream ", schema.name, "(", args, ") failed");
      }
      result.success = false;
      result.failed = id;
      return result;
    }
    for (std::size_t k = 0; k < inst.outputs.size(); ++k) result.bindings[inst.outputs[k]] = out->values.at(k);
  }
  return result;
}

// Solve ------------------------------------------------------------------------

std::optional<Solution> solve(Problem& problem, const PlannerOptions& options, EffortClock& clock,
                              StreamLog* log) {
  StreamSession session(problem, options, clock, log);
  int level = options.initial_level;
  SearchOptions so = options.search;
  so.deadline = std::min(so.deadline, options.deadline);
  while (clock.now() <= options.deadline) {
    session.evaluate_eager();
    session.optimistic_layer(level);
    const Task task = session.ground();
    const SearchResult found = search(task, problem.max_cost, so, clock);
    log::debug("level ", level, ": ", task.actions.size(), " actions, ", found.expansions, " expansions, ",
               found.plan ? "plan cost " + std::to_string(found.cost) : std::string("no plan"));
    if (!found.plan) {
      if (clock.now() > options.deadline) return std::nullopt;
      if (session.reenable()) continue;
      if (level < options.max_level) {
        ++level;
        continue;
      }
      return std::nullopt;
    }
    std::vector<int> ordered = *found.plan;
    hoist_actions(task, problem, options.early_actions, ordered);
    const StreamPlan sp = session.extract_stream_plan(task, ordered);
    const Schedule sched = session.schedule_deferred(sp, options.defer);
    const auto bound = session.bind_and_retry(sched.now);
    if (!bound.success) continue;

    auto subst = [&](Value v) {
      auto it = bound.bindings.find(v);
      return it == bound.bindings.end() ? v : it->second;
    };
    Solution sol;
    sol.cost = found.cost;
    sol.complete = sched.deferred.empty();
    for (int ai : ordered) {
      const auto& ca = task.actions[static_cast<std::size_t>(ai)];
      if (ca.goal_action) continue;
      GroundAction g = ca.action;
      for (auto& v : g.args) v = subst(v);
      sol.plan.push_back(std::move(g));
    }
    for (const auto& f : sp.preimage) {
      Fact g = f;
      for (auto& v : g.args) v = subst(v);
      sol.preimage.push_back(std::move(g));
    }
    return sol;
  }
  return std::nullopt;
}

double replay(const Problem& problem, const std::vector<Fact>& statics,
              const std::map<Fact, double>& functions, const std::vector<GroundAction>& plan) {
  pl::State state;
  state.facts.insert(problem.init.begin(), problem.init.end());
  state.facts.insert(statics.begin(), statics.end());
  state.functions = problem.functions;
  for (const auto& [f, v] : functions) state.functions[f] = v;
  double cost = 0.0;
  for (const auto& a : plan) {
    auto [next, c] = pl::apply(state, problem, a);
    state = std::move(next);
    cost += c;
  }
  if (!pl::holds(state, problem.goal, problem.derived)) throw PlanError("plan does not reach the goal");
  return cost;
}

}  // namespace bsr::plan
