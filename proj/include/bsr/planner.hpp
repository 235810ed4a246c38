#pragma once

// Stream-based planner: optimistic stream layers, grounding to a compiled
// STRIPS task, best-first search, stream-plan extraction, deferral and
// binding with retry.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bsr/effort.hpp"
#include "bsr/planlang.hpp"

namespace bsr::plan {

using pl::Fact;
using pl::GroundAction;
using pl::Problem;
using pl::Value;

// One record per stream evaluation.
struct StreamCall {
  int episode = 0;
  std::string stream;
  std::string inputs;
  std::string outputs;
  bool success = false;
  double modeled = 0.0;  // modeled seconds charged by the call
  double wall = 0.0;     // wall-clock seconds
};

struct StreamLog {
  int episode = 0;
  std::vector<StreamCall> calls;
};

struct StreamInstance {
  int schema = 0;
  std::vector<Value> inputs;
  std::vector<Value> outputs;  // optimistic placeholders
  std::vector<Fact> domain;
  std::vector<Fact> certified;
  std::vector<std::pair<Fact, double>> functions;
  int level = 0;
};

struct StreamPlan {
  std::vector<int> instances;               // topologically ordered
  std::vector<std::pair<int, int>> edges;   // producer -> consumer
  std::set<int> first_action;               // instances certifying action 1's needs
  std::vector<Fact> preimage;               // static facts the plan relies on
};

struct Schedule {
  std::vector<int> now;
  std::vector<int> deferred;
};

enum class Heuristic { blind, goal_count, hmax, hadd, hff };

struct SearchOptions {
  Heuristic heuristic = Heuristic::hff;
  double weight = 1.0;
  int max_expansions = 20000;
  double deadline = kNoDeadline;
};

struct PlannerOptions {
  int initial_level = 2;
  int max_level = 4;
  int generator_budget = 4;
  bool defer = true;
  // Actions moved to the earliest valid position of each plan before its
  // streams are bound. Entries are "name" or "name(first-arg)"; later entries
  // are hoisted last and so end up in front.
  std::vector<std::string> early_actions;
  SearchOptions search;
  double deadline = kNoDeadline;  // absolute, in modeled seconds
};

struct Solution {
  std::vector<GroundAction> plan;  // goal actions stripped
  std::vector<Fact> preimage;
  double cost = 0.0;
  bool complete = true;  // false when later actions still hold optimistic values
};

// Compiled STRIPS task over interned fluent atoms.
struct CompiledAction {
  GroundAction action;
  double cost = 0.0;
  bool goal_action = false;
  std::vector<int> pre, pre_not, add, del;
  std::vector<std::pair<int, int>> implies;  // (p, q): p true requires q true
  std::vector<Fact> static_pre;
  std::vector<std::pair<int, Fact>> guarded;  // support fact needed while atom holds
};

struct Task {
  std::vector<Fact> atoms;
  std::map<Fact, int> atom_ids;
  std::vector<int> init;
  std::vector<int> goal;
  std::vector<CompiledAction> actions;
};

struct SearchResult {
  std::optional<std::vector<int>> plan;
  double cost = 0.0;
  int expansions = 0;
  bool budget_hit = false;
};

SearchResult search(const Task& task, double cost_bound, const SearchOptions& options,
                    EffortClock& clock);

// True iff the action sequence is applicable from the task's initial state
// and reaches its goal.
bool valid_plan(const Task& task, const std::vector<int>& plan);

// Moves every action matching an entry of `early` to the earliest position
// that keeps the plan valid, one pass per entry.
void hoist_actions(const Task& task, const Problem& problem, const std::vector<std::string>& early,
                   std::vector<int>& plan);

// Owns the stream state of one solve: real facts, generator records and the
// optimistic instances of the current layer.
class StreamSession {
 public:
  StreamSession(Problem& problem, const PlannerOptions& options, EffortClock& clock,
                StreamLog* log);

  void evaluate_eager();
  // Builds the layer; returns the optimistic facts.
  std::vector<Fact> optimistic_layer(int levels);
  Task ground() const;
  StreamPlan extract_stream_plan(const Task& task, const std::vector<int>& plan) const;
  Schedule schedule_deferred(const StreamPlan& sp, bool defer) const;

  struct BindResult {
    bool success = true;
    int failed = -1;
    std::map<Value, Value> bindings;
  };
  BindResult bind_and_retry(const std::vector<int>& ordered);

  // Re-enables temporarily disabled generators; false if none were.
  bool reenable();

  const std::vector<StreamInstance>& instances() const { return instances_; }
  const std::vector<Fact>& real_facts() const { return real_facts_; }
  const std::map<Fact, double>& real_functions() const { return real_functions_; }
  bool deferrable(int instance) const;
  Problem& problem() { return problem_; }

 private:
  struct Record {
    std::unique_ptr<pl::Generator> generator;
    int calls = 0;
    bool disabled = false;
    bool exhausted = false;
    std::optional<pl::StreamOutput> cached;  // single-shot result
  };
  using Key = std::pair<int, std::vector<Value>>;

  bool add_real(const Fact& f);
  Record& record(const Key& key);
  std::optional<pl::StreamOutput> call(const Key& key);

  Problem& problem_;
  PlannerOptions options_;
  EffortClock& clock_;
  StreamLog* log_;
  std::vector<Fact> real_facts_;
  std::set<Fact> real_set_;
  std::map<Fact, double> real_functions_;
  std::map<Key, Record> records_;
  std::vector<StreamInstance> instances_;
  std::map<Fact, int> fact_source_;
  std::vector<Fact> optimistic_facts_;
  std::map<Fact, double> optimistic_functions_;
};

std::optional<Solution> solve(Problem& problem, const PlannerOptions& options, EffortClock& clock,
                              StreamLog* log = nullptr);

// Replays a plan through the planning language with the given static facts;
// returns the total cost or throws on a precondition failure.
double replay(const Problem& problem, const std::vector<Fact>& statics,
              const std::map<Fact, double>& functions, const std::vector<GroundAction>& plan);

}  // namespace bsr::plan
