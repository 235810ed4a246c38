#pragma once

// Planning language: interned values, facts, formulas with existential
// quantification, action schemata with cost expressions, derived predicates
// and stream schemata.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "bsr/belief.hpp"
#include "bsr/obsmodel.hpp"
#include "bsr/world.hpp"

namespace bsr::pl {

class PlanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ValueKind : std::uint8_t { constant, numeric, opaque, optimistic };

struct Value {
  ValueKind kind = ValueKind::constant;
  std::uint32_t id = 0;

  friend bool operator==(Value, Value) = default;
  friend auto operator<=>(Value, Value) = default;
};

struct Trajectory {
  Part part = Part::base;
  std::vector<std::vector<double>> path;
};

using Payload = std::variant<ParticleBelief, ObservationHypothesis, Trajectory>;

// Owns every value of one planning episode. Constants are interned by name,
// numeric tuples by (tag, payload); opaque and optimistic values are always fresh.
class ValueStore {
 public:
  Value constant(const std::string& name);
  std::optional<Value> find_constant(const std::string& name) const;
  Value numeric(const std::vector<double>& tuple, const std::string& tag);
  Value opaque(Payload payload, const std::string& tag);
  Value optimistic(int instance, int output, int level, const std::string& tag);

  const std::string& name(Value v) const;
  const std::vector<double>& tuple(Value v) const;
  const Payload& payload(Value v) const;
  int level(Value v) const;
  int source_instance(Value v) const;
  int source_output(Value v) const;
  std::string str(Value v) const;

 private:
  struct Optimistic {
    int instance;
    int output;
    int level;
    std::string label;
  };
  std::vector<std::string> constants_;
  std::map<std::string, std::uint32_t> constant_ids_;
  std::vector<std::pair<std::vector<double>, std::string>> numerics_;
  std::map<std::pair<std::string, std::vector<double>>, std::uint32_t> numeric_ids_;
  std::map<std::string, int> tag_counts_;
  std::vector<std::pair<Payload, std::string>> opaques_;
  std::vector<Optimistic> optimistic_;
};

enum class PredKind { static_fact, fluent, derived, function };

struct Predicate {
  std::string name;
  int arity = 0;
  PredKind kind = PredKind::static_fact;
};

class Vocabulary {
 public:
  int declare(const std::string& name, int arity, PredKind kind);
  int id(const std::string& name) const;
  bool has(const std::string& name) const { return ids_.count(name) > 0; }
  const Predicate& at(int id) const { return preds_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return preds_.size(); }

 private:
  std::vector<Predicate> preds_;
  std::map<std::string, int> ids_;
};

struct Fact {
  int pred = 0;
  std::vector<Value> args;

  friend bool operator==(const Fact&, const Fact&) = default;
  friend auto operator<=>(const Fact&, const Fact&) = default;
};

// A schema argument: a variable ("?x") or a fixed value.
struct Term {
  std::string var;
  Value value;

  static Term variable(std::string name) { return {std::move(name), {}}; }
  static Term fixed(Value v) { return {"", v}; }
  bool is_var() const { return !var.empty(); }
};

struct Atom {
  int pred = 0;
  std::vector<Term> args;
};

struct Formula {
  enum class Op { truth, atom, negation, conjunction, implication, equality, exists };
  Op op = Op::truth;
  Atom atom;
  Term lhs, rhs;
  std::vector<std::string> vars;
  std::vector<Formula> children;

  static Formula of(Atom a);
  static Formula negate(Formula f);
  static Formula all(std::vector<Formula> fs);
  static Formula imply(Formula a, Formula b);
  static Formula equal(Term a, Term b);
  static Formula exists(std::vector<std::string> vars, Formula body);
};

// Cost increase: constant plus an optional function lookup.
struct CostExpr {
  double constant = 0.0;
  std::optional<Atom> function;
};

struct ActionSchema {
  std::string name;
  std::vector<std::string> params;
  Formula pre;
  std::vector<Atom> add;
  std::vector<Atom> del;
  CostExpr cost;
};

struct DerivedPredicate {
  int pred = 0;
  std::vector<std::string> params;
  Formula body;
};

struct StreamOutput {
  std::vector<Value> values;
  std::vector<std::pair<Fact, double>> functions;
};

class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::optional<StreamOutput> next() = 0;
};

enum class Likelihood { almost_always, failable };

struct StreamSchema {
  std::string name;
  std::vector<std::string> inputs;
  std::vector<Atom> domain;
  std::vector<std::string> outputs;
  std::vector<std::string> output_tags;
  std::vector<Atom> certified;
  std::function<std::unique_ptr<Generator>(const std::vector<Value>&)> generator;
  // Function values attached to optimistic outputs (inputs may be optimistic).
  std::function<std::vector<std::pair<Fact, double>>(const std::vector<Value>&,
                                                     const std::vector<Value>&)>
      optimistic_functions;
  // Optional filter on input tuples (e.g. skip motions between equal configurations).
  std::function<bool(const std::vector<Value>&)> admissible;
  bool deferrable = false;
  bool eager = false;             // evaluated as soon as all inputs are real
  bool real_inputs_only = false;  // never instantiated on optimistic inputs
  bool single_shot = false;       // tests and functions: at most one output tuple
  Likelihood likelihood = Likelihood::almost_always;
};

struct Problem {
  std::shared_ptr<Vocabulary> vocab;
  std::shared_ptr<ValueStore> values;
  std::vector<Fact> init;
  std::map<Fact, double> functions;
  Formula goal;
  std::vector<ActionSchema> actions;
  std::vector<DerivedPredicate> derived;
  std::vector<StreamSchema> streams;
  double max_cost = 100.0;
};

// Closed-world state: all true facts plus numeric function values.
struct State {
  std::set<Fact> facts;
  std::map<Fact, double> functions;

  bool contains(const Fact& f) const { return facts.count(f) > 0; }
};

using Bindings = std::map<std::string, Value>;

Fact ground(const Atom& atom, const Bindings& b);
Value resolve(const Term& t, const Bindings& b);

// Formula evaluation; derived predicates are evaluated by existential search
// over the state's facts. Throws PlanError on an unbound variable.
bool holds(const State& state, const Formula& f, const std::vector<DerivedPredicate>& derived,
           const Bindings& bindings = {});

struct GroundAction {
  int schema = 0;
  std::vector<Value> args;
};

Bindings bind_params(const ActionSchema& schema, const std::vector<Value>& args);
double evaluate_cost(const CostExpr& cost, const State& state, const Bindings& b);

// Applies the action; throws PlanError if the precondition fails.
std::pair<State, double> apply(const State& state, const Problem& problem,
                               const GroundAction& action);

std::string str(const Fact& f, const Vocabulary& vocab, const ValueStore& values);
std::string str(const GroundAction& a, const Problem& problem);
std::string dump_formula(const Formula& f, const Vocabulary& vocab, const ValueStore& values);
std::string dump(const Problem& problem);

}  // namespace bsr::pl
