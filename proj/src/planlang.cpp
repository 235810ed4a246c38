#include "bsr/planlang.hpp"

#include <sstream>

namespace bsr::pl {

// ValueStore -----------------------------------------------------------------

Value ValueStore::constant(const std::string& name) {
  auto it = constant_ids_.find(name);
  if (it != constant_ids_.end()) return {ValueKind::constant, it->second};
  const auto id = static_cast<std::uint32_t>(constants_.size());
  constants_.push_back(name);
  constant_ids_[name] = id;
  return {ValueKind::constant, id};
}

std::optional<Value> ValueStore::find_constant(const std::string& name) const {
  auto it = constant_ids_.find(name);
  if (it == constant_ids_.end()) return std::nullopt;
  return Value{ValueKind::constant, it->second};
}

Value ValueStore::numeric(const std::vector<double>& tuple, const std::string& tag) {
  auto it = numeric_ids_.find({tag, tuple});
  if (it != numeric_ids_.end()) return {ValueKind::numeric, it->second};
  const auto id = static_cast<std::uint32_t>(numerics_.size());
  numerics_.emplace_back(tuple, tag + std::to_string(tag_counts_[tag]++));
  numeric_ids_[{tag, tuple}] = id;
  return {ValueKind::numeric, id};
}

Value ValueStore::opaque(Payload payload, const std::string& tag) {
  const auto id = static_cast<std::uint32_t>(opaques_.size());
  opaques_.emplace_back(std::move(payload), tag + std::to_string(tag_counts_[tag]++));
  return {ValueKind::opaque, id};
}

Value ValueStore::optimistic(int instance, int output, int level, const std::string& tag) {
  const auto id = static_cast<std::uint32_t>(optimistic_.size());
  optimistic_.push_back({instance, output, level, "?" + tag + std::to_string(id)});
  return {ValueKind::optimistic, id};
}

const std::string& ValueStore::name(Value v) const {
  if (v.kind != ValueKind::constant) throw PlanError("value is not a constant");
  return constants_.at(v.id);
}

const std::vector<double>& ValueStore::tuple(Value v) const {
  if (v.kind != ValueKind::numeric) throw PlanError("value is not numeric");
  return numerics_.at(v.id).first;
}

const Payload& ValueStore::payload(Value v) const {
  if (v.kind != ValueKind::opaque) throw PlanError("value is not opaque");
  return opaques_.at(v.id).first;
}

int ValueStore::level(Value v) const {
  return v.kind == ValueKind::optimistic ? optimistic_.at(v.id).level : 0;
}

int ValueStore::source_instance(Value v) const {
  if (v.kind != ValueKind::optimistic) throw PlanError("value is not optimistic");
  return optimistic_.at(v.id).instance;
}

int ValueStore::source_output(Value v) const {
  if (v.kind != ValueKind::optimistic) throw PlanError("value is not optimistic");
  return optimistic_.at(v.id).output;
}

std::string ValueStore::str(Value v) const {
  switch (v.kind) {
    case ValueKind::constant: return constants_.at(v.id);
    case ValueKind::numeric: return numerics_.at(v.id).second;
    case ValueKind::opaque: return opaques_.at(v.id).second;
    case ValueKind::optimistic: return optimistic_.at(v.id).label;
  }
  return "?";
}

// Vocabulary -----------------------------------------------------------------

int Vocabulary::declare(const std::string& name, int arity, PredKind kind) {
  auto it = ids_.find(name);
  if (it != ids_.end()) {
    const Predicate& p = preds_[static_cast<std::size_t>(it->second)];
    if (p.arity != arity || p.kind != kind)
      throw PlanError("conflicting declaration of predicate " + name);
    return it->second;
  }
  const int id = static_cast<int>(preds_.size());
  preds_.push_back({name, arity, kind});
  ids_[name] = id;
  return id;
}

int Vocabulary::id(const std::string& name) const {
  auto it = ids_.find(name);
  if (it == ids_.end()) throw PlanError("undeclared predicate " + name);
  return it->second;
}

// Formulas -------------------------------------------------------------------

Formula Formula::of(Atom a) {
  Formula f;
  f.op = Op::atom;
  f.atom = std::move(a);
  return f;
}

Formula Formula::negate(Formula g) {
  Formula f;
  f.op = Op::negation;
  f.children.push_back(std::move(g));
  return f;
}

Formula Formula::all(std::vector<Formula> fs) {
  Formula f;
  f.op = Op::conjunction;
  f.children = std::move(fs);
  return f;
}

Formula Formula::imply(Formula a, Formula b) {
  Formula f;
  f.op = Op::implication;
  f.children.push_back(std::move(a));
  f.children.push_back(std::move(b));
  return f;
}

Formula Formula::equal(Term a, Term b) {
  Formula f;
  f.op = Op::equality;
  f.lhs = std::move(a);
  f.rhs = std::move(b);
  return f;
}

Formula Formula::exists(std::vector<std::string> vars, Formula body) {
  Formula f;
  f.op = Op::exists;
  f.vars = std::move(vars);
  f.children.push_back(std::move(body));
  return f;
}

Value resolve(const Term& t, const Bindings& b) {
  if (!t.is_var()) return t.value;
  auto it = b.find(t.var);
  if (it == b.end()) throw PlanError("unbound variable " + t.var);
  return it->second;
}

Fact ground(const Atom& atom, const Bindings& b) {
  Fact f{atom.pred, {}};
  f.args.reserve(atom.args.size());
  for (const auto& t : atom.args) f.args.push_back(resolve(t, b));
  return f;
}

namespace {

class Evaluator {
 public:
  Evaluator(const State& state, const std::vector<DerivedPredicate>& derived)
      : state_(state), derived_(derived) {}

  bool eval(const Formula& f, const Bindings& b) const {
    using Op = Formula::Op;
    switch (f.op) {
      case Op::truth: return true;
      case Op::atom: return atom(f.atom, b);
      case Op::negation: return !eval(f.children.at(0), b);
      case Op::conjunction:
        for (const auto& c : f.children)
          if (!eval(c, b)) return false;
        return true;
      case Op::implication: return !eval(f.children.at(0), b) || eval(f.children.at(1), b);
      case Op::equality: return resolve(f.lhs, b) == resolve(f.rhs, b);
      case Op::exists: {
        std::vector<const Atom*> generators;
        collect_generators(f.children.at(0), generators);
        return search(f.children.at(0), f.vars, generators, b);
      }
    }
    return false;
  }

 private:
  bool atom(const Atom& a, const Bindings& b) const {
    for (const auto& d : derived_) {
      if (d.pred != a.pred) continue;
      Bindings inner;
      for (std::size_t i = 0; i < d.params.size(); ++i) inner[d.params[i]] = resolve(a.args.at(i), b);
      return eval(d.body, inner);
    }
    return state_.contains(ground(a, b));
  }

  bool is_derived(int pred) const {
    for (const auto& d : derived_)
      if (d.pred == pred) return true;
    return false;
  }

  // Positive, non-derived atoms of a top-level conjunction bind variables.
  void collect_generators(const Formula& f, std::vector<const Atom*>& out) const {
    if (f.op == Formula::Op::atom && !is_derived(f.atom.pred)) out.push_back(&f.atom);
    if (f.op == Formula::Op::conjunction)
      for (const auto& c : f.children) collect_generators(c, out);
  }

  bool search(const Formula& body, const std::vector<std::string>& vars,
              const std::vector<const Atom*>& generators, const Bindings& b) const {
    std::string unbound;
    for (const auto& v : vars)
      if (!b.count(v)) {
        unbound = v;
        break;
      }
    if (unbound.empty()) return eval(body, b);
    for (const Atom* g : generators) {
      bool mentions = false;
      for (const auto& t : g->args) mentions = mentions || (t.is_var() && t.var == unbound);
      if (!mentions) continue;
      const Fact lo{g->pred, {}};
      for (auto it = state_.facts.lower_bound(lo); it != state_.facts.end() && it->pred == g->pred;
           ++it) {
        Bindings next = b;
        if (match(*g, *it, next) && search(body, vars, generators, next)) return true;
      }
      return false;
    }
    throw PlanError("existential variable " + unbound + " is not bound by any positive atom");
  }

  static bool match(const Atom& a, const Fact& f, Bindings& b) {
    if (a.args.size() != f.args.size()) return false;
    for (std::size_t i = 0; i < a.args.size(); ++i) {
      const Term& t = a.args[i];
      if (!t.is_var()) {
        if (t.value != f.args[i]) return false;
        continue;
      }
      auto it = b.find(t.var);
      if (it == b.end())
        b[t.var] = f.args[i];
      else if (it->second != f.args[i])
        return false;
    }
    return true;
  }

  const State& state_;
  const std::vector<DerivedPredicate>& derived_;
};

}  // namespace

bool holds(const State& state, const Formula& f, const std::vector<DerivedPredicate>& derived,
           const Bindings& bindings) {
  return Evaluator(state, derived).eval(f, bindings);
}

Bindings bind_params(const ActionSchema& schema, const std::vector<Value>& args) {
  if (args.size() != schema.params.size())
    throw PlanError("wrong number of arguments for " + schema.name);
  Bindings b;
  for (std::size_t i = 0; i < args.size(); ++i) b[schema.params[i]] = args[i];
  return b;
}

double evaluate_cost(const CostExpr& cost, const State& state, const Bindings& b) {
  double total = cost.constant;
  if (cost.function) {
    auto it = state.functions.find(ground(*cost.function, b));
    if (it == state.functions.end()) throw PlanError("undefined cost function value");
    total += it->second;
  }
  if (total < 0.0) throw PlanError("negative action cost");
  return total;
}

std::pair<State, double> apply(const State& state, const Problem& problem,
                               const GroundAction& action) {
  const ActionSchema& schema = problem.actions.at(static_cast<std::size_t>(action.schema));
  const Bindings b = bind_params(schema, action.args);
  if (!holds(state, schema.pre, problem.derived, b))
    throw PlanError("precondition of " + schema.name + " does not hold");
  State next = state;
  for (const auto& d : schema.del) next.facts.erase(ground(d, b));
  for (const auto& a : schema.add) next.facts.insert(ground(a, b));
  return {std::move(next), evaluate_cost(schema.cost, state, b)};
}

// Text dump --------------------------------------------------------------------

std::string str(const Fact& f, const Vocabulary& vocab, const ValueStore& values) {
  std::string out = "(" + vocab.at(f.pred).name;
  for (const auto& a : f.args) out += " " + values.str(a);
  return out + ")";
}

std::string str(const GroundAction& a, const Problem& problem) {
  std::string out = problem.actions.at(static_cast<std::size_t>(a.schema)).name + "(";
  for (std::size_t i = 0; i < a.args.size(); ++i)
    out += (i ? ", " : "") + problem.values->str(a.args[i]);
  return out + ")";
}

namespace {

std::string term_str(const Term& t, const ValueStore& values) {
  return t.is_var() ? t.var : values.str(t.value);
}

std::string atom_str(const Atom& a, const Vocabulary& vocab, const ValueStore& values) {
  std::string out = "(" + vocab.at(a.pred).name;
  for (const auto& t : a.args) out += " " + term_str(t, values);
  return out + ")";
}

}  // namespace

std::string dump_formula(const Formula& f, const Vocabulary& vocab, const ValueStore& values) {
  using Op = Formula::Op;
  switch (f.op) {
    case Op::truth: return "(and)";
    case Op::atom: return atom_str(f.atom, vocab, values);
    case Op::negation: return "(not " + dump_formula(f.children.at(0), vocab, values) + ")";
    case Op::conjunction: {
      std::string out = "(and";
      for (const auto& c : f.children) out += " " + dump_formula(c, vocab, values);
      return out + ")";
    }
    case Op::implication:
      return "(imply " + dump_formula(f.children.at(0), vocab, values) + " " +
             dump_formula(f.children.at(1), vocab, values) + ")";
    case Op::equality:
      return "(= " + term_str(f.lhs, values) + " " + term_str(f.rhs, values) + ")";
    case Op::exists: {
      std::string out = "(exists (";
      for (std::size_t i = 0; i < f.vars.size(); ++i) out += (i ? " " : "") + f.vars[i];
      return out + ") " + dump_formula(f.children.at(0), vocab, values) + ")";
    }
  }
  return "";
}

std::string dump(const Problem& p) {
  const Vocabulary& vocab = *p.vocab;
  const ValueStore& values = *p.values;
  std::ostringstream out;
  out << "(define (problem episode)\n  (:init\n";
  std::set<Fact> sorted(p.init.begin(), p.init.end());
  for (const auto& f : sorted) out << "    " << str(f, vocab, values) << "\n";
  for (const auto& [f, v] : p.functions) out << "    (= " << str(f, vocab, values) << " " << v << ")\n";
  out << "  )\n  (:goal " << dump_formula(p.goal, vocab, values) << ")\n";
  out << "  (:max-cost " << p.max_cost << "))\n";
  for (const auto& d : p.derived) {
    out << "(:derived (" << vocab.at(d.pred).name;
    for (const auto& v : d.params) out << " " << v;
    out << ") " << dump_formula(d.body, vocab, values) << ")\n";
  }
  for (const auto& a : p.actions) {
    out << "(:action " << a.name << "\n  :parameters (";
    for (std::size_t i = 0; i < a.params.size(); ++i) out << (i ? " " : "") << a.params[i];
    out << ")\n  :precondition " << dump_formula(a.pre, vocab, values) << "\n  :effect (and";
    for (const auto& e : a.add) out << " " << atom_str(e, vocab, values);
    for (const auto& e : a.del) out << " (not " << atom_str(e, vocab, values) << ")";
    out << " (increase (total-cost) ";
    if (a.cost.function)
      out << "(+ " << a.cost.constant << " " << atom_str(*a.cost.function, vocab, values) << ")";
    else
      out << a.cost.constant;
    out << ")))\n";
  }
  for (const auto& s : p.streams) {
    out << "(:stream " << s.name << "\n  :inputs (";
    for (std::size_t i = 0; i < s.inputs.size(); ++i) out << (i ? " " : "") << s.inputs[i];
    out << ")\n  :domain (and";
    for (const auto& a : s.domain) out << " " << atom_str(a, vocab, values);
    out << ")\n  :outputs (";
    for (std::size_t i = 0; i < s.outputs.size(); ++i) out << (i ? " " : "") << s.outputs[i];
    out << ")\n  :certified (and";
    for (const auto& a : s.certified) out << " " << atom_str(a, vocab, values);
    out << "))\n";
  }
  return out.str();
}

}  // namespace bsr::pl
