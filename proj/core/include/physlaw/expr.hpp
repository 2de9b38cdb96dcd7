#pragma once

#include "physlaw/rational.hpp"

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace physlaw {

// Reference to a physical object inside an atom: either the concrete object
// id of an experiment roster (1-based) or a bound variable of a concept.
struct ObjRef {
  int id = -1;          // >= 1 when concrete
  std::string var;      // nonempty when bound

  static ObjRef concrete(int object_id) { return ObjRef{object_id, {}}; }
  static ObjRef bound(std::string name) { return ObjRef{-1, std::move(name)}; }
  bool is_bound() const { return id < 0; }
  bool operator==(const ObjRef& o) const { return id == o.id && var == o.var; }
  bool operator<(const ObjRef& o) const {
    if (id != o.id) return id < o.id;
    return var < o.var;
  }
  std::string to_string() const { return is_bound() ? var : std::to_string(id); }
};

enum class NodeKind : uint8_t { Number, Atom, Add, Sub, Mul, Div, Pow, Diff, Partial };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

// Immutable expression tree. Diff is d(lhs)/d(rhs); Partial is the formal
// partial derivative of lhs with respect to the coordinate atom in rhs.
struct Expr {
  NodeKind kind;
  Rational value;               // Number
  std::string symbol;           // Atom
  std::vector<ObjRef> indices;  // Atom
  ExprPtr lhs, rhs;
  int exponent = 0;             // Pow (nonzero)
};

ExprPtr make_number(Rational v);
ExprPtr make_number(long num, long den = 1);
ExprPtr make_atom(std::string symbol, std::vector<ObjRef> indices = {});
ExprPtr make_bin(NodeKind op, ExprPtr a, ExprPtr b);
ExprPtr make_add(ExprPtr a, ExprPtr b);
ExprPtr make_sub(ExprPtr a, ExprPtr b);
ExprPtr make_mul(ExprPtr a, ExprPtr b);
ExprPtr make_div(ExprPtr a, ExprPtr b);
ExprPtr make_pow(ExprPtr base, int exponent);  // throws UsageError on zero exponent
ExprPtr make_diff(ExprPtr num, ExprPtr den);
ExprPtr make_partial(ExprPtr target, ExprPtr coordinate_atom);

bool expr_equal(const ExprPtr& a, const ExprPtr& b);

// Canonical text form; parse(print(e)) reproduces e node for node.
std::string print_expr(const ExprPtr& e);

// Weighted node count: atoms and numbers 1, binary ops and powers 1 + children,
// derivatives 2 + children. Deterministic and monotone under embedding.
int complexity(const ExprPtr& e);

// All atoms in the tree (pre-order).
void collect_atoms(const ExprPtr& e, std::vector<const Expr*>& out);
// Concrete object ids appearing anywhere in the tree.
std::set<int> concrete_ids(const ExprPtr& e);
// Bound variables appearing anywhere in the tree.
std::set<std::string> bound_vars(const ExprPtr& e);

// Substitutes bound variables by concrete object ids (or other refs).
ExprPtr substitute(const ExprPtr& e, const std::map<std::string, ObjRef>& env);
// Replaces concrete object ids by bound variables.
ExprPtr abstract_ids(const ExprPtr& e, const std::map<int, std::string>& env);

// Flattens nested Add/Sub chains into signed terms.
void flatten_sum(const ExprPtr& e, std::vector<std::pair<ExprPtr, int>>& terms, int sign = 1);

// ---------------------------------------------------------------------------
// Concepts and laws

enum class ConceptKind : uint8_t { Dynamical, Summation, Intrinsic, UniversalConstant };

struct TypedSlot {
  std::string var;          // bound variable name
  std::string object_type;  // e.g. "Ball"
  bool operator==(const TypedSlot& o) const = default;
};

// Binding of a measurement experiment for intrinsic concepts and universal
// constants: which experiment object is replaced by the measured object, and
// which bound names refer to standard objects already in that experiment.
struct IntrinsicSpec {
  std::string experiment;
  // (experiment object name -> bound variable used in the body)
  std::vector<std::pair<std::string, std::string>> bindings;
  std::string measured_var;  // the binding that receives the measured object ("" for universal constants)
};

struct ConceptDef {
  std::string symbol;
  ConceptKind kind = ConceptKind::Dynamical;
  std::vector<TypedSlot> slots;  // empty for Summation over-all and UniversalConstant
  std::string sum_type;          // object type for Summation concepts
  std::string sum_var;           // bound variable of the summation template
  ExprPtr body;
  IntrinsicSpec intrinsic;       // Intrinsic / UniversalConstant only
  // provenance
  int trial = -1;
  std::string source_experiment;
};

enum class LawKind : uint8_t { Conserved, Zero };

struct LawProvenance {
  std::map<std::string, double> params;
  uint64_t seed = 0;
};

struct LawDef {
  std::string name;
  LawKind kind = LawKind::Conserved;
  bool general = false;
  ExprPtr subject_expr;         // specific laws
  std::string subject_concept;  // general laws (concept symbol)
  std::set<std::string> scope;  // experiment names
  int trial = -1;
  std::map<std::string, LawProvenance> origins;  // per scoped experiment
};

// Declaration-level printers (the exact persisted grammar).
std::string print_concept(const ConceptDef& c);
std::string print_law(const LawDef& l);

}  // namespace physlaw
