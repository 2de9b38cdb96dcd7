#include "physlaw/expr.hpp"

#include "physlaw/measured.hpp"  // UsageError

#include <algorithm>
#include <sstream>

namespace physlaw {

ExprPtr make_number(Rational v) {
  auto e = std::make_shared<Expr>();
  e->kind = NodeKind::Number;
  e->value = std::move(v);
  return e;
}

ExprPtr make_number(long num, long den) { return make_number(Rational(num, den)); }

ExprPtr make_atom(std::string symbol, std::vector<ObjRef> indices) {
  auto e = std::make_shared<Expr>();
  e->kind = NodeKind::Atom;
  e->symbol = std::move(symbol);
  e->indices = std::move(indices);
  return e;
}

ExprPtr make_bin(NodeKind op, ExprPtr a, ExprPtr b) {
  auto e = std::make_shared<Expr>();
  e->kind = op;
  e->lhs = std::move(a);
  e->rhs = std::move(b);
  return e;
}

ExprPtr make_add(ExprPtr a, ExprPtr b) { return make_bin(NodeKind::Add, std::move(a), std::move(b)); }
ExprPtr make_sub(ExprPtr a, ExprPtr b) { return make_bin(NodeKind::Sub, std::move(a), std::move(b)); }
ExprPtr make_mul(ExprPtr a, ExprPtr b) { return make_bin(NodeKind::Mul, std::move(a), std::move(b)); }
ExprPtr make_div(ExprPtr a, ExprPtr b) { return make_bin(NodeKind::Div, std::move(a), std::move(b)); }

ExprPtr make_pow(ExprPtr base, int exponent) {
  if (exponent == 0) throw UsageError("make_pow: zero exponent is not allowed");
  auto e = std::make_shared<Expr>();
  e->kind = NodeKind::Pow;
  e->lhs = std::move(base);
  e->exponent = exponent;
  return e;
}

ExprPtr make_diff(ExprPtr num, ExprPtr den) {
  return make_bin(NodeKind::Diff, std::move(num), std::move(den));
}

ExprPtr make_partial(ExprPtr target, ExprPtr coordinate_atom) {
  if (!coordinate_atom || coordinate_atom->kind != NodeKind::Atom)
    throw UsageError("make_partial: coordinate must be an atom");
  return make_bin(NodeKind::Partial, std::move(target), std::move(coordinate_atom));
}

bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case NodeKind::Number: return a->value == b->value;
    case NodeKind::Atom: return a->symbol == b->symbol && a->indices == b->indices;
    case NodeKind::Pow:
      return a->exponent == b->exponent && expr_equal(a->lhs, b->lhs);
    default:
      return expr_equal(a->lhs, b->lhs) && expr_equal(a->rhs, b->rhs);
  }
}

namespace {

int precedence(NodeKind k) {
  switch (k) {
    case NodeKind::Add:
    case NodeKind::Sub: return 1;
    case NodeKind::Mul:
    case NodeKind::Div: return 2;
    case NodeKind::Pow: return 3;
    default: return 4;  // atoms, numbers, D[...]/D[...] bind tightest
  }
}

void print_rec(const ExprPtr& e, std::ostringstream& os, int parent_prec, bool right_side) {
  const int prec = precedence(e->kind);
  const bool need_paren =
      prec < parent_prec || (prec == parent_prec && right_side && parent_prec != 4);
  if (need_paren) os << "(";
  switch (e->kind) {
    case NodeKind::Number: {
      // negatives and proper fractions need brackets to re-parse as literals
      if (e->value < 0 || boost::multiprecision::denominator(e->value) != 1) {
        os << "(" << rational_to_string(e->value) << ")";
      } else {
        os << rational_to_string(e->value);
      }
      break;
    }
    case NodeKind::Atom: {
      os << e->symbol;
      if (!e->indices.empty()) {
        os << "[";
        for (std::size_t i = 0; i < e->indices.size(); ++i) {
          if (i) os << ",";
          os << e->indices[i].to_string();
        }
        os << "]";
      }
      break;
    }
    case NodeKind::Add:
      print_rec(e->lhs, os, 1, false);
      os << " + ";
      print_rec(e->rhs, os, 1, true);
      break;
    case NodeKind::Sub:
      print_rec(e->lhs, os, 1, false);
      os << " - ";
      print_rec(e->rhs, os, 1, true);
      break;
    case NodeKind::Mul:
      print_rec(e->lhs, os, 2, false);
      os << " * ";
      print_rec(e->rhs, os, 2, true);
      break;
    case NodeKind::Div:
      print_rec(e->lhs, os, 2, false);
      os << " / ";
      print_rec(e->rhs, os, 2, true);
      break;
    case NodeKind::Pow:
      print_rec(e->lhs, os, 4, false);  // force brackets around compound bases
      os << "**" << e->exponent;
      break;
    case NodeKind::Diff:
      os << "D[";
      print_rec(e->lhs, os, 0, false);
      os << "]/D[";
      print_rec(e->rhs, os, 0, false);
      os << "]";
      break;
    case NodeKind::Partial:
      os << "Partial[";
      print_rec(e->lhs, os, 0, false);
      os << "]/Partial[";
      print_rec(e->rhs, os, 0, false);
      os << "]";
      break;
  }
  if (need_paren) os << ")";
}

}  // namespace

std::string print_expr(const ExprPtr& e) {
  if (!e) return "<null>";
  std::ostringstream os;
  print_rec(e, os, 0, false);
  return os.str();
}

int complexity(const ExprPtr& e) {
  if (!e) return 0;
  switch (e->kind) {
    case NodeKind::Number:
    case NodeKind::Atom: return 1;
    case NodeKind::Pow: return 1 + complexity(e->lhs);
    case NodeKind::Diff:
    case NodeKind::Partial: return 2 + complexity(e->lhs) + complexity(e->rhs);
    default: return 1 + complexity(e->lhs) + complexity(e->rhs);
  }
}

void collect_atoms(const ExprPtr& e, std::vector<const Expr*>& out) {
  if (!e) return;
  if (e->kind == NodeKind::Atom) {
    out.push_back(e.get());
    return;
  }
  collect_atoms(e->lhs, out);
  collect_atoms(e->rhs, out);
}

std::set<int> concrete_ids(const ExprPtr& e) {
  std::set<int> ids;
  std::vector<const Expr*> atoms;
  collect_atoms(e, atoms);
  for (const Expr* a : atoms)
    for (const ObjRef& r : a->indices)
      if (!r.is_bound()) ids.insert(r.id);
  return ids;
}

std::set<std::string> bound_vars(const ExprPtr& e) {
  std::set<std::string> vars;
  std::vector<const Expr*> atoms;
  collect_atoms(e, atoms);
  for (const Expr* a : atoms)
    for (const ObjRef& r : a->indices)
      if (r.is_bound()) vars.insert(r.var);
  return vars;
}

ExprPtr substitute(const ExprPtr& e, const std::map<std::string, ObjRef>& env) {
  if (!e) return e;
  switch (e->kind) {
    case NodeKind::Number: return e;
    case NodeKind::Atom: {
      bool changed = false;
      std::vector<ObjRef> idx = e->indices;
      for (ObjRef& r : idx) {
        if (r.is_bound()) {
          auto it = env.find(r.var);
          if (it != env.end()) {
            r = it->second;
            changed = true;
          }
        }
      }
      if (!changed) return e;
      return make_atom(e->symbol, std::move(idx));
    }
    case NodeKind::Pow: {
      ExprPtr base = substitute(e->lhs, env);
      if (base == e->lhs) return e;
      return make_pow(base, e->exponent);
    }
    default: {
      ExprPtr a = substitute(e->lhs, env);
      ExprPtr b = substitute(e->rhs, env);
      if (a == e->lhs && b == e->rhs) return e;
      return make_bin(e->kind, std::move(a), std::move(b));
    }
  }
}

ExprPtr abstract_ids(const ExprPtr& e, const std::map<int, std::string>& env) {
  if (!e) return e;
  switch (e->kind) {
    case NodeKind::Number: return e;
    case NodeKind::Atom: {
      bool changed = false;
      std::vector<ObjRef> idx = e->indices;
      for (ObjRef& r : idx) {
        if (!r.is_bound()) {
          auto it = env.find(r.id);
          if (it != env.end()) {
            r = ObjRef::bound(it->second);
            changed = true;
          }
        }
      }
      if (!changed) return e;
      return make_atom(e->symbol, std::move(idx));
    }
    case NodeKind::Pow: {
      ExprPtr base = abstract_ids(e->lhs, env);
      if (base == e->lhs) return e;
      return make_pow(base, e->exponent);
    }
    default: {
      ExprPtr a = abstract_ids(e->lhs, env);
      ExprPtr b = abstract_ids(e->rhs, env);
      if (a == e->lhs && b == e->rhs) return e;
      return make_bin(e->kind, std::move(a), std::move(b));
    }
  }
}

void flatten_sum(const ExprPtr& e, std::vector<std::pair<ExprPtr, int>>& terms, int sign) {
  if (!e) return;
  if (e->kind == NodeKind::Add) {
    flatten_sum(e->lhs, terms, sign);
    flatten_sum(e->rhs, terms, sign);
    return;
  }
  if (e->kind == NodeKind::Sub) {
    flatten_sum(e->lhs, terms, sign);
    flatten_sum(e->rhs, terms, -sign);
    return;
  }
  terms.emplace_back(e, sign);
}

std::string print_concept(const ConceptDef& c) {
  std::ostringstream os;
  os << "concept " << c.symbol << " := ";
  switch (c.kind) {
    case ConceptKind::Dynamical: {
      for (const TypedSlot& s : c.slots) os << "forall " << s.var << ": " << s.object_type << ", ";
      os << print_expr(c.body);
      break;
    }
    case ConceptKind::Summation:
      os << "sum[" << c.sum_var << ": " << c.sum_type << "], " << print_expr(c.body);
      break;
    case ConceptKind::Intrinsic: {
      for (const TypedSlot& s : c.slots) os << "forall " << s.var << ": " << s.object_type << ", ";
      os << "Intrinsic[" << c.intrinsic.experiment << "(";
      for (std::size_t i = 0; i < c.intrinsic.bindings.size(); ++i) {
        if (i) os << ", ";
        os << c.intrinsic.bindings[i].first << " -> " << c.intrinsic.bindings[i].second;
      }
      os << "), " << print_expr(c.body) << "]";
      break;
    }
    case ConceptKind::UniversalConstant:
      os << "Intrinsic[" << c.intrinsic.experiment << "(), " << print_expr(c.body) << "]";
      break;
  }
  return os.str();
}

std::string print_law(const LawDef& l) {
  std::ostringstream os;
  os << "law " << l.name << " := "
     << (l.kind == LawKind::Conserved ? "conserved(" : "zero(");
  if (l.general)
    os << l.subject_concept;
  else
    os << print_expr(l.subject_expr);
  os << ") in {";
  bool first = true;
  for (const std::string& e : l.scope) {
    if (!first) os << ", ";
    first = false;
    os << e;
  }
  os << "}";
  return os.str();
}

}  // namespace physlaw
