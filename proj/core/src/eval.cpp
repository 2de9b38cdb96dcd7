#include "physlaw/eval.hpp"

#include <algorithm>
#include <cmath>

namespace physlaw {

PhysObject resolve_object(const ExperimentData& data, int object_id) {
  for (const PhysObject& o : data.roster) {
    if (o.id != object_id) continue;
    PhysObject full = o;
    const std::string prefix = o.name + ".";
    for (const auto& [k, v] : data.assignment) {
      if (k.rfind(prefix, 0) == 0) full.props[k.substr(prefix.size())] = v;
    }
    return full;
  }
  throw EvalError("no object with id " + std::to_string(object_id) + " in experiment " +
                  data.experiment);
}

namespace {

bool strictly_monotonic(const SeriesData& s) {
  bool inc = true, dec = true;
  double prev = 0;
  bool have = false;
  for (std::size_t i = 0; i < s.n(); ++i) {
    if (s.bad[i]) continue;
    if (have) {
      const double d = s.mean[i] - prev;
      inc &= d > 0;
      dec &= d < 0;
    }
    prev = s.mean[i];
    have = true;
  }
  return inc || dec;
}

struct Evaluator {
  const ExperimentData& data;
  ConceptStore& store;
  WorkCounter* work;
  const DataPolicy& policy;

  MeasuredValue run(const ExprPtr& e) {
    if (work) work->charge(1);
    switch (e->kind) {
      case NodeKind::Number:
        return MeasuredValue::constant(to_double(e->value), 0.0);
      case NodeKind::Atom:
        return atom(*e);
      case NodeKind::Add:
        return combine(run(e->lhs), run(e->rhs), BinaryOp::Add, policy);
      case NodeKind::Sub:
        return combine(run(e->lhs), run(e->rhs), BinaryOp::Sub, policy);
      case NodeKind::Mul:
        return combine(run(e->lhs), run(e->rhs), BinaryOp::Mul, policy);
      case NodeKind::Div:
        return combine(run(e->lhs), run(e->rhs), BinaryOp::Div, policy);
      case NodeKind::Pow: {
        const MeasuredValue base = run(e->lhs);
        const int n = std::abs(e->exponent);
        MeasuredValue acc = base;
        for (int i = 1; i < n; ++i) acc = combine(acc, base, BinaryOp::Mul, policy);
        if (e->exponent < 0)
          acc = combine(MeasuredValue::constant(1.0, 0.0), acc, BinaryOp::Div, policy);
        return acc;
      }
      case NodeKind::Diff:
        return derivative(e);
      case NodeKind::Partial:
        throw EvalError("Partial derivatives are symbolic-only and cannot be evaluated "
                        "against sampled data");
    }
    throw EvalError("eval: unknown node kind");
  }

  MeasuredValue derivative(const ExprPtr& e) {
    const MeasuredValue num = run(e->lhs);
    const MeasuredValue den = run(e->rhs);
    if (num.is_err() || den.is_err()) return MeasuredValue::err();
    if (!den.is_series()) return MeasuredValue::err();  // d/d(const) has no meaning here
    if (num.is_zero() || num.is_const()) return differentiate(num, den, policy);
    if (strictly_monotonic(den.series())) return differentiate(num, den, policy);
    // non-monotonic denominator: chain through the time grid
    const MeasuredValue* t = data.find("t");
    if (!t) throw EvalError("experiment data has no clock series");
    const MeasuredValue dnum = differentiate(num, *t, policy);
    const MeasuredValue dden = differentiate(den, *t, policy);
    return combine(dnum, dden, BinaryOp::Div, policy);
  }

  MeasuredValue atom(const Expr& a) {
    for (const ObjRef& r : a.indices)
      if (r.is_bound())
        throw EvalError("unbound variable '" + r.var + "' in atom " + a.symbol);
    // observables first
    const std::string key = print_expr(make_atom(a.symbol, a.indices));
    if (const MeasuredValue* v = data.find(key)) return *v;
    // then concepts
    const ConceptDef* c = store.find_concept(a.symbol);
    if (!c) throw EvalError("unresolvable symbol '" + a.symbol + "'");
    switch (c->kind) {
      case ConceptKind::Dynamical: {
        if (a.indices.size() != c->slots.size())
          throw EvalError("atom " + a.symbol + " has wrong arity");
        std::map<std::string, ObjRef> env;
        for (std::size_t i = 0; i < c->slots.size(); ++i) {
          check_type(a.indices[i].id, c->slots[i].object_type, a.symbol);
          env[c->slots[i].var] = a.indices[i];
        }
        return run(substitute(c->body, env));
      }
      case ConceptKind::Summation: {
        if (!a.indices.empty())
          throw EvalError("summation concept " + a.symbol + " takes no indices");
        MeasuredValue acc = MeasuredValue::zero(0.0);
        bool first = true;
        for (const PhysObject& o : data.roster) {
          if (o.type != c->sum_type) continue;
          const MeasuredValue term =
              run(substitute(c->body, {{c->sum_var, ObjRef::concrete(o.id)}}));
          acc = first ? term : combine(acc, term, BinaryOp::Add, policy);
          first = false;
        }
        return acc;  // empty sums stay exactly Zero
      }
      case ConceptKind::Intrinsic: {
        if (a.indices.size() != 1 || c->slots.size() != 1)
          throw EvalError("intrinsic concept " + a.symbol + " takes one object index");
        check_type(a.indices[0].id, c->slots[0].object_type, a.symbol);
        return store.intrinsic_value(*c, resolve_object(data, a.indices[0].id));
      }
      case ConceptKind::UniversalConstant: {
        if (!a.indices.empty())
          throw EvalError("universal constant " + a.symbol + " takes no indices");
        PhysObject none;
        none.name = "";
        none.type = "";
        return store.intrinsic_value(*c, none);
      }
    }
    throw EvalError("eval: unknown concept kind");
  }

  void check_type(int id, const std::string& want, const std::string& sym) {
    for (const PhysObject& o : data.roster) {
      if (o.id != id) continue;
      if (o.type != want)
        throw EvalError("object " + std::to_string(id) + " has type " + o.type +
                        ", concept " + sym + " expects " + want);
      return;
    }
    throw EvalError("no object with id " + std::to_string(id) + " for concept " + sym);
  }
};

}  // namespace

MeasuredValue eval(const ExprPtr& e, const ExperimentData& data, ConceptStore& store,
                   WorkCounter* work, const DataPolicy& policy) {
  Evaluator ev{data, store, work, policy};
  return ev.run(e);
}

namespace {

void assignments_rec(const std::vector<TypedSlot>& slots, std::size_t k,
                     const std::vector<PhysObject>& roster, std::vector<int>& picked,
                     std::vector<std::vector<int>>& out) {
  if (k == slots.size()) {
    out.push_back(picked);
    return;
  }
  for (const PhysObject& o : roster) {
    if (o.type != slots[k].object_type) continue;
    if (std::find(picked.begin(), picked.end(), o.id) != picked.end()) continue;
    picked.push_back(o.id);
    assignments_rec(slots, k + 1, roster, picked, out);
    picked.pop_back();
  }
}

}  // namespace

std::vector<ExprPtr> specialize(const ConceptDef& c, const std::vector<PhysObject>& roster) {
  std::vector<ExprPtr> out;
  switch (c.kind) {
    case ConceptKind::Summation:
      out.push_back(make_atom(c.symbol));
      break;
    case ConceptKind::UniversalConstant:
      out.push_back(make_atom(c.symbol));
      break;
    case ConceptKind::Dynamical:
    case ConceptKind::Intrinsic: {
      if (c.slots.empty()) {
        out.push_back(make_atom(c.symbol));
        break;
      }
      std::vector<std::vector<int>> assigns;
      std::vector<int> picked;
      assignments_rec(c.slots, 0, roster, picked, assigns);
      for (const auto& ids : assigns) {
        std::vector<ObjRef> refs;
        refs.reserve(ids.size());
        for (int id : ids) refs.push_back(ObjRef::concrete(id));
        out.push_back(make_atom(c.symbol, std::move(refs)));
      }
      break;
    }
  }
  return out;
}

namespace {

const char* kSlotVars[] = {"i", "j", "k", "l", "p", "q"};

std::string slot_var(std::size_t n) {
  if (n < 6) return kSlotVars[n];
  return "i" + std::to_string(n + 1);
}

const PhysObject* roster_object(const std::vector<PhysObject>& roster, int id) {
  for (const PhysObject& o : roster)
    if (o.id == id) return &o;
  return nullptr;
}

}  // namespace

ConceptDef generalize(const ExprPtr& e, const std::vector<PhysObject>& roster) {
  ConceptDef c;
  c.kind = ConceptKind::Dynamical;
  const std::set<int> ids = concrete_ids(e);
  if (ids.empty()) {
    c.body = e;
    return c;  // nothing to abstract (e.g. t)
  }

  // summation detection: a sum of one single-object template instantiated
  // over every roster object of one type
  std::vector<std::pair<ExprPtr, int>> terms;
  flatten_sum(e, terms);
  if (terms.size() >= 2) {
    bool all_single = true;
    std::vector<int> term_ids;
    for (const auto& [term, sign] : terms) {
      const std::set<int> tids = concrete_ids(term);
      if (sign != 1 || tids.size() != 1) {
        all_single = false;
        break;
      }
      term_ids.push_back(*tids.begin());
    }
    if (all_single) {
      std::set<int> distinct(term_ids.begin(), term_ids.end());
      const PhysObject* first_obj = roster_object(roster, term_ids[0]);
      if (first_obj && distinct.size() == term_ids.size()) {
        const std::string& type = first_obj->type;
        std::size_t type_count = 0;
        bool types_ok = true;
        for (int id : term_ids) {
          const PhysObject* o = roster_object(roster, id);
          types_ok &= o && o->type == type;
        }
        for (const PhysObject& o : roster) type_count += o.type == type;
        if (types_ok && distinct.size() == type_count) {
          const ExprPtr tmpl = abstract_ids(terms[0].first, {{term_ids[0], "i"}});
          bool same_template = true;
          for (std::size_t k = 1; k < terms.size(); ++k) {
            same_template &=
                expr_equal(tmpl, abstract_ids(terms[k].first, {{term_ids[k], "i"}}));
          }
          if (same_template) {
            c.kind = ConceptKind::Summation;
            c.sum_var = "i";
            c.sum_type = type;
            c.body = tmpl;
            return c;
          }
        }
      }
    }
  }

  // plain multi-object generalization, slot order by ascending object id
  std::map<int, std::string> env;
  std::size_t n = 0;
  for (int id : ids) {
    const PhysObject* o = roster_object(roster, id);
    if (!o) throw EvalError("generalize: expression references unknown object id " +
                            std::to_string(id));
    const std::string var = slot_var(n++);
    env[id] = var;
    c.slots.push_back({var, o->type});
  }
  c.body = abstract_ids(e, env);
  return c;
}

ExprPtr expand_for_algebra(const ExprPtr& e, const ConceptStore& store,
                           const std::vector<PhysObject>& roster) {
  switch (e->kind) {
    case NodeKind::Number:
      return e;
    case NodeKind::Atom: {
      const ConceptDef* c = store.find_concept(e->symbol);
      if (!c) return e;  // observable or free symbol
      // observables register as self-referential concepts; they are terminal
      if (c->body && c->body->kind == NodeKind::Atom && c->body->symbol == c->symbol)
        return e;
      switch (c->kind) {
        case ConceptKind::Intrinsic:
        case ConceptKind::UniversalConstant:
          return e;  // stays a symbolic constant
        case ConceptKind::Dynamical: {
          if (c->slots.empty()) return expand_for_algebra(c->body, store, roster);
          if (e->indices.size() != c->slots.size())
            throw EvalError("expand: atom " + e->symbol + " has wrong arity");
          std::map<std::string, ObjRef> env;
          for (std::size_t i = 0; i < c->slots.size(); ++i) env[c->slots[i].var] = e->indices[i];
          return expand_for_algebra(substitute(c->body, env), store, roster);
        }
        case ConceptKind::Summation: {
          ExprPtr acc;
          for (const PhysObject& o : roster) {
            if (o.type != c->sum_type) continue;
            ExprPtr term = expand_for_algebra(
                substitute(c->body, {{c->sum_var, ObjRef::concrete(o.id)}}), store, roster);
            acc = acc ? make_add(acc, term) : term;
          }
          if (!acc) acc = make_number(0);
          return acc;
        }
      }
      return e;
    }
    case NodeKind::Pow:
      return make_pow(expand_for_algebra(e->lhs, store, roster), e->exponent);
    default: {
      ExprPtr a = expand_for_algebra(e->lhs, store, roster);
      ExprPtr b = expand_for_algebra(e->rhs, store, roster);
      if (a == e->lhs && b == e->rhs) return e;
      return make_bin(e->kind, std::move(a), std::move(b));
    }
  }
}

}  // namespace physlaw
