#include "physlaw/diffalg.hpp"

#include "physlaw/measured.hpp"  // UsageError

#include <algorithm>

namespace physlaw {

Poly pseudo_remainder(Poly f, const Poly& g, const Indet& v) {
  const int dg = g.degree_in(v);
  if (dg == 0) throw UsageError("pseudo_remainder: divisor does not involve the variable");
  const Poly lc_g = g.coefficient_of(v, dg);
  int df = f.degree_in(v);
  int guard = 0;
  while (!f.is_zero() && df >= dg) {
    if (++guard > 10000) throw UsageError("pseudo_remainder: descent guard tripped");
    const Poly lc_f = f.coefficient_of(v, df);
    Poly shift = Poly::variable(f.vars() ? f.vars() : g.vars(), v).pow(df - dg);
    f = lc_g * f - lc_f * g * shift;
    const int nd = f.degree_in(v);
    if (!f.is_zero() && nd >= df)
      throw UsageError("pseudo_remainder: degree failed to descend");
    df = nd;
  }
  return f;
}

namespace {

// Collects every dependent/time indeterminate occurring in p, descending.
std::vector<Indet> ranked_indets(const Poly& p) {
  std::vector<Indet> out;
  for (const auto& [m, c] : p.terms()) {
    for (const auto& [v, e] : m) {
      if (v.cls == VarClass::Constant) continue;
      out.push_back(v);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end(),
                        [](const Indet& a, const Indet& b) { return a == b; }),
            out.end());
  std::reverse(out.begin(), out.end());
  return out;
}

struct Divisor {
  const Poly* member = nullptr;
  int prolong = 0;  // number of total derivatives to apply
};

// Finds the highest indeterminate of p reducible by some member of cs, and
// the member that handles it with the fewest prolongations.
std::optional<std::pair<Indet, Divisor>> find_target(const Poly& p, const CharSet& cs) {
  for (const Indet& u : ranked_indets(p)) {
    if (u.cls != VarClass::Dependent) continue;
    std::optional<Divisor> best;
    for (const Poly& a : cs) {
      if (a.is_zero() || a.is_ground()) continue;
      const Indet la = a.leader();
      if (la.cls != VarClass::Dependent || la.var != u.var || la.order > u.order) continue;
      Divisor cand{&a, u.order - la.order};
      if (cand.prolong == 0 && p.degree_in(u) < a.degree_in(la))
        continue;  // already reduced in degree
      if (!best || cand.prolong < best->prolong) best = cand;
    }
    if (best) return std::make_pair(u, *best);
  }
  return std::nullopt;
}

}  // namespace

Poly ritt_reduce(const Poly& p, const CharSet& cs, std::vector<ReductionStep>* trace) {
  Poly r = p;
  int guard = 0;
  while (!r.is_zero()) {
    const auto target = find_target(r, cs);
    if (!target) break;
    if (++guard > 10000) throw UsageError("ritt_reduce: step guard tripped");
    const auto& [u, div] = *target;
    if (trace) trace->push_back({u, r.degree_in(u)});
    Poly g = *div.member;
    for (int k = 0; k < div.prolong; ++k) g = g.total_derivative();
    r = pseudo_remainder(std::move(r), g, u);
  }
  return r;
}

namespace {

// deterministic processing order: by leader rank, then leader degree, then
// canonical polynomial order
bool charset_order(const Poly& a, const Poly& b) {
  const Indet la = a.leader();
  const Indet lb = b.leader();
  if (!(la == lb)) return la < lb;
  const int da = a.degree_in(la);
  const int db = b.degree_in(lb);
  if (da != db) return da < db;
  return Poly::compare(a, b) < 0;
}

}  // namespace

CharSet autoreduce(std::vector<Poly> polys) {
  CharSet s;
  for (Poly& p : polys) {
    if (p.is_zero() || p.is_ground()) continue;
    s.push_back(p.primitive());
  }
  std::sort(s.begin(), s.end(), charset_order);
  s.erase(std::unique(s.begin(), s.end()), s.end());

  int guard = 0;
  bool changed = true;
  while (changed) {
    if (++guard > 1000) throw UsageError("autoreduce: pass guard tripped");
    changed = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      CharSet rest;
      rest.reserve(s.size() - 1);
      for (std::size_t j = 0; j < s.size(); ++j)
        if (j != i) rest.push_back(s[j]);
      const Poly r = ritt_reduce(s[i], rest);
      Poly rp = r.is_zero() ? r : r.primitive();
      if (rp == s[i]) continue;
      s.erase(s.begin() + static_cast<std::ptrdiff_t>(i));
      if (!rp.is_zero() && !rp.is_ground()) {
        auto pos = std::lower_bound(s.begin(), s.end(), rp, charset_order);
        s.insert(pos, std::move(rp));
      }
      changed = true;
      break;
    }
  }
  return s;
}

std::vector<Poly> minimal_representation(const std::vector<std::pair<Poly, int>>& eqs) {
  std::vector<std::pair<Poly, int>> ordered = eqs;
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& a, const auto& b) {
                     if (a.second != b.second) return a.second < b.second;
                     return Poly::compare(a.first, b.first) < 0;
                   });
  std::vector<Poly> minimal;
  CharSet cs;
  for (const auto& [p, cx] : ordered) {
    if (p.is_zero()) continue;
    const Poly r = ritt_reduce(p, cs);
    if (r.is_zero()) continue;  // derivable from simpler members
    minimal.push_back(p);
    std::vector<Poly> next(cs.begin(), cs.end());
    next.push_back(p);
    cs = autoreduce(std::move(next));
  }
  return minimal;
}

Redundancy reduce_general_law(const std::map<std::string, std::vector<Poly>>& specialized,
                              const std::map<std::string, CharSet>& basis_per_experiment) {
  for (const auto& [exp, polys] : specialized) {
    const auto it = basis_per_experiment.find(exp);
    if (it == basis_per_experiment.end())
      throw UsageError("reduce_general_law: missing basis for experiment " + exp);
    for (const Poly& p : polys) {
      if (!ritt_reduce(p, it->second).is_zero()) return Redundancy::Novel;
    }
  }
  return Redundancy::Redundant;
}

RationalFn expr_to_rational(const ExprPtr& e, VarTable& vars,
                            const std::function<VarClass(const std::string&)>& classify) {
  switch (e->kind) {
    case NodeKind::Number:
      return RationalFn(Poly::constant(&vars, e->value));
    case NodeKind::Atom: {
      const std::string key = print_expr(e);
      const int id = vars.find_or_add(key, classify(key));
      return RationalFn(Poly::variable(&vars, make_indet(vars, id, 0)));
    }
    case NodeKind::Add:
      return expr_to_rational(e->lhs, vars, classify) + expr_to_rational(e->rhs, vars, classify);
    case NodeKind::Sub:
      return expr_to_rational(e->lhs, vars, classify) - expr_to_rational(e->rhs, vars, classify);
    case NodeKind::Mul:
      return expr_to_rational(e->lhs, vars, classify) * expr_to_rational(e->rhs, vars, classify);
    case NodeKind::Div:
      return expr_to_rational(e->lhs, vars, classify) / expr_to_rational(e->rhs, vars, classify);
    case NodeKind::Pow:
      return expr_to_rational(e->lhs, vars, classify).pow(e->exponent);
    case NodeKind::Diff: {
      const RationalFn dp = expr_to_rational(e->lhs, vars, classify).total_derivative();
      const RationalFn dq = expr_to_rational(e->rhs, vars, classify).total_derivative();
      if (dq.is_zero())
        throw UsageError("expr_to_rational: derivative denominator is constant");
      return dp / dq;
    }
    default:
      throw UsageError("expr_to_rational: Partial has no differential-polynomial form");
  }
}

}  // namespace physlaw
