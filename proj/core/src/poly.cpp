#include "physlaw/poly.hpp"

#include "physlaw/expr.hpp"
#include "physlaw/measured.hpp"  // UsageError
#include "physlaw/parser.hpp"

#include <cmath>
#include <sstream>

namespace physlaw {

int VarTable::add(const std::string& name, VarClass cls) {
  auto it = index_.find(name);
  if (it != index_.end()) {
    if (entries_[static_cast<std::size_t>(it->second)].cls != cls)
      throw UsageError("VarTable: '" + name + "' re-registered with a different class");
    return it->second;
  }
  const int id = static_cast<int>(entries_.size());
  entries_.push_back({name, cls});
  index_[name] = id;
  return id;
}

int VarTable::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

int VarTable::find_or_add(const std::string& name, VarClass cls) {
  const int id = find(name);
  return id >= 0 ? id : add(name, cls);
}

VarClass VarTable::var_class(int id) const {
  return entries_.at(static_cast<std::size_t>(id)).cls;
}

const std::string& VarTable::name(int id) const {
  return entries_.at(static_cast<std::size_t>(id)).name;
}

Indet make_indet(const VarTable& vars, int var_id, int order) {
  Indet v;
  v.cls = vars.var_class(var_id);
  v.var = var_id;
  v.order = order;
  if (order > 0 && v.cls != VarClass::Dependent)
    throw UsageError("make_indet: only dependent variables carry derivatives");
  return v;
}

Poly Poly::constant(const VarTable* vars, Rational c) {
  Poly p(vars);
  if (c != 0) p.terms_[{}] = std::move(c);
  return p;
}

Poly Poly::variable(const VarTable* vars, Indet v) {
  Poly p(vars);
  p.terms_[{{v, 1}}] = 1;
  return p;
}

bool Poly::is_ground() const {
  if (terms_.empty()) return true;
  const Monomial& lead = terms_.rbegin()->first;
  return lead.empty() || lead.front().first.cls == VarClass::Constant;
}

void Poly::add_term(const Monomial& m, const Rational& c) {
  if (c == 0) return;
  auto it = terms_.find(m);
  if (it == terms_.end()) {
    terms_.emplace(m, c);
  } else {
    it->second += c;
    if (it->second == 0) terms_.erase(it);
  }
}

Poly Poly::operator-() const {
  Poly r(vars_);
  for (const auto& [m, c] : terms_) r.terms_.emplace(m, -c);
  return r;
}

Poly Poly::operator+(const Poly& o) const {
  Poly r = *this;
  r += o;
  return r;
}

Poly Poly::operator-(const Poly& o) const {
  Poly r = *this;
  r -= o;
  return r;
}

Poly& Poly::operator+=(const Poly& o) {
  if (!vars_) vars_ = o.vars_;
  for (const auto& [m, c] : o.terms_) add_term(m, c);
  return *this;
}

Poly& Poly::operator-=(const Poly& o) {
  if (!vars_) vars_ = o.vars_;
  for (const auto& [m, c] : o.terms_) add_term(m, -c);
  return *this;
}

namespace {

Poly::Monomial mono_mul(const Poly::Monomial& a, const Poly::Monomial& b) {
  // merge two exponent lists sorted descending by indet
  Poly::Monomial out;
  out.reserve(a.size() + b.size());
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].first == b[j].first) {
      out.emplace_back(a[i].first, a[i].second + b[j].second);
      ++i;
      ++j;
    } else if (b[j].first < a[i].first) {
      out.push_back(a[i++]);
    } else {
      out.push_back(b[j++]);
    }
  }
  while (i < a.size()) out.push_back(a[i++]);
  while (j < b.size()) out.push_back(b[j++]);
  return out;
}

}  // namespace

Poly Poly::operator*(const Poly& o) const {
  Poly r(vars_ ? vars_ : o.vars_);
  for (const auto& [ma, ca] : terms_)
    for (const auto& [mb, cb] : o.terms_) r.add_term(mono_mul(ma, mb), ca * cb);
  return r;
}

Poly Poly::operator*(const Rational& c) const {
  Poly r(vars_);
  if (c == 0) return r;
  for (const auto& [m, coef] : terms_) r.terms_.emplace(m, coef * c);
  return r;
}

Poly Poly::pow(int e) const {
  if (e < 0) throw UsageError("Poly::pow: negative exponent");
  Poly r = Poly::constant(vars_, 1);
  for (int i = 0; i < e; ++i) r = r * *this;
  return r;
}

Indet Poly::leader() const {
  if (terms_.empty()) throw UsageError("Poly::leader: zero polynomial");
  const Monomial& lead = terms_.rbegin()->first;
  if (lead.empty() || lead.front().first.cls == VarClass::Constant)
    throw UsageError("Poly::leader: ground polynomial has no leader");
  return lead.front().first;
}

int Poly::degree_in(const Indet& v) const {
  int d = 0;
  for (const auto& [m, c] : terms_)
    for (const auto& [iv, e] : m)
      if (iv == v) d = std::max(d, e);
  return d;
}

Poly Poly::coefficient_of(const Indet& v, int k) const {
  Poly r(vars_);
  for (const auto& [m, c] : terms_) {
    int e = 0;
    Monomial rest;
    for (const auto& p : m) {
      if (p.first == v)
        e = p.second;
      else
        rest.push_back(p);
    }
    if (e == k) r.add_term(rest, c);
  }
  return r;
}

Poly Poly::initial() const {
  const Indet v = leader();
  return coefficient_of(v, degree_in(v));
}

Poly Poly::separant() const { return partial_derivative(leader()); }

Poly Poly::total_derivative() const {
  Poly r(vars_);
  for (const auto& [m, c] : terms_) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      const auto& [v, e] = m[i];
      if (v.cls == VarClass::Constant) continue;
      // d/dt of v^e = e v^(e-1) v', with t' = 1
      Monomial rest;
      rest.reserve(m.size());
      for (std::size_t j = 0; j < m.size(); ++j) {
        if (j == i) {
          if (e > 1) rest.emplace_back(v, e - 1);
        } else {
          rest.push_back(m[j]);
        }
      }
      if (v.cls == VarClass::Time) {
        r.add_term(rest, c * e);
      } else {
        Indet dv = v;
        dv.order += 1;
        r.add_term(mono_mul(rest, {{dv, 1}}), c * e);
      }
    }
  }
  return r;
}

Poly Poly::partial_derivative(const Indet& v) const {
  Poly r(vars_);
  for (const auto& [m, c] : terms_) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!(m[i].first == v)) continue;
      const int e = m[i].second;
      Monomial rest;
      for (std::size_t j = 0; j < m.size(); ++j) {
        if (j == i) {
          if (e > 1) rest.emplace_back(v, e - 1);
        } else {
          rest.push_back(m[j]);
        }
      }
      r.add_term(rest, c * e);
    }
  }
  return r;
}

Rational Poly::leading_coefficient() const {
  if (terms_.empty()) return 0;
  return terms_.rbegin()->second;
}

Poly Poly::primitive() const {
  if (terms_.empty()) return *this;
  Integer lcm_den = 1, gcd_num = 0;
  for (const auto& [m, c] : terms_)
    lcm_den = boost::multiprecision::lcm(lcm_den, boost::multiprecision::denominator(c));
  for (const auto& [m, c] : terms_) {
    const Integer num = boost::multiprecision::numerator(c * Rational(lcm_den));
    gcd_num = boost::multiprecision::gcd(gcd_num, num);
  }
  if (gcd_num == 0) gcd_num = 1;
  Rational scale{Rational(lcm_den) / Rational(gcd_num)};
  if (leading_coefficient() < 0) scale = -scale;
  return *this * scale;
}

double Poly::eval(const std::function<double(const Indet&)>& point) const {
  double acc = 0.0;
  for (const auto& [m, c] : terms_) {
    double t = to_double(c);
    for (const auto& [v, e] : m) t *= std::pow(point(v), e);
    acc += t;
  }
  return acc;
}

Poly Poly::substituted(const Indet& v, const Poly& replacement) const {
  Poly r(vars_);
  for (const auto& [m, c] : terms_) {
    int e = 0;
    Monomial rest;
    for (const auto& p : m) {
      if (p.first == v)
        e = p.second;
      else
        rest.push_back(p);
    }
    Poly term(vars_);
    term.add_term(rest, c);
    if (e > 0) term = term * replacement.pow(e);
    r += term;
  }
  return r;
}

std::string Poly::to_string() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
    const auto& [m, c] = *it;
    if (!first) os << (c > 0 ? " + " : " - ");
    if (first && c < 0) os << "-";
    first = false;
    const Rational ac = c < 0 ? Rational(-c) : c;
    const bool unit = ac == 1 && !m.empty();
    if (!unit) os << rational_to_string(ac);
    bool sep = !unit;
    for (const auto& [v, e] : m) {
      if (sep) os << "*";
      sep = true;
      if (vars_) {
        os << vars_->name(v.var);
      } else {
        os << "x" << v.var;
      }
      for (int k = 0; k < v.order; ++k) os << "'";
      if (e > 1) os << "^" << e;
    }
  }
  return os.str();
}

int Poly::compare(const Poly& a, const Poly& b) {
  auto ia = a.terms_.rbegin();
  auto ib = b.terms_.rbegin();
  for (; ia != a.terms_.rend() && ib != b.terms_.rend(); ++ia, ++ib) {
    if (ia->first != ib->first) return ia->first < ib->first ? -1 : 1;
    if (ia->second != ib->second) return ia->second < ib->second ? -1 : 1;
  }
  if (ia != a.terms_.rend()) return 1;
  if (ib != b.terms_.rend()) return -1;
  return 0;
}

RationalFn::RationalFn(Poly n, Poly d) : num(std::move(n)), den(std::move(d)) {
  if (den.is_zero()) throw UsageError("RationalFn: zero denominator");
  // normalize: make the denominator content-free with positive leading coef
  const Poly dp = den.primitive();
  // den = dp / s  =>  num/den = (num * s) / dp where s = dp's scale vs den
  // recover s from the leading coefficients
  const Rational s = dp.leading_coefficient() / den.leading_coefficient();
  num = num * s;
  den = dp;
}

RationalFn::RationalFn(Poly n) : num(std::move(n)) {
  den = Poly::constant(num.vars(), 1);
}

RationalFn RationalFn::constant(const VarTable* vars, const Rational& c) {
  return RationalFn(Poly::constant(vars, c));
}

RationalFn RationalFn::operator+(const RationalFn& o) const {
  if (den == o.den) return RationalFn(num + o.num, den);
  return RationalFn(num * o.den + o.num * den, den * o.den);
}

RationalFn RationalFn::operator-(const RationalFn& o) const {
  if (den == o.den) return RationalFn(num - o.num, den);
  return RationalFn(num * o.den - o.num * den, den * o.den);
}

RationalFn RationalFn::operator*(const RationalFn& o) const {
  return RationalFn(num * o.num, den * o.den);
}

RationalFn RationalFn::operator/(const RationalFn& o) const {
  if (o.num.is_zero()) throw UsageError("RationalFn: division by zero function");
  return RationalFn(num * o.den, den * o.num);
}

RationalFn RationalFn::operator-() const { return RationalFn(-num, den); }

RationalFn RationalFn::pow(int e) const {
  if (e >= 0) return RationalFn(num.pow(e), den.pow(e));
  if (num.is_zero()) throw UsageError("RationalFn: negative power of zero");
  return RationalFn(den.pow(-e), num.pow(-e));
}

bool RationalFn::equals(const RationalFn& o) const {
  return (num * o.den - o.num * den).is_zero();
}

double RationalFn::eval(const std::function<double(const Indet&)>& point) const {
  return num.eval(point) / den.eval(point);
}

RationalFn RationalFn::partial(const Indet& v) const {
  return RationalFn(num.partial_derivative(v) * den - num * den.partial_derivative(v),
                    den * den);
}

RationalFn RationalFn::total_derivative() const {
  return RationalFn(num.total_derivative() * den - num * den.total_derivative(), den * den);
}

std::string RationalFn::to_string() const {
  if (den.term_count() == 1 && den.terms().begin()->first.empty() &&
      den.terms().begin()->second == 1)
    return num.to_string();
  return "(" + num.to_string() + ") / (" + den.to_string() + ")";
}

namespace {

Poly expr_to_poly_rec(const ExprPtr& e, VarTable& vars,
                      const std::function<VarClass(const std::string&)>& classify) {
  switch (e->kind) {
    case NodeKind::Number:
      return Poly::constant(&vars, e->value);
    case NodeKind::Atom: {
      const std::string key = print_expr(e);
      const int id = vars.find_or_add(key, classify(key));
      return Poly::variable(&vars, make_indet(vars, id, 0));
    }
    case NodeKind::Add:
      return expr_to_poly_rec(e->lhs, vars, classify) + expr_to_poly_rec(e->rhs, vars, classify);
    case NodeKind::Sub:
      return expr_to_poly_rec(e->lhs, vars, classify) - expr_to_poly_rec(e->rhs, vars, classify);
    case NodeKind::Mul:
      return expr_to_poly_rec(e->lhs, vars, classify) * expr_to_poly_rec(e->rhs, vars, classify);
    case NodeKind::Pow: {
      if (e->exponent < 0) throw UsageError("parse_poly: negative exponent is not polynomial");
      return expr_to_poly_rec(e->lhs, vars, classify).pow(e->exponent);
    }
    case NodeKind::Div: {
      const Poly den = expr_to_poly_rec(e->rhs, vars, classify);
      if (den.term_count() != 1 || !den.terms().begin()->first.empty())
        throw UsageError("parse_poly: division only by numeric literals");
      return expr_to_poly_rec(e->lhs, vars, classify) *
             (Rational(1) / den.terms().begin()->second);
    }
    case NodeKind::Diff: {
      if (e->rhs->kind != NodeKind::Atom)
        throw UsageError("parse_poly: D denominator must be an atom");
      if (classify(print_expr(e->rhs)) != VarClass::Time)
        throw UsageError("parse_poly: only time derivatives are polynomial");
      return expr_to_poly_rec(e->lhs, vars, classify).total_derivative();
    }
    default:
      throw UsageError("parse_poly: unsupported node in polynomial context");
  }
}

}  // namespace

Poly parse_poly(const std::string& text, VarTable& vars,
                const std::function<VarClass(const std::string&)>& classify) {
  return expr_to_poly_rec(parse_expr(text), vars, classify);
}

}  // namespace physlaw
