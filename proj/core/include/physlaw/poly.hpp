#pragma once

#include "physlaw/rational.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace physlaw {

// Variable classes of the differential-polynomial ring:
//   Constant:  symbolic parameter, zero derivative (masses, g, c_x, ...)
//   Time:      the derivation variable, d(t)/dt = 1
//   Dependent: u_j(t), prolongable to u_j', u_j'', ...
// The class participates in the orderly ranking so that dependents always
// outrank time and constants.
enum class VarClass : uint8_t { Constant = 0, Time = 1, Dependent = 2 };

class VarTable {
 public:
  int add(const std::string& name, VarClass cls);
  int find(const std::string& name) const;  // -1 when absent
  int find_or_add(const std::string& name, VarClass cls);
  VarClass var_class(int id) const;
  const std::string& name(int id) const;
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    std::string name;
    VarClass cls;
  };
  std::vector<Entry> entries_;
  std::map<std::string, int> index_;
};

// Derivative indeterminate: the order-th derivative of a variable. Ordered by
// the orderly ranking (class, order, variable id).
struct Indet {
  VarClass cls = VarClass::Dependent;
  int var = 0;
  int order = 0;

  bool operator==(const Indet&) const = default;
  bool operator<(const Indet& o) const {
    if (cls != o.cls) return cls < o.cls;
    if (order != o.order) return order < o.order;
    return var < o.var;
  }
};

// Sparse multivariate polynomial with exact rational coefficients over
// derivative indeterminates, kept in lex order induced by the ranking.
class Poly {
 public:
  // (indet, exponent>0) pairs sorted descending by rank
  using Monomial = std::vector<std::pair<Indet, int>>;

  Poly() = default;
  explicit Poly(const VarTable* vars) : vars_(vars) {}
  static Poly constant(const VarTable* vars, Rational c);
  static Poly variable(const VarTable* vars, Indet v);

  const VarTable* vars() const { return vars_; }
  bool is_zero() const { return terms_.empty(); }
  bool is_ground() const;  // free of dependent/time indeterminates
  std::size_t term_count() const { return terms_.size(); }

  Poly operator-() const;
  Poly operator+(const Poly& o) const;
  Poly operator-(const Poly& o) const;
  Poly operator*(const Poly& o) const;
  Poly& operator+=(const Poly& o);
  Poly& operator-=(const Poly& o);
  Poly operator*(const Rational& c) const;
  Poly pow(int e) const;  // e >= 0

  bool operator==(const Poly& o) const { return terms_ == o.terms_; }

  // Highest-ranked indeterminate; throws UsageError on zero or pure-constant
  // polynomials that have no ranked indeterminate at all.
  Indet leader() const;
  int degree_in(const Indet& v) const;
  Poly coefficient_of(const Indet& v, int k) const;
  Poly initial() const;   // coefficient of leader^deg
  Poly separant() const;  // d/d(leader)

  // Formal total time derivative, extended by the Leibniz rule.
  Poly total_derivative() const;
  Poly partial_derivative(const Indet& v) const;

  // Content-free representative with positive leading coefficient.
  Poly primitive() const;
  Rational leading_coefficient() const;

  double eval(const std::function<double(const Indet&)>& point) const;
  Poly substituted(const Indet& v, const Poly& replacement) const;

  std::string to_string() const;

  // Deterministic total order (by term sequences); 0 on equality.
  static int compare(const Poly& a, const Poly& b);

  const std::map<Monomial, Rational>& terms() const { return terms_; }
  void add_term(const Monomial& m, const Rational& c);

 private:
  const VarTable* vars_ = nullptr;
  std::map<Monomial, Rational> terms_;
};

// Indet factory from a registered variable.
Indet make_indet(const VarTable& vars, int var_id, int order = 0);

// Quotient of polynomials. No gcd cancellation is attempted; equality is
// decided by cross-multiplication, which stays exact. Normalized so that the
// denominator is content-free with a positive leading coefficient.
struct RationalFn {
  Poly num, den;

  RationalFn() : den(Poly::constant(nullptr, 1)) {}
  RationalFn(Poly n, Poly d);
  explicit RationalFn(Poly n);
  static RationalFn constant(const VarTable* vars, const Rational& c);

  bool is_zero() const { return num.is_zero(); }

  RationalFn operator+(const RationalFn& o) const;
  RationalFn operator-(const RationalFn& o) const;
  RationalFn operator*(const RationalFn& o) const;
  RationalFn operator/(const RationalFn& o) const;
  RationalFn operator-() const;
  RationalFn pow(int e) const;  // any integer exponent

  bool equals(const RationalFn& o) const;  // exact, cross-multiplied
  double eval(const std::function<double(const Indet&)>& point) const;
  // Partial derivative with respect to an order-0 indeterminate.
  RationalFn partial(const Indet& v) const;
  // Formal total time derivative (quotient rule).
  RationalFn total_derivative() const;

  std::string to_string() const;
};

// Parses a polynomial from the expression grammar restricted to + - * ** and
// D[.]/D[t] chains over atoms and numbers; atoms are registered in the table
// with the class returned by the callback.
Poly parse_poly(const std::string& text, VarTable& vars,
                const std::function<VarClass(const std::string&)>& classify);

}  // namespace physlaw
