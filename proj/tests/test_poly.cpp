#include <doctest.h>

#include "physlaw/measured.hpp"
#include "physlaw/poly.hpp"
#include "physlaw/rng.hpp"

#include <cmath>

using namespace physlaw;

namespace {

struct Ring {
  VarTable vars;
  int x, y, t, m;
  Ring() {
    t = vars.add("t", VarClass::Time);
    x = vars.add("x", VarClass::Dependent);
    y = vars.add("y", VarClass::Dependent);
    m = vars.add("m", VarClass::Constant);
  }
  Poly X(int order = 0) { return Poly::variable(&vars, make_indet(vars, x, order)); }
  Poly Y(int order = 0) { return Poly::variable(&vars, make_indet(vars, y, order)); }
  Poly T() { return Poly::variable(&vars, make_indet(vars, t, 0)); }
  Poly M() { return Poly::variable(&vars, make_indet(vars, m, 0)); }
  Poly C(long v) { return Poly::constant(&vars, Rational(v)); }
};

}  // namespace

TEST_CASE("rationalize recovers simple fractions by continued fractions") {
  CHECK(rationalize(0.5) == Rational(1, 2));
  CHECK(rationalize(0.4999987, 1e-4) == Rational(1, 2));
  CHECK(rationalize(-2.0 / 3.0) == Rational(-2, 3));
  CHECK(rationalize(3.0) == Rational(3));
  CHECK(rationalize(0.0) == Rational(0));
  // round-trip text form
  CHECK(parse_rational(rational_to_string(Rational(-7, 3))) == Rational(-7, 3));
}

TEST_CASE("polynomial arithmetic and ordering") {
  Ring r;
  const Poly p = r.X() * r.X() + r.Y() * r.C(3) - r.C(1);
  const Poly q = r.X() * r.X();
  CHECK((p - p).is_zero());
  CHECK((p + q).degree_in(make_indet(r.vars, r.x, 0)) == 2);
  const Poly prod = (r.X() + r.Y()) * (r.X() - r.Y());
  CHECK(prod == r.X() * r.X() - r.Y() * r.Y());
  CHECK(prod.to_string() == "-y^2 + x^2");  // y outranks x in the ranking
}

TEST_CASE("leader, initial and separant under the orderly ranking") {
  Ring r;
  // m*x''^2 + x'*y - 1: leader x'' (highest order), initial m, separant 2m*x''
  const Poly p = r.M() * r.X(2) * r.X(2) + r.X(1) * r.Y() - r.C(1);
  const Indet lead = p.leader();
  CHECK(lead.var == r.x);
  CHECK(lead.order == 2);
  CHECK(p.initial() == r.M());
  CHECK(p.separant() == r.M() * r.X(2) * r.C(2));
  // constants never become leaders
  const Poly ground = r.M() * r.M() - r.C(4);
  CHECK(ground.is_ground());
  CHECK_THROWS_AS(ground.leader(), UsageError);
  // dependents outrank time
  const Poly mix = r.T() * r.T() + r.X();
  CHECK(mix.leader().var == r.x);
}

TEST_CASE("total derivative prolongs dependents, kills constants, d t = 1") {
  Ring r;
  // d/dt (x^2) = 2 x x'
  CHECK((r.X() * r.X()).total_derivative() == r.C(2) * r.X() * r.X(1));
  // d/dt (m x) = m x'
  CHECK((r.M() * r.X()).total_derivative() == r.M() * r.X(1));
  // d/dt (t^2) = 2t
  CHECK(r.T().pow(2).total_derivative() == r.C(2) * r.T());
  // d/dt (x' y) = x'' y + x' y'
  CHECK((r.X(1) * r.Y()).total_derivative() == r.X(2) * r.Y() + r.X(1) * r.Y(1));
  CHECK(r.M().total_derivative().is_zero());
}

TEST_CASE("primitive form strips content and fixes sign") {
  Ring r;
  const Poly p = r.X() * Rational(-4, 6) + r.C(2) * r.Y() * Rational(1, 3);
  const Poly prim = p.primitive();
  // -2/3 x + 2/3 y -> primitive: y - x (leading term y, positive coefficient)
  CHECK(prim == r.Y() - r.X());
  CHECK(prim.primitive() == prim);
}

TEST_CASE("numeric evaluation matches a hand-computed oracle") {
  Ring r;
  const Poly p = r.M() * r.X(1) * r.X(1) - r.Y() * r.C(3);
  auto point = [&](const Indet& v) -> double {
    if (v.var == r.m) return 2.0;
    if (v.var == r.x && v.order == 1) return 1.5;
    if (v.var == r.y && v.order == 0) return 0.25;
    return 0.0;
  };
  CHECK(p.eval(point) == doctest::Approx(2.0 * 1.5 * 1.5 - 0.75));
}

TEST_CASE("parse_poly reads the DSL grammar restricted to polynomials") {
  VarTable vars;
  auto classify = [](const std::string& name) {
    if (name == "t") return VarClass::Time;
    if (name == "m" || name == "k") return VarClass::Constant;
    return VarClass::Dependent;
  };
  const Poly p = parse_poly("m * D[D[x]/D[t]]/D[t] + k * x", vars, classify);
  const int x = vars.find("x");
  REQUIRE(x >= 0);
  CHECK(p.degree_in(make_indet(vars, x, 2)) == 1);
  CHECK(p.leader() == make_indet(vars, x, 2));
  // time derivative through products: D[x**2]/D[t] = 2 x x'
  const Poly q = parse_poly("D[x**2]/D[t]", vars, classify);
  CHECK(q == parse_poly("2 * x * D[x]/D[t]", vars, classify));
  CHECK_THROWS_AS(parse_poly("x**-1", vars, classify), UsageError);
}

TEST_CASE("rational functions: arithmetic and cross-multiplied equality") {
  Ring r;
  const RationalFn x{r.X()};
  const RationalFn y{r.Y()};
  const RationalFn one{r.C(1)};
  // x/y + y/x = (x^2+y^2)/(xy)
  const RationalFn s = x / y + y / x;
  const RationalFn expect{r.X() * r.X() + r.Y() * r.Y(), r.X() * r.Y()};
  CHECK(s.equals(expect));
  // unreduced representations compare equal: (x^2-y^2)/(x-y) == x+y
  const RationalFn lhs{r.X() * r.X() - r.Y() * r.Y(), r.X() - r.Y()};
  const RationalFn rhs = x + y;
  CHECK(lhs.equals(rhs));
  CHECK_FALSE(lhs.equals(x));
  // negative powers invert
  CHECK(x.pow(-2).equals(one / (x * x)));
  // partial derivative of x/y in y is -x/y^2
  const RationalFn d = (x / y).partial(make_indet(r.vars, r.y, 0));
  CHECK(d.equals(-(x / (y * y))));
  CHECK_THROWS_AS(x / RationalFn(r.C(0)), UsageError);
}

TEST_CASE("deterministic polynomial comparison is a total order") {
  Ring r;
  Rng rng(17);
  std::vector<Poly> ps = {r.X(), r.Y(), r.X() + r.Y(), r.X() * r.Y(), r.C(5), r.X(1)};
  for (const Poly& a : ps)
    for (const Poly& b : ps) {
      const int ab = Poly::compare(a, b);
      const int ba = Poly::compare(b, a);
      CHECK(ab == -ba);
      if (&a == &b) CHECK(ab == 0);
    }
}
