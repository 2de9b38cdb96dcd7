#include <doctest.h>

#include "physlaw/geometry.hpp"
#include "physlaw/measured.hpp"
#include "physlaw/rng.hpp"

#include <cmath>

using namespace physlaw;

namespace {

struct Slope {
  VarTable vars;
  int x, y, z, m, g;
  ConstraintSystem cs;
  RationalFn f;  // gravitational potential m g z

  Slope() {
    x = vars.add("x", VarClass::Dependent);
    y = vars.add("y", VarClass::Dependent);
    z = vars.add("z", VarClass::Dependent);
    m = vars.add("m", VarClass::Constant);
    g = vars.add("g", VarClass::Constant);
    const Poly h = P(x) + P(y) + P(z);
    cs = classify_constraints({h}, {x, y, z}, {}, vars);
    f = RationalFn(P(m) * P(g) * P(z));
  }
  Poly P(int id) { return Poly::variable(&vars, make_indet(vars, id, 0)); }
};

struct SpringOnPlane {
  VarTable vars;
  int x, y, z, L, m, g, k, L0, cx, cy, cz;
  ConstraintSystem cs;

  SpringOnPlane() {
    x = vars.add("x", VarClass::Dependent);
    y = vars.add("y", VarClass::Dependent);
    z = vars.add("z", VarClass::Dependent);
    L = vars.add("L", VarClass::Dependent);
    m = vars.add("m", VarClass::Constant);
    g = vars.add("g", VarClass::Constant);
    k = vars.add("k", VarClass::Constant);
    L0 = vars.add("L0", VarClass::Constant);
    cx = vars.add("cx", VarClass::Constant);
    cy = vars.add("cy", VarClass::Constant);
    cz = vars.add("cz", VarClass::Constant);
    const Poly plane = P(cx) * P(x) + P(cy) * P(y) + P(cz) * P(z);
    const Poly spring = P(L) * P(L) - P(x) * P(x) - P(y) * P(y) - P(z) * P(z);
    cs = classify_constraints({plane, spring}, {x, y, z}, {L}, vars);
  }
  Poly P(int id) { return Poly::variable(&vars, make_indet(vars, id, 0)); }
};

}  // namespace

TEST_CASE("slope example: -Dv(mgz) = mg/3 (dx + dy - 2dz) exactly") {
  Slope s;
  REQUIRE(s.cs.size() == 1);
  CHECK(s.cs.types[0] == ConstraintType::First);
  // reference vector is the gradient direction d/dx + d/dy + d/dz
  REQUIRE(s.cs.refs[0].comps.size() == 3);
  for (const auto& [v, c] : s.cs.refs[0].comps)
    CHECK(c.equals(RationalFn(Poly::constant(&s.vars, 1))));

  const DifferentialForm grad = constrained_gradient(s.f, s.cs);
  const RationalFn mg{s.P(s.m) * s.P(s.g)};
  const RationalFn third{Poly::constant(&s.vars, Rational(1, 3))};
  // -Dv f has components (mg/3, mg/3, -2mg/3)
  REQUIRE(grad.coeffs.count(s.x));
  CHECK((-grad.coeffs.at(s.x)).equals(mg * third));
  CHECK((-grad.coeffs.at(s.y)).equals(mg * third));
  CHECK((-grad.coeffs.at(s.z)).equals(-(mg * third * RationalFn(Poly::constant(&s.vars, 2)))));
}

TEST_CASE("no constraints: gradient reduces to the plain differential") {
  Slope s;
  const ConstraintSystem empty = classify_constraints({}, {s.x, s.y, s.z}, {}, s.vars);
  const DifferentialForm grad = constrained_gradient(s.f, empty);
  REQUIRE(grad.coeffs.size() == 1);
  CHECK(grad.coeffs.at(s.z).equals(RationalFn(s.P(s.m) * s.P(s.g))));
}

TEST_CASE("spring constraint between two balls is second-type in the length") {
  VarTable vars;
  const int x1 = vars.add("x1", VarClass::Dependent);
  const int x2 = vars.add("x2", VarClass::Dependent);
  const int l = vars.add("l", VarClass::Dependent);
  auto P = [&](int id) { return Poly::variable(&vars, make_indet(vars, id, 0)); };
  const Poly h = P(l) - P(x2) + P(x1);
  const ConstraintSystem cs = classify_constraints({h}, {x1, x2}, {l}, vars);
  REQUIRE(cs.size() == 1);
  CHECK(cs.types[0] == ConstraintType::Second);
  CHECK(cs.second_var[0] == l);
}

TEST_CASE("annihilation: Dv h = 0 and <v, Dv f> = 0 symbolically") {
  SpringOnPlane s;
  REQUIRE(s.cs.size() == 2);
  // every original constraint has vanishing constrained gradient
  for (const Poly& h : s.cs.constraints) {
    const DifferentialForm dh = constrained_gradient(RationalFn(h), s.cs);
    CHECK(dh.symbolically_zero());
  }
  // <v_i, Dv f> = 0 for a generic polynomial f
  const RationalFn f{s.P(s.m) * s.P(s.g) * s.P(s.z) + s.P(s.k) * s.P(s.L) * s.P(s.L) +
                     s.P(s.x) * s.P(s.y)};
  const DifferentialForm grad = constrained_gradient(f, s.cs);
  for (const auto& v : s.cs.refs) {
    RationalFn pairing;
    for (const auto& [var, comp] : v.comps) {
      auto it = grad.coeffs.find(var);
      if (it != grad.coeffs.end()) pairing = pairing + comp * it->second;
    }
    CHECK(pairing.is_zero());
  }
}

TEST_CASE("linearity and Leibniz hold symbolically on random polynomials") {
  SpringOnPlane s;
  Rng rng(12);
  auto random_poly = [&]() {
    Poly p = Poly::constant(&s.vars, Rational(static_cast<long>(rng.uniform_int(-3, 3))));
    const std::vector<int> ids = {s.x, s.y, s.z, s.L, s.m};
    for (int t = 0; t < 3; ++t) {
      Poly mono = Poly::constant(&s.vars, Rational(static_cast<long>(rng.uniform_int(1, 4))));
      for (int f = 0; f < 2; ++f)
        mono = mono * s.P(ids[static_cast<std::size_t>(rng.uniform_int(0, 4))]);
      p += mono;
    }
    return p;
  };
  for (int rep = 0; rep < 10; ++rep) {
    const RationalFn f1{random_poly()};
    const RationalFn f2{random_poly()};
    const RationalFn c = RationalFn::constant(&s.vars, Rational(3, 2));
    // Dv(f1 + f2) = Dv f1 + Dv f2
    CHECK(constrained_gradient(f1 + f2, s.cs)
              .equals(constrained_gradient(f1, s.cs) + constrained_gradient(f2, s.cs)));
    // Dv(c f) = c Dv f
    CHECK(constrained_gradient(c * f1, s.cs)
              .equals(constrained_gradient(f1, s.cs).scaled(c)));
    // Leibniz: Dv(f1 f2) = f1 Dv f2 + f2 Dv f1
    const DifferentialForm lhs = constrained_gradient(f1 * f2, s.cs);
    const DifferentialForm rhs =
        constrained_gradient(f2, s.cs).scaled(f1) + constrained_gradient(f1, s.cs).scaled(f2);
    CHECK(lhs.equals(rhs));
  }
}

TEST_CASE("inclined-plane spring system reproduces the published x-equation structure") {
  SpringOnPlane s;
  // potential: m g z + (k/2)(L - L0)^2
  const Poly dl = s.P(s.L) - s.P(s.L0);
  const RationalFn f{s.P(s.m) * s.P(s.g) * s.P(s.z) + dl * dl * s.P(s.k) * Rational(1, 2)};
  const DifferentialForm grad = constrained_gradient(f, s.cs);

  // expected x-component:
  //   -cx cz m g / C + k (L-L0) ((cy^2+cz^2) x - cx (cy y + cz z)) / (C L)
  const Poly C = s.P(s.cx) * s.P(s.cx) + s.P(s.cy) * s.P(s.cy) + s.P(s.cz) * s.P(s.cz);
  const RationalFn grav{-(s.P(s.cx) * s.P(s.cz) * s.P(s.m) * s.P(s.g)), C};
  const Poly spring_num =
      (s.P(s.cy) * s.P(s.cy) + s.P(s.cz) * s.P(s.cz)) * s.P(s.x) -
      s.P(s.cx) * (s.P(s.cy) * s.P(s.y) + s.P(s.cz) * s.P(s.z));
  const RationalFn spring{s.P(s.k) * dl * spring_num, C * s.P(s.L)};
  REQUIRE(grad.coeffs.count(s.x));
  CHECK(grad.coeffs.at(s.x).equals(grav + spring));

  // the dL component must vanish: second-type reference kills the u direction
  const auto itL = grad.coeffs.find(s.L);
  CHECK((itL == grad.coeffs.end() || itL->second.is_zero()));
}

TEST_CASE("substitution invariance at on-manifold points") {
  SpringOnPlane s;
  Rng rng(77);
  const Poly dl = s.P(s.L) - s.P(s.L0);
  const RationalFn f{s.P(s.m) * s.P(s.g) * s.P(s.z) + dl * dl * s.P(s.k) * Rational(1, 2)};
  const DifferentialForm base = constrained_gradient(f, s.cs);

  for (int rep = 0; rep < 100; ++rep) {
    // random smooth multipliers alpha_k(X)
    auto random_alpha = [&]() {
      return RationalFn(Poly::constant(&s.vars, Rational(static_cast<long>(rng.uniform_int(-2, 2)))) +
                        s.P(s.x) * Rational(static_cast<long>(rng.uniform_int(-2, 2))) +
                        s.P(s.L) * Rational(static_cast<long>(rng.uniform_int(-2, 2))));
    };
    const RationalFn a1 = random_alpha();
    const RationalFn a2 = random_alpha();
    const RationalFn f_tilde = f + a1 * RationalFn(s.cs.constraints[0]) +
                               a2 * RationalFn(s.cs.constraints[1]);
    const DifferentialForm tilted = constrained_gradient(f_tilde, s.cs);

    // sample a configuration on the manifold: plane normal (1,2,3) via the
    // symbolic constants, position in-plane, L = |r|
    const double ncx = 1.0, ncy = 2.0, ncz = 3.0;
    double px = rng.normal(0, 1), py = rng.normal(0, 1);
    double pz = -(ncx * px + ncy * py) / ncz;
    const double pl = std::sqrt(px * px + py * py + pz * pz) + 1e-12;
    auto point = [&](const Indet& v) -> double {
      if (v.var == s.x) return px;
      if (v.var == s.y) return py;
      if (v.var == s.z) return pz;
      if (v.var == s.L) return pl;
      if (v.var == s.m) return 1.3;
      if (v.var == s.g) return 9.8;
      if (v.var == s.k) return 2.5;
      if (v.var == s.L0) return 0.4;
      if (v.var == s.cx) return ncx;
      if (v.var == s.cy) return ncy;
      if (v.var == s.cz) return ncz;
      return 0.0;
    };
    if (s.cs.det_at(point) < 1e-9) continue;  // skip degenerate draws
    for (const int var : {s.x, s.y, s.z, s.L}) {
      const auto ib = base.coeffs.find(var);
      const auto it = tilted.coeffs.find(var);
      const double vb = ib == base.coeffs.end() ? 0.0 : ib->second.eval(point);
      const double vt = it == tilted.coeffs.end() ? 0.0 : it->second.eval(point);
      CHECK(std::abs(vb - vt) <= 1e-9 * std::max(1.0, std::abs(vb)));
    }
  }
}

TEST_CASE("numeric gradient agrees with the symbolic path") {
  SpringOnPlane s;
  const Poly dl = s.P(s.L) - s.P(s.L0);
  const RationalFn f{s.P(s.m) * s.P(s.g) * s.P(s.z) + dl * dl * s.P(s.k) * Rational(1, 2)};
  const DifferentialForm grad = constrained_gradient(f, s.cs);
  const double px = 0.3, py = -0.5;
  const double pz = -(1.0 * px + 2.0 * py) / 3.0;
  const double pl = std::sqrt(px * px + py * py + pz * pz);
  auto point = [&](const Indet& v) -> double {
    if (v.var == s.x) return px;
    if (v.var == s.y) return py;
    if (v.var == s.z) return pz;
    if (v.var == s.L) return pl;
    if (v.var == s.m) return 1.0;
    if (v.var == s.g) return 9.8;
    if (v.var == s.k) return 4.0;
    if (v.var == s.L0) return 0.2;
    if (v.var == s.cx) return 1.0;
    if (v.var == s.cy) return 2.0;
    if (v.var == s.cz) return 3.0;
    return 0.0;
  };
  const auto numeric = numeric_gradient(f, s.cs, point);
  for (const int var : {s.x, s.y, s.z, s.L}) {
    const auto is = grad.coeffs.find(var);
    const double sym = is == grad.coeffs.end() ? 0.0 : is->second.eval(point);
    const auto in = numeric.find(var);
    const double num = in == numeric.end() ? 0.0 : in->second;
    CHECK(sym == doctest::Approx(num).epsilon(1e-9));
  }
}

TEST_CASE("degenerate geometry raises errors naming the constraint") {
  VarTable vars;
  const int x = vars.add("x", VarClass::Dependent);
  const int y = vars.add("y", VarClass::Dependent);
  auto P = [&](int id) { return Poly::variable(&vars, make_indet(vars, id, 0)); };
  // duplicated plane: second row eliminates to zero
  CHECK_THROWS_AS(
      classify_constraints({P(x) + P(y), P(x) + P(y)}, {x, y}, {}, vars),
      GeometryError);
  // fully constrained: as many independent cartesian constraints as coordinates
  CHECK_THROWS_AS(
      classify_constraints({P(x) + P(y), P(x) - P(y)}, {x, y}, {}, vars),
      GeometryError);
}
