#include <doctest.h>

#include "physlaw/diffalg.hpp"
#include "physlaw/measured.hpp"
#include "physlaw/rng.hpp"

#include <cmath>

using namespace physlaw;

namespace {

struct Ring {
  VarTable vars;
  int x, y, t, c;
  Ring() {
    t = vars.add("t", VarClass::Time);
    x = vars.add("x", VarClass::Dependent);
    y = vars.add("y", VarClass::Dependent);
    c = vars.add("c", VarClass::Constant);
  }
  Poly X(int order = 0) { return Poly::variable(&vars, make_indet(vars, x, order)); }
  Poly Y(int order = 0) { return Poly::variable(&vars, make_indet(vars, y, order)); }
  Poly C(long v) { return Poly::constant(&vars, Rational(v)); }
  Poly K() { return Poly::variable(&vars, make_indet(vars, c, 0)); }
};

}  // namespace

TEST_CASE("self-reduction gives zero") {
  Ring r;
  const Poly osc = r.X(2) + r.X();  // x'' + x
  CHECK(ritt_reduce(osc, {osc}).is_zero());
}

TEST_CASE("prolongations reduce derivatives of members to zero") {
  Ring r;
  const Poly osc = r.X(2) + r.X();
  // oracle: the symbolic total derivative of x''+x is exactly x'''+x'
  CHECK(osc.total_derivative() == r.X(3) + r.X(1));
  CHECK(ritt_reduce(r.X(3) + r.X(1), {osc}).is_zero());
  // second prolongation as well
  CHECK(ritt_reduce(r.X(4) + r.X(2), {osc}).is_zero());
}

TEST_CASE("independent equation leaves a nonzero remainder") {
  Ring r;
  const Poly osc = r.X(2) + r.X();
  // pseudo-remainder oracle: (x''+2x) - (x''+x) = x
  const Poly rem = ritt_reduce(r.X(2) + r.C(2) * r.X(), {osc});
  CHECK(rem == r.X());
}

TEST_CASE("reduction steps strictly descend in the ranking") {
  Ring r;
  const Poly member = r.X(1) - r.K();  // x' = c
  const Poly p = r.X(3) * r.X(3) + r.X(2) + r.X(1) * r.X();
  std::vector<ReductionStep> trace;
  ritt_reduce(p, {member}, &trace);
  REQUIRE(trace.size() >= 2);
  for (std::size_t i = 1; i < trace.size(); ++i) {
    const bool descended = trace[i].target < trace[i - 1].target ||
                           (trace[i].target == trace[i - 1].target &&
                            trace[i].degree < trace[i - 1].degree);
    CHECK(descended);
  }
}

TEST_CASE("autoreduce drops scalar multiples and prolongation shadows") {
  Ring r;
  const Poly p = r.X(2) + r.X();
  SUBCASE("scalar multiple") {
    const CharSet s = autoreduce({p, p * Rational(2)});
    REQUIRE(s.size() == 1);
    CHECK(s[0] == p.primitive());
  }
  SUBCASE("x'' reduces away against x' - c") {
    const CharSet s = autoreduce({r.X(1) - r.K(), r.X(2)});
    REQUIRE(s.size() == 1);
    CHECK(s[0] == (r.X(1) - r.K()).primitive());
  }
  SUBCASE("idempotence") {
    const CharSet once = autoreduce({p, r.Y(1) - r.C(2)});
    const CharSet twice = autoreduce({once.begin(), once.end()});
    CHECK(once == twice);
  }
}

TEST_CASE("minimal representation prunes prolongations and combinations") {
  Ring r;
  SUBCASE("derivative of a member is redundant") {
    const Poly a = r.X(2) + r.X();
    const Poly b = r.X(3) + r.X(1);
    const auto m = minimal_representation({{b, 5}, {a, 3}});
    REQUIRE(m.size() == 1);
    CHECK(m[0] == a);
  }
  SUBCASE("independent equations are all kept") {
    const Poly a = r.X(1) - r.C(1);
    const Poly b = r.Y(1) - r.C(2);
    const auto m = minimal_representation({{a, 3}, {b, 3}});
    CHECK(m.size() == 2);
  }
  SUBCASE("linear combination of simpler members is dropped") {
    const Poly p = r.X(1) - r.C(1);
    const Poly q = r.Y(2) + r.Y();
    const Poly sum = p + q;  // most complex by construction
    const auto m = minimal_representation({{p, 3}, {q, 3}, {sum, 6}});
    REQUIRE(m.size() == 2);
    CHECK(ritt_reduce(sum, autoreduce({m[0], m[1]})).is_zero());
  }
  SUBCASE("output is idempotent") {
    const Poly a = r.X(2) + r.X();
    const Poly b = r.Y(1) - r.K();
    std::vector<std::pair<Poly, int>> in = {{a, 4}, {b, 3}};
    const auto m1 = minimal_representation(in);
    std::vector<std::pair<Poly, int>> again;
    for (const Poly& p : m1) again.emplace_back(p, 3);
    const auto m2 = minimal_representation(again);
    CHECK(m1.size() == m2.size());
  }
}

TEST_CASE("equal-complexity permutations generate the same ideal") {
  Ring r;
  const Poly p = r.X(1) - r.C(1);
  const Poly q = r.X(1) * r.C(2) - r.Y(1);
  const auto m1 = minimal_representation({{p, 4}, {q, 4}});
  const auto m2 = minimal_representation({{q, 4}, {p, 4}});
  // cross-reduction: every member of one output reduces to zero against the other
  const CharSet c1 = autoreduce({m1.begin(), m1.end()});
  const CharSet c2 = autoreduce({m2.begin(), m2.end()});
  for (const Poly& a : m1) CHECK(ritt_reduce(a, c2).is_zero());
  for (const Poly& b : m2) CHECK(ritt_reduce(b, c1).is_zero());
}

TEST_CASE("soundness: zero-reductions vanish on simulated trajectories") {
  Ring r;
  // members: x'' + x = 0 with solutions x = A sin t + B cos t
  const Poly member = r.X(2) + r.X();
  const CharSet cs = autoreduce({member});
  // candidates that reduce to zero must vanish numerically on solutions
  const std::vector<Poly> zero_reduced = {
      r.X(3) + r.X(1),
      (r.X(2) + r.X()) * r.X(1),
      r.X(4) - r.X(),  // x'''' = -x'' = x
  };
  Rng rng(31);
  for (const Poly& p : zero_reduced) {
    REQUIRE(ritt_reduce(p, cs).is_zero());
    for (int trial = 0; trial < 20; ++trial) {
      const double A = rng.normal(0, 1), B = rng.normal(0, 1), tt = rng.normal(0, 2);
      auto point = [&](const Indet& v) -> double {
        if (v.cls == VarClass::Time) return tt;
        if (v.var != r.x) return 0.0;
        // d^k/dt^k (A sin t + B cos t)
        switch (v.order % 4) {
          case 0: return A * std::sin(tt) + B * std::cos(tt);
          case 1: return A * std::cos(tt) - B * std::sin(tt);
          case 2: return -A * std::sin(tt) - B * std::cos(tt);
          default: return -A * std::cos(tt) + B * std::sin(tt);
        }
      };
      CHECK(std::abs(p.eval(point)) < 1e-6);
    }
  }
  // a non-member does not reduce to zero and does not vanish
  const Poly indep = r.X(2) + r.C(2) * r.X();
  CHECK_FALSE(ritt_reduce(indep, cs).is_zero());
}

TEST_CASE("general-law redundancy over per-experiment bases") {
  Ring r;
  const Poly energy = r.X(1) * r.X(1) + r.X() * r.X();  // v^2 + x^2 conserved
  const Poly d_energy = energy.total_derivative();
  std::map<std::string, CharSet> basis;
  basis["osc"] = autoreduce({d_energy});
  // the time-derivative of a stored conservation law is redundant
  std::map<std::string, std::vector<Poly>> cand1;
  cand1["osc"] = {d_energy};
  CHECK(reduce_general_law(cand1, basis) == Redundancy::Redundant);
  // a genuinely new relation is novel
  std::map<std::string, std::vector<Poly>> cand2;
  cand2["osc"] = {r.X(1) - r.K()};
  CHECK(reduce_general_law(cand2, basis) == Redundancy::Novel);
}
