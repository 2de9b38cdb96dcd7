#include <doctest.h>

#include "physlaw/kb.hpp"
#include "physlaw/parser.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace physlaw;

namespace {

// Registers the standard ladder of concepts used across these tests:
// velocity, acceleration, the free-spring rest length, and the two mass
// definition paths (spring elongation vs oscillation response).
struct Ladder {
  std::string v, vy, a, L0;
  void base(KnowledgeBase& kb) {
    v = kb.register_concept(parse_concept("concept X := forall i: Ball, D[posx[i]]/D[t]"))
            .symbol;
    ConceptDef vyc = parse_concept("concept X := forall i: Ball, D[posy[i]]/D[t]");
    vyc.symbol.clear();
    vy = kb.register_concept(vyc).symbol;
    ConceptDef acc = parse_concept("concept X := forall i: Ball, D[" + v + "[i]]/D[t]");
    acc.symbol.clear();
    a = kb.register_concept(acc).symbol;
    ConceptDef l0 = parse_concept(
        "concept X := forall s: Spring, Intrinsic[free_spring(spring1 -> s), length[s]]");
    l0.symbol.clear();
    L0 = kb.register_concept(l0).symbol;
  }
  ConceptDef grav_mass() const {
    ConceptDef c = parse_concept(
        "concept X := forall i: Ball, Intrinsic[spring_ball_vertical(ball1 -> i, spring1 -> "
        "s), length[s] - " + L0 + "[s]]");
    c.symbol.clear();
    return c;
  }
  ConceptDef inertial_mass() const {
    ConceptDef c = parse_concept(
        "concept X := forall i: Ball, Intrinsic[spring_ball_horizontal(ball1 -> i, spring1 "
        "-> s), (0 - (length[s] - " + L0 + "[s])) / " + a + "[i]]");
    c.symbol.clear();
    return c;
  }
};

ConceptDef anonymous(const std::string& text) {
  ConceptDef c = parse_concept(text);
  c.symbol.clear();
  return c;
}

}  // namespace

TEST_CASE("registering velocity into an empty KB adds C01") {
  KnowledgeBase kb;
  const auto r =
      kb.register_concept(anonymous("concept X := forall i: Ball, D[posx[i]]/D[t]"));
  CHECK(r.outcome == RegisterOutcome::Added);
  CHECK(r.symbol == "C01");
  REQUIRE(kb.find_concept("C01") != nullptr);
  CHECK(kb.find_concept("C01")->kind == ConceptKind::Dynamical);
}

TEST_CASE("gravitational and inertial mass definitions deduplicate") {
  KnowledgeBase kb;
  Ladder lad;
  lad.base(kb);
  const auto grav = kb.register_concept(lad.grav_mass());
  REQUIRE(grav.outcome == RegisterOutcome::Added);
  const auto inert = kb.register_concept(lad.inertial_mass());
  CHECK(inert.outcome == RegisterOutcome::Duplicate);
  CHECK(inert.symbol == grav.symbol);
}

TEST_CASE("dedup is symmetric in registration order") {
  KnowledgeBase kb;
  Ladder lad;
  lad.base(kb);
  const auto inert = kb.register_concept(lad.inertial_mass());
  REQUIRE(inert.outcome == RegisterOutcome::Added);
  const auto grav = kb.register_concept(lad.grav_mass());
  CHECK(grav.outcome == RegisterOutcome::Duplicate);
  CHECK(grav.symbol == inert.symbol);
}

TEST_CASE("a scaled copy of a concept is a distinct concept") {
  KnowledgeBase kb;
  const auto v =
      kb.register_concept(anonymous("concept X := forall i: Ball, D[posx[i]]/D[t]"));
  const auto v2 = kb.register_concept(
      anonymous("concept X := forall i: Ball, 2 * (D[posx[i]]/D[t])"));
  CHECK(v2.outcome == RegisterOutcome::Added);
  CHECK(v2.symbol != v.symbol);
  // while an exact re-registration collapses
  const auto again =
      kb.register_concept(anonymous("concept X := forall i: Ball, D[posx[i]]/D[t]"));
  CHECK(again.outcome == RegisterOutcome::Duplicate);
}

TEST_CASE("bodies referencing unknown symbols are rejected") {
  KnowledgeBase kb;
  CHECK_THROWS_AS(
      kb.register_concept(anonymous("concept X := forall i: Ball, ghost[i] * posx[i]")),
      KbError);
}

TEST_CASE("intrinsic measurement doubles when the hidden mass doubles") {
  KnowledgeBase kb;
  Ladder lad;
  lad.base(kb);
  const auto mass = kb.register_concept(lad.grav_mass());
  REQUIRE(mass.outcome == RegisterOutcome::Added);
  const ConceptDef* m = kb.find_concept(mass.symbol);

  PhysObject ball;
  ball.name = "b";
  ball.type = "Ball";
  ball.props["mass"] = 1.0;
  const MeasuredValue m1 = kb.intrinsic_value(*m, ball);
  ball.props["mass"] = 2.0;
  const MeasuredValue m2 = kb.intrinsic_value(*m, ball);
  REQUIRE(m1.is_const());
  REQUIRE(m2.is_const());
  // Hooke's-law oracle: elongation is proportional to the hanging mass
  const double ratio = m2.mean() / m1.mean();
  const double sigma = ratio * std::sqrt(std::pow(m1.std_dev() / m1.mean(), 2) +
                                         std::pow(m2.std_dev() / m2.mean(), 2));
  CHECK(std::abs(ratio - 2.0) <= 3.0 * sigma + 1e-3);
}

TEST_CASE("measurement is memoized per concept and object") {
  KnowledgeBase kb;
  Ladder lad;
  lad.base(kb);
  const auto mass = kb.register_concept(lad.grav_mass());
  const ConceptDef* m = kb.find_concept(mass.symbol);
  PhysObject ball;
  ball.type = "Ball";
  ball.props["mass"] = 1.3;
  const MeasuredValue a = kb.intrinsic_value(*m, ball);
  const MeasuredValue b = kb.intrinsic_value(*m, ball);
  REQUIRE(a.is_const());
  CHECK(a.mean() == b.mean());
  CHECK(a.std_dev() == b.std_dev());
}

TEST_CASE("spring-constant intrinsic orders springs like the hidden stiffness") {
  KnowledgeBase kb;
  Ladder lad;
  lad.base(kb);
  // response ratio -(L - L0)/a measured with the standard ball: value m/k
  ConceptDef kappa = anonymous(
      "concept X := forall s: Spring, Intrinsic[spring_ball_horizontal(spring1 -> s, "
      "ball1 -> b), (0 - (length[s] - " + lad.L0 + "[s])) / " + lad.a + "[b]]");
  const auto reg = kb.register_concept(kappa);
  REQUIRE(reg.outcome == RegisterOutcome::Added);
  const ConceptDef* kc = kb.find_concept(reg.symbol);

  std::vector<double> k_true = {3.2, 4.5, 6.0, 7.5};
  std::vector<double> measured;
  for (double k : k_true) {
    PhysObject spring;
    spring.type = "Spring";
    spring.props["k"] = k;
    spring.props["L0"] = 1.0;
    const MeasuredValue v = kb.intrinsic_value(*kc, spring);
    REQUIRE(v.is_const());
    measured.push_back(v.mean());  // m/k: decreasing in k
  }
  // rank correlation of 1 between 1/measured and k_true
  for (std::size_t i = 1; i < measured.size(); ++i) {
    CHECK(1.0 / measured[i] > 1.0 / measured[i - 1]);
  }
}

TEST_CASE("laws validate on record and reject bad scope") {
  KnowledgeBase kb;
  Ladder lad;
  lad.base(kb);
  const auto mass = kb.register_concept(lad.grav_mass());
  REQUIRE(mass.outcome == RegisterOutcome::Added);
  // kinetic-energy-like summation concept (paper's factor-2 convention)
  ConceptDef kin = anonymous("concept X := sum[i: Ball], " + mass.symbol + "[i] * (" +
                             lad.v + "[i] * " + lad.v + "[i] + " + lad.vy + "[i] * " +
                             lad.vy + "[i])");
  const auto T = kb.register_concept(kin);
  REQUIRE(T.outcome == RegisterOutcome::Added);

  LawDef law;
  law.kind = LawKind::Conserved;
  law.general = true;
  law.subject_concept = T.symbol;
  law.scope = {"collision_1d", "collision_2d"};
  const LawOutcome out = kb.record_law(law);
  CHECK(out.accepted);
  REQUIRE(kb.find_law(out.name) != nullptr);
  CHECK(kb.find_law(out.name)->origins.size() == 2);

  // widening kinetic energy to a spring system fails validation
  const LawOutcome widened = kb.widen_scope(out.name, "spring_ball_horizontal");
  CHECK_FALSE(widened.accepted);
  CHECK(widened.detail == "validation failed in spring_ball_horizontal");
  CHECK(kb.find_law(out.name)->scope.size() == 2);  // unchanged

  // widening into an experiment where it does hold
  const LawOutcome ok = kb.widen_scope(out.name, "uniform_motion");
  CHECK(ok.accepted);
  CHECK(kb.find_law(out.name)->scope.count("uniform_motion") == 1);
}

TEST_CASE("re-proposing a stored general law is redundant") {
  KnowledgeBase kb;
  Ladder lad;
  lad.base(kb);
  const auto mass = kb.register_concept(lad.grav_mass());
  ConceptDef mom = anonymous("concept X := sum[i: Ball], " + mass.symbol + "[i] * " +
                             lad.v + "[i]");
  const auto P = kb.register_concept(mom);
  REQUIRE(P.outcome == RegisterOutcome::Added);

  LawDef law;
  law.kind = LawKind::Conserved;
  law.general = true;
  law.subject_concept = P.symbol;
  law.scope = {"collision_1d", "collision_2d"};
  REQUIRE(kb.record_law(law).accepted);

  // the same conservation proposed again under a new name reduces to zero
  LawDef again = law;
  again.name.clear();
  const LawOutcome out = kb.record_law(again);
  CHECK_FALSE(out.accepted);
  CHECK(out.detail == "redundant against existing general laws");

  // and its formal time-derivative as a Zero law is redundant too
  ConceptDef ddt = anonymous("concept X := sum[i: Ball], D[" + mass.symbol + "[i] * " +
                             lad.v + "[i]]/D[t]");
  const auto dP = kb.register_concept(ddt);
  REQUIRE(dP.outcome == RegisterOutcome::Added);
  LawDef zlaw;
  zlaw.kind = LawKind::Zero;
  zlaw.general = true;
  zlaw.subject_concept = dP.symbol;
  zlaw.scope = {"collision_1d", "collision_2d"};
  const LawOutcome zout = kb.record_law(zlaw);
  CHECK_FALSE(zout.accepted);
  CHECK(zout.detail == "redundant against existing general laws");
}

TEST_CASE("genuinely new laws pass the reduction and can evict covered ones") {
  KnowledgeBase kb;
  Ladder lad;
  lad.base(kb);
  const auto mass = kb.register_concept(lad.grav_mass());
  const auto P = kb.register_concept(anonymous("concept X := sum[i: Ball], " + mass.symbol +
                                               "[i] * " + lad.v + "[i]"));
  const auto T = kb.register_concept(anonymous(
      "concept X := sum[i: Ball], " + mass.symbol + "[i] * (" + lad.v + "[i] * " + lad.v +
      "[i] + " + lad.vy + "[i] * " + lad.vy + "[i])"));
  LawDef momentum;
  momentum.kind = LawKind::Conserved;
  momentum.general = true;
  momentum.subject_concept = P.symbol;
  momentum.scope = {"collision_1d", "collision_2d"};
  REQUIRE(kb.record_law(momentum).accepted);
  // an energy law against a momentum-only basis is novel
  LawDef energy;
  energy.kind = LawKind::Conserved;
  energy.general = true;
  energy.subject_concept = T.symbol;
  energy.scope = {"collision_1d", "collision_2d"};
  const LawOutcome out = kb.record_law(energy);
  CHECK(out.accepted);
  CHECK(out.evicted.empty());
  CHECK(kb.law_count() == 2);
}

TEST_CASE("persistence: empty KB round-trips byte-identically") {
  KnowledgeBase kb;
  const std::string text = kb.to_text();
  const KnowledgeBase back = KnowledgeBase::from_text(text);
  CHECK(back.to_text() == text);
}

TEST_CASE("persistence: populated KB round-trips with memo and provenance") {
  KnowledgeBase kb;
  Ladder lad;
  lad.base(kb);
  const auto mass = kb.register_concept(lad.grav_mass());
  // force a memo entry
  PhysObject ball;
  ball.type = "Ball";
  ball.props["mass"] = 1.7;
  kb.intrinsic_value(*kb.find_concept(mass.symbol), ball);

  const auto P = kb.register_concept(anonymous("concept X := sum[i: Ball], " + mass.symbol +
                                               "[i] * " + lad.v + "[i]"));
  LawDef law;
  law.kind = LawKind::Conserved;
  law.general = true;
  law.subject_concept = P.symbol;
  law.scope = {"collision_1d"};
  law.trial = 12;
  REQUIRE(kb.record_law(law).accepted);

  const std::string text = kb.to_text();
  const KnowledgeBase back = KnowledgeBase::from_text(text);
  CHECK(back.to_text() == text);
  CHECK(back.concept_count() == kb.concept_count());
  CHECK(back.law_count() == 1);
  CHECK(back.laws()[0].origins.size() == 1);
  CHECK(back.find_concept(mass.symbol) != nullptr);

  // file-level persist/load with atomic write
  const std::string path = "/tmp/physlaw_kb_test.txt";
  kb.persist(path);
  const KnowledgeBase loaded = KnowledgeBase::load(path);
  CHECK(loaded.to_text() == text);
  std::filesystem::remove(path);
}

TEST_CASE("truncated KB files fail to load") {
  KnowledgeBase kb;
  std::string text = kb.to_text();
  text = text.substr(0, text.size() - 5);  // drop the end marker
  CHECK_THROWS_AS(KnowledgeBase::from_text(text), KbError);
  CHECK_THROWS_AS(KnowledgeBase::from_text("garbage"), KbError);
}

TEST_CASE("referential integrity under random operation sequences") {
  KnowledgeBase kb;
  Ladder lad;
  lad.base(kb);
  // a short fuzz: registrations, duplicate attempts, law records
  const auto mass = kb.register_concept(lad.grav_mass());
  kb.register_concept(lad.inertial_mass());  // duplicate
  kb.register_concept(anonymous("concept X := forall i: Ball, posx[i] * posx[i]"));
  kb.register_concept(anonymous("concept X := forall i: Ball, posx[i] * posx[i]"));  // dup
  LawDef law;
  law.kind = LawKind::Conserved;
  law.general = true;
  law.subject_concept = mass.symbol;
  law.scope = {"collision_1d"};
  kb.record_law(law);
  // every concept body resolves; every law's subject exists
  for (const ConceptDef* c : kb.concepts()) {
    std::vector<const Expr*> atoms;
    collect_atoms(c->body, atoms);
    for (const Expr* a : atoms) {
      bool ok = a->symbol == "t" || kb.find_concept(a->symbol) != nullptr;
      for (const auto& s : c->slots) ok |= s.var == a->symbol;
      CHECK(ok);
    }
  }
  for (const LawDef& l : kb.laws()) {
    if (l.general) CHECK(kb.find_concept(l.subject_concept) != nullptr);
  }
}
