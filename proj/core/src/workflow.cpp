#include "physlaw/workflow.hpp"

#include "physlaw/geometry.hpp"
#include "physlaw/parser.hpp"
#include "physlaw/rng.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

namespace physlaw {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string TrialRecord::to_line() const {
  std::ostringstream os;
  os << "trial=" << index << " era=" << era << " exp=" << experiment << " seed=" << seed
     << " reward=" << fmt17(reward) << " work=" << work_used
     << " truncated=" << (truncated ? 1 : 0) << " candidates=" << candidates
     << " concepts=";
  for (std::size_t i = 0; i < concepts.size(); ++i) os << (i ? "," : "") << concepts[i];
  os << " deltas=";
  for (std::size_t i = 0; i < deltas.size(); ++i) os << (i ? ";" : "") << deltas[i];
  return os.str();
}

// ---------------------------------------------------------------------------
// concept categories for the milestone table

namespace {

// depth of time-derivative nesting over a position observable
int derivative_depth(const ExprPtr& e) {
  if (!e) return -1;
  if (e->kind == NodeKind::Atom) {
    if (e->symbol == "posx" || e->symbol == "posy" || e->symbol == "posz") return 0;
    return -1;
  }
  if (e->kind == NodeKind::Diff) {
    const int inner = derivative_depth(e->lhs);
    if (inner >= 0 && e->rhs->kind == NodeKind::Atom && e->rhs->symbol == "t")
      return inner + 1;
  }
  return -1;
}

int count_symbol_matches(const ExprPtr& e, const std::function<bool(const Expr&)>& pred) {
  if (!e) return 0;
  int n = e->kind == NodeKind::Atom && pred(*e) ? 1 : 0;
  n += count_symbol_matches(e->lhs, pred);
  n += count_symbol_matches(e->rhs, pred);
  if (e->kind == NodeKind::Pow && e->lhs && e->lhs->kind == NodeKind::Atom && pred(*e->lhs))
    n += std::abs(e->exponent) - 1;
  return n;
}

}  // namespace

std::string concept_category(const ConceptDef& def, const KnowledgeBase& kb) {
  if (def.kind == ConceptKind::UniversalConstant) return "universal-constant";
  if (def.kind == ConceptKind::Intrinsic)
    return def.slots.size() == 1 && def.slots[0].object_type == "Ball" ? "mass-like"
                                                                       : "intrinsic";
  const int depth = derivative_depth(def.body);
  if (depth == 1) return "velocity-like";
  if (depth == 2) return "acceleration-like";
  // expand one level to look through references to velocity-like concepts
  auto is_velocity_atom = [&](const Expr& a) {
    const ConceptDef* c = kb.find_concept(a.symbol);
    return c && derivative_depth(c->body) == 1;
  };
  auto is_accel_atom = [&](const Expr& a) {
    const ConceptDef* c = kb.find_concept(a.symbol);
    if (!c) return false;
    if (derivative_depth(c->body) == 2) return true;
    // derivative of a velocity-like concept
    return c->body && c->body->kind == NodeKind::Diff &&
           c->body->lhs->kind == NodeKind::Atom && is_velocity_atom(*c->body->lhs);
  };
  if (def.body && def.body->kind == NodeKind::Diff && def.body->lhs->kind == NodeKind::Atom &&
      is_velocity_atom(*def.body->lhs))
    return "acceleration-like";
  const int vcount = count_symbol_matches(def.body, is_velocity_atom);
  const int acount = count_symbol_matches(def.body, is_accel_atom);
  if (def.kind == ConceptKind::Summation) {
    if (vcount >= 2) return "energy-like";
    if (vcount == 1) return "momentum-like";
    if (acount >= 1) return "force-like";
    return "summation";
  }
  if (vcount >= 2) return "energy-like";
  // extended conserved totals reference energy-like summations
  auto is_energy_atom = [&](const Expr& a) {
    const ConceptDef* c = kb.find_concept(a.symbol);
    return c && c->kind == ConceptKind::Summation &&
           count_symbol_matches(c->body, is_velocity_atom) >= 2;
  };
  if (count_symbol_matches(def.body, is_energy_atom) >= 1) return "energy-like";
  return "dynamical";
}

std::string RunSummary::to_text() const {
  std::ostringstream os;
  os << "trials " << trials << "\n";
  os << "eras " << eras << "\n";
  os << "concepts " << concepts << "\n";
  os << "laws " << laws << "\n";
  os << "milestones\n";
  for (const auto& [category, name, trial] : milestones)
    os << "  " << category << " " << name << " trial " << trial << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// workflow

struct DiscoveryWorkflow::GeometryContext {
  VarTable vars;
  ConstraintSystem cs;
  std::map<std::string, double> geo;
  bool usable = false;
};

DiscoveryWorkflow::DiscoveryWorkflow(const RunConfig& cfg)
    : cfg_(cfg),
      kb_(cfg.policy, seed_from(cfg.master_seed, "kb")),
      engine_(cfg.engine, seed_from(cfg.master_seed, "engine")) {}

DiscoveryWorkflow::DiscoveryWorkflow(const RunConfig& cfg, const std::string& checkpoint)
    : cfg_(cfg),
      kb_(cfg.policy, seed_from(cfg.master_seed, "kb")),
      engine_(cfg.engine, seed_from(cfg.master_seed, "engine")) {
  const auto kb_pos = checkpoint.find("physlaw-kb v1");
  const auto eng_pos = checkpoint.find("engine v1");
  if (kb_pos == std::string::npos || eng_pos == std::string::npos)
    throw UsageError("checkpoint: missing kb or engine section");
  std::istringstream head(checkpoint.substr(0, kb_pos));
  std::string tag;
  head >> tag >> trial_index_;
  if (tag != "trial") throw UsageError("checkpoint: bad header");
  kb_ = KnowledgeBase::from_text(checkpoint.substr(kb_pos, eng_pos - kb_pos));
  engine_.restore_state(checkpoint.substr(eng_pos));
}

std::string DiscoveryWorkflow::checkpoint_text() const {
  std::ostringstream os;
  os << "trial " << trial_index_ << "\n";
  os << kb_.to_text();
  os << engine_.save_state();
  return os.str();
}

std::vector<std::string> DiscoveryWorkflow::feasible_experiments() const {
  std::vector<std::string> out;
  for (const auto& spec : catalog()) {
    if (!cfg_.experiments.empty() &&
        std::find(cfg_.experiments.begin(), cfg_.experiments.end(), spec.name) ==
            cfg_.experiments.end())
      continue;
    auto it = trial_cost_.find(spec.name);
    if (it != trial_cost_.end() && it->second > engine_.trial_budget()) continue;
    out.push_back(spec.name);
  }
  return out;
}

// ---------------------------------------------------------------------------
// per-experiment geometry contexts for gradient candidates

namespace {

bool potential_like(const ExprPtr& e, const KnowledgeBase& kb, bool& has_geometric) {
  if (!e) return true;
  switch (e->kind) {
    case NodeKind::Number:
      return true;
    case NodeKind::Atom: {
      if (e->symbol == "posx" || e->symbol == "posy" || e->symbol == "posz" ||
          e->symbol == "length") {
        has_geometric = true;
        return true;
      }
      const ConceptDef* c = kb.find_concept(e->symbol);
      return c && (c->kind == ConceptKind::Intrinsic ||
                   c->kind == ConceptKind::UniversalConstant);
    }
    case NodeKind::Diff:
    case NodeKind::Partial:
      return false;
    case NodeKind::Pow:
      return potential_like(e->lhs, kb, has_geometric);
    default:
      return potential_like(e->lhs, kb, has_geometric) &&
             potential_like(e->rhs, kb, has_geometric);
  }
}

ExprPtr poly_to_expr(const Poly& p, const VarTable& vars,
                     const std::map<std::string, double>& geo) {
  if (p.is_zero()) return make_number(0);
  ExprPtr acc;
  for (auto it = p.terms().rbegin(); it != p.terms().rend(); ++it) {
    const auto& [mono, coef] = *it;
    ExprPtr term = make_number(coef);
    for (const auto& [v, e] : mono) {
      const std::string& name = vars.name(v.var);
      ExprPtr factor;
      auto git = geo.find(name);
      if (git != geo.end()) {
        factor = make_number(rationalize(git->second, 1e-12));
      } else {
        factor = parse_expr(name);
      }
      if (e > 1) factor = make_pow(factor, e);
      term = make_mul(term, factor);
    }
    acc = acc ? make_add(acc, term) : term;
  }
  return acc;
}

ExprPtr rationalfn_to_expr(const RationalFn& f, const VarTable& vars,
                           const std::map<std::string, double>& geo) {
  ExprPtr num = poly_to_expr(f.num, vars, geo);
  if (f.den.term_count() == 1 && f.den.terms().begin()->first.empty()) {
    const Rational d = f.den.terms().begin()->second;
    if (d == 1) return num;
    return make_mul(make_number(Rational(1) / d), num);
  }
  return make_div(num, poly_to_expr(f.den, vars, geo));
}

}  // namespace

std::vector<ExprPtr> DiscoveryWorkflow::gradient_candidates(
    const std::string& experiment, const std::vector<std::string>& symbols) {
  static std::map<std::string, std::unique_ptr<GeometryContext>> contexts;
  const ExperimentSpec* spec = find_experiment(experiment);
  if (!spec) return {};

  auto ctx_it = contexts.find(experiment);
  if (ctx_it == contexts.end()) {
    auto ctx = std::make_unique<GeometryContext>();
    ctx->geo = spec->geometry;
    std::vector<int> cartesian, others;
    for (const auto& o : spec->objects) {
      if (o.type == "Ball") {
        for (const char* obs : {"posx", "posy", "posz"})
          cartesian.push_back(ctx->vars.add(
              std::string(obs) + "[" + std::to_string(o.id) + "]", VarClass::Dependent));
      } else if (o.type == "Spring") {
        others.push_back(
            ctx->vars.add("length[" + std::to_string(o.id) + "]", VarClass::Dependent));
      }
    }
    for (const auto& [g, v] : spec->geometry) ctx->vars.add(g, VarClass::Constant);
    try {
      std::vector<Poly> constraints;
      for (const std::string& text : spec->constraints) {
        constraints.push_back(parse_poly(text, ctx->vars, [&](const std::string& key) {
          if (key == "t") return VarClass::Time;
          if (spec->geometry.count(key)) return VarClass::Constant;
          const auto bracket = key.find('[');
          const std::string sym = key.substr(0, bracket);
          if (sym == "posx" || sym == "posy" || sym == "posz" || sym == "length")
            return VarClass::Dependent;
          return VarClass::Constant;  // intrinsic concept atoms
        }));
      }
      ctx->cs = classify_constraints(constraints, cartesian, others, ctx->vars);
      ctx->usable = true;
    } catch (const GeometryError&) {
      ctx->usable = false;
    }
    ctx_it = contexts.emplace(experiment, std::move(ctx)).first;
  }
  GeometryContext& ctx = *ctx_it->second;
  if (!ctx.usable) return {};

  std::vector<ExprPtr> out;
  std::set<std::string> seen;
  for (const std::string& sym : symbols) {
    const ConceptDef* c = kb_.find_concept(sym);
    if (!c || c->kind == ConceptKind::Intrinsic || c->kind == ConceptKind::UniversalConstant)
      continue;
    for (const ExprPtr& atom : specialize(*c, spec->objects)) {
      ExprPtr flat;
      try {
        flat = expand_for_algebra(atom, kb_, spec->objects);
      } catch (const EvalError&) {
        continue;
      }
      bool has_geometric = false;
      if (!potential_like(flat, kb_, has_geometric) || !has_geometric) continue;
      try {
        VarTable& vars = ctx.vars;
        const RationalFn f = expr_to_rational(flat, vars, [&](const std::string& key) {
          if (key == "t") return VarClass::Time;
          if (spec->geometry.count(key)) return VarClass::Constant;
          const auto bracket = key.find('[');
          const std::string s = key.substr(0, bracket);
          if (s == "posx" || s == "posy" || s == "posz" || s == "length")
            return VarClass::Dependent;
          return VarClass::Constant;
        });
        const DifferentialForm grad = constrained_gradient(f, ctx.cs);
        for (const auto& [var, comp] : grad.coeffs) {
          if (comp.num.is_zero()) continue;
          ExprPtr ge = rationalfn_to_expr(comp, ctx.vars, ctx.geo);
          if (complexity(ge) > 4 * cfg_.term_complexity_cap) continue;
          if (seen.insert(print_expr(ge)).second) out.push_back(ge);
          if (out.size() >= 8) return out;
        }
      } catch (const std::exception&) {
        continue;  // singular H or non-algebraic body: no gradients here
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// extension term templates

std::vector<TermSpec> DiscoveryWorkflow::extension_terms(
    const std::vector<std::string>& symbols, const std::string& experiment) const {
  const ExperimentSpec* spec = find_experiment(experiment);
  if (!spec) return {};
  // one-object concepts grouped by object type
  std::map<std::string, std::vector<std::string>> by_type;
  for (const std::string& sym : symbols) {
    const ConceptDef* c = kb_.find_concept(sym);
    if (!c || c->slots.size() != 1) continue;
    if (c->kind == ConceptKind::Summation || c->kind == ConceptKind::UniversalConstant)
      continue;
    by_type[c->slots[0].object_type].push_back(sym);
  }

  std::vector<TermSpec> terms;
  auto add = [&](const std::string& type, ExprPtr body) {
    if (complexity(body) > cfg_.term_complexity_cap) return;
    TermSpec t;
    t.sum_type = type;
    t.sum_var = "i";
    t.body = std::move(body);
    terms.push_back(std::move(t));
  };
  const std::vector<int> powers = {1, 2, -1, -2};
  for (const auto& [type, syms] : by_type) {
    std::vector<ExprPtr> factors;
    for (const auto& s : syms) {
      const ExprPtr atom = make_atom(s, {ObjRef::bound("i")});
      for (int p : powers) factors.push_back(p == 1 ? atom : make_pow(atom, p));
    }
    // displacement-like differences of same-type concepts and their squares
    for (std::size_t a = 0; a < syms.size(); ++a) {
      for (std::size_t b = 0; b < syms.size(); ++b) {
        if (a == b) continue;
        const ExprPtr diff = make_sub(make_atom(syms[a], {ObjRef::bound("i")}),
                                      make_atom(syms[b], {ObjRef::bound("i")}));
        factors.push_back(diff);
        factors.push_back(make_pow(diff, 2));
      }
    }
    for (const auto& f : factors) add(type, f);
    for (std::size_t a = 0; a < factors.size(); ++a)
      for (std::size_t b = a + 1; b < factors.size(); ++b)
        add(type, make_mul(factors[a], factors[b]));
  }
  std::stable_sort(terms.begin(), terms.end(), [](const TermSpec& a, const TermSpec& b) {
    const int xa = complexity(a.body);
    const int xb = complexity(b.body);
    if (xa != xb) return xa < xb;
    return print_expr(a.body) < print_expr(b.body);
  });
  if (terms.size() > 24) terms.resize(24);
  return terms;
}

// ---------------------------------------------------------------------------
// simplification and classification

std::vector<RelationCandidate> DiscoveryWorkflow::simplify_candidates(
    std::vector<RelationCandidate> candidates, const std::string& experiment) {
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const RelationCandidate& a, const RelationCandidate& b) {
                     if (a.complexity_score != b.complexity_score)
                       return a.complexity_score < b.complexity_score;
                     return print_expr(a.expr) < print_expr(b.expr);
                   });
  // basis: geometry constraints, wider general laws and the specific laws
  // already recorded for this experiment
  std::vector<Poly> basis_polys;
  for (const Poly& p : kb_.reduction_basis(experiment, {experiment}, ""))
    basis_polys.push_back(p);
  for (const LawDef& l : kb_.laws()) {
    if (l.general || !l.scope.count(experiment)) continue;
    for (Poly& p : kb_.law_polys(l, experiment)) basis_polys.push_back(std::move(p));
  }
  CharSet cs = autoreduce(basis_polys);

  std::vector<RelationCandidate> out;
  for (RelationCandidate& cand : candidates) {
    LawDef probe;
    probe.kind = cand.kind;
    probe.general = false;
    probe.subject_expr = cand.expr;
    std::vector<Poly> polys;
    try {
      polys = kb_.law_polys(probe, experiment);
    } catch (const std::exception&) {
      continue;  // not algebraizable: drop rather than guess
    }
    if (polys.empty()) continue;  // symbolically trivial relation
    bool novel = false;
    for (const Poly& p : polys) novel |= !ritt_reduce(p, cs).is_zero();
    if (!novel) continue;
    out.push_back(cand);
    basis_polys.insert(basis_polys.end(), polys.begin(), polys.end());
    cs = autoreduce(basis_polys);
  }
  return out;
}

Classification DiscoveryWorkflow::classify_law(LawKind kind, const ExprPtr& subject,
                                               const std::string& experiment) {
  Classification out;
  const ExperimentSpec* spec = find_experiment(experiment);
  if (!spec) return out;

  LawDef probe;
  probe.kind = kind;
  probe.general = false;
  probe.subject_expr = subject;

  struct Fit {
    double value = 0.0, std = 0.0;
    bool ok = false;
  };
  auto fit_on = [&](const ExperimentData& d) {
    Fit f;
    MeasuredValue v;
    try {
      v = kb_.evaluate(subject, d);
    } catch (const EvalError&) {
      return f;
    }
    if (kind == LawKind::Conserved) {
      if (v.is_const()) {
        f = {v.mean(), v.std_dev(), true};
      } else if (v.is_zero()) {
        f = {0.0, v.std_dev(), true};
      }
    } else {
      if (v.is_zero()) f = {0.0, v.std_dev(), true};
    }
    return f;
  };

  std::set<std::string> changing_objects;
  bool changing_initial = false;
  bool any_sweep_broke = false;

  for (const ParamSpec& p : spec->params) {
    if (p.kind == ParamKind::World || p.lo >= p.hi) continue;
    std::vector<double> values = {p.lo, p.def, p.hi};
    std::vector<Fit> fits;
    int faults = 0;
    uint64_t sweep_seed = seed_from(cfg_.master_seed, "classify/" + experiment + "/" + p.name,
                                    static_cast<uint64_t>(trial_index_));
    for (std::size_t i = 0; i < values.size(); ++i) {
      try {
        const ExperimentData d = vary_parameter(*spec, {}, p.name, {values[i]},
                                                seed_from(sweep_seed, "v", i),
                                                cfg_.policy)[0];
        fits.push_back(fit_on(d));
      } catch (const SimulatorError&) {
        ++faults;
      }
    }
    if (fits.size() < 2) continue;  // not enough valid sweep points
    bool holds = true;
    for (const Fit& f : fits) holds &= f.ok;
    if (!holds) {
      any_sweep_broke = true;
      break;
    }
    // does the fitted constant move with this parameter?
    bool moved = false;
    for (std::size_t i = 1; i < fits.size(); ++i) {
      const double tol = 3.0 * std::sqrt(fits[i].std * fits[i].std +
                                         fits[0].std * fits[0].std) +
                         1e-12;
      moved |= std::abs(fits[i].value - fits[0].value) > tol;
    }
    if (moved) {
      if (p.kind == ParamKind::ObjectProp)
        changing_objects.insert(p.object);
      else
        changing_initial = true;
    }
  }

  if (any_sweep_broke) {
    out.cls = LawClass::ParameterDependent;
    return out;
  }
  if (kind == LawKind::Zero) {
    out.cls = LawClass::ParameterIndependent;
    return out;
  }
  if (!changing_initial && changing_objects.empty()) {
    out.cls = LawClass::ParameterIndependent;
    out.constant_invariant = true;
    return out;
  }
  if (!changing_initial && !changing_objects.empty()) {
    out.cls = LawClass::ObjectIntrinsic;
    out.intrinsic_objects.assign(changing_objects.begin(), changing_objects.end());
    return out;
  }
  out.cls = LawClass::ParameterIndependent;
  return out;
}

// ---------------------------------------------------------------------------
// extraction and generalization

bool DiscoveryWorkflow::propose_general(const ExprPtr& expr, LawKind kind,
                                        const std::string& experiment, TrialRecord& rec,
                                        double& reward, WorkCounter* work) {
  const ExperimentSpec* spec = find_experiment(experiment);
  if (!spec) return false;
  ConceptDef gen = generalize(expr, spec->objects);
  const auto reg = kb_.register_concept(gen, trial_index_, experiment);
  if (reg.outcome == RegisterOutcome::Unmeasurable) return false;
  if (reg.outcome == RegisterOutcome::Added) {
    reward += 1.0;
    rec.deltas.push_back("concept " + reg.symbol);
  }
  const std::string symbol = reg.symbol;

  LawDef law;
  law.kind = kind;
  law.general = true;
  law.subject_concept = symbol;
  law.trial = trial_index_;
  law.scope = {experiment};
  const ConceptDef* c = kb_.find_concept(symbol);
  for (const auto& other : catalog()) {
    if (other.name == experiment) continue;
    if (!cfg_.experiments.empty() &&
        std::find(cfg_.experiments.begin(), cfg_.experiments.end(), other.name) ==
            cfg_.experiments.end())
      continue;
    if (specialize(*c, other.objects).empty()) continue;
    if (work) work->charge(1);
    LawDef probe = law;
    if (kb_.validate_law(probe, other.name)) law.scope.insert(other.name);
  }
  if (static_cast<int>(law.scope.size()) < 1 + cfg_.m_general) return false;
  const LawOutcome out = kb_.record_law(law);
  if (out.accepted) {
    reward += 1.0;
    rec.deltas.push_back("general-law " + out.name);
    for (const auto& ev : out.evicted) rec.deltas.push_back("evicted " + ev);
  }
  return out.accepted;
}

double DiscoveryWorkflow::commit_finding(const RelationCandidate& cand,
                                         const std::string& experiment,
                                         const ExperimentData& data, TrialRecord& rec,
                                         WorkCounter* work) {
  double reward = 0.0;
  const ExperimentSpec* spec = find_experiment(experiment);
  const Classification cls = classify_law(cand.kind, cand.expr, experiment);

  // the specific law itself is knowledge in every classification
  LawDef specific;
  specific.kind = cand.kind;
  specific.general = false;
  specific.subject_expr = cand.expr;
  specific.trial = trial_index_;
  specific.scope = {experiment};
  LawProvenance prov;
  prov.seed = data.seed;
  prov.params = data.assignment;
  specific.origins[experiment] = prov;
  const LawOutcome law_out = kb_.record_law(specific);
  if (law_out.accepted) {
    reward += 1.0;
    rec.deltas.push_back("specific-law " + law_out.name);
  }

  if (cls.cls == LawClass::ParameterDependent) return reward;

  if (cand.kind == LawKind::Conserved && cls.cls == LawClass::ObjectIntrinsic) {
    // spawn an intrinsic concept per owning object: the conserved expression
    // becomes the measurement procedure, other referenced objects are the
    // standards
    for (const std::string& owner : cls.intrinsic_objects) {
      const PhysObject* measured = spec->find_object(owner);
      if (!measured) continue;
      ConceptDef c;
      c.kind = ConceptKind::Intrinsic;
      c.slots = {{"i", measured->type}};
      c.intrinsic.experiment = experiment;
      c.intrinsic.measured_var = "i";
      c.intrinsic.bindings.emplace_back(owner, "i");
      std::map<int, std::string> env{{measured->id, "i"}};
      int next_standard = 1;
      for (int id : concrete_ids(cand.expr)) {
        if (id == measured->id) continue;
        const PhysObject* other = spec->object_by_id(id);
        if (!other) continue;
        const std::string var = "s" + std::to_string(next_standard++);
        c.intrinsic.bindings.emplace_back(other->name, var);
        env[id] = var;
      }
      c.body = abstract_ids(cand.expr, env);
      const auto reg = kb_.register_concept(c, trial_index_, experiment);
      if (reg.outcome == RegisterOutcome::Added) {
        reward += 1.0;
        rec.deltas.push_back("intrinsic " + reg.symbol);
      }
    }
    return reward;
  }

  if (cand.kind == LawKind::Conserved && cls.constant_invariant) {
    // a parameter-independent constant is a universal constant
    ConceptDef c;
    c.kind = ConceptKind::UniversalConstant;
    c.intrinsic.experiment = experiment;
    c.body = cand.expr;
    const auto reg = kb_.register_concept(c, trial_index_, experiment);
    if (reg.outcome == RegisterOutcome::Added) {
      reward += 1.0;
      rec.deltas.push_back("universal " + reg.symbol);
    }
  } else if (cand.kind == LawKind::Conserved) {
    // conserved quantity with a contingent value: extract the concept
    ConceptDef gen = generalize(cand.expr, spec->objects);
    const auto reg = kb_.register_concept(gen, trial_index_, experiment);
    if (reg.outcome == RegisterOutcome::Added) {
      reward += 1.0;
      rec.deltas.push_back("concept " + reg.symbol);
    }
  }

  propose_general(cand.expr, cand.kind, experiment, rec, reward, work);
  return reward;
}

// ---------------------------------------------------------------------------
// the trial loop

TrialRecord DiscoveryWorkflow::run_trial() {
  TrialRecord rec;
  rec.index = ++trial_index_;
  rec.era = engine_.era();

  const std::vector<std::string> feasible = feasible_experiments();
  if (feasible.empty()) throw UsageError("run_trial: no feasible experiments");
  rec.experiment = engine_.select_experiment(feasible);
  const ExperimentSpec& spec = *find_experiment(rec.experiment);
  rec.seed = seed_from(cfg_.master_seed, "trial/" + rec.experiment,
                       static_cast<uint64_t>(rec.index));
  const ExperimentData data = simulate(spec, {}, rec.seed, cfg_.policy);

  // --- step 1: concept selection (the experiment's own observables join in)
  std::vector<std::pair<std::string, int>> kb_concepts;
  for (const ConceptDef* c : kb_.concepts()) {
    if (kb_.is_suspect(c->symbol)) continue;
    kb_concepts.emplace_back(c->symbol, complexity(c->body));
  }
  std::vector<std::string> symbols =
      engine_.select_concepts(rec.experiment, kb_concepts, kb_.concept_count());
  for (const auto& o : spec.objects) {
    const ObjectTypeDef* t = find_object_type(o.type);
    if (!t) continue;
    for (const auto& obs : t->observables)
      if (std::find(symbols.begin(), symbols.end(), obs) == symbols.end())
        symbols.push_back(obs);
  }
  rec.concepts = symbols;

  WorkCounter work;
  work.budget = engine_.trial_budget();
  double reward = 0.0;

  try {
    // --- step 2a: general-law application and extension
    std::vector<std::string> law_names;
    for (const LawDef& l : kb_.laws())
      if (l.general && !l.scope.count(rec.experiment)) law_names.push_back(l.name);
    for (const std::string& name : law_names) {
      const LawDef* law = kb_.find_law(name);
      if (!law) continue;  // evicted meanwhile
      const ConceptDef* subject = kb_.find_concept(law->subject_concept);
      if (!subject || specialize(*subject, spec.objects).empty()) continue;
      const LawOutcome widened = kb_.widen_scope(name, rec.experiment);
      if (widened.accepted) {
        reward += 1.0;
        rec.deltas.push_back("widened " + name);
        for (const auto& ev : widened.evicted) rec.deltas.push_back("evicted " + ev);
        continue;
      }
      if (law->scope.size() < 2) continue;
      const auto ext = extend_general_law(*law, rec.experiment,
                                          extension_terms(symbols, rec.experiment), kb_,
                                          &work);
      if (!ext || ext->unchanged) continue;
      // register the term sums and the extended total, then the law
      ExprPtr body = make_atom(law->subject_concept);
      bool ok = true;
      for (const auto& [term, coef] : ext->terms) {
        ConceptDef sum;
        sum.kind = ConceptKind::Summation;
        sum.sum_type = term.sum_type;
        sum.sum_var = term.sum_var;
        sum.body = term.body;
        const auto reg = kb_.register_concept(sum, trial_index_, rec.experiment);
        if (reg.outcome == RegisterOutcome::Unmeasurable) {
          ok = false;
          break;
        }
        if (reg.outcome == RegisterOutcome::Added) {
          reward += 1.0;
          rec.deltas.push_back("concept " + reg.symbol);
        }
        body = make_add(body, make_mul(make_number(coef), make_atom(reg.symbol)));
      }
      if (!ok) continue;
      ConceptDef total;
      total.kind = ConceptKind::Dynamical;
      total.body = body;
      const auto total_reg = kb_.register_concept(total, trial_index_, rec.experiment);
      if (total_reg.outcome == RegisterOutcome::Unmeasurable) continue;
      if (total_reg.outcome == RegisterOutcome::Added) {
        reward += 1.0;
        rec.deltas.push_back("concept " + total_reg.symbol);
      }
      LawDef extended;
      extended.kind = law->kind;
      extended.general = true;
      extended.subject_concept = total_reg.symbol;
      extended.scope = ext->scope;
      extended.trial = trial_index_;
      const LawOutcome out = kb_.record_law(extended);
      if (out.accepted) {
        reward += 1.0;
        rec.deltas.push_back("general-law " + out.name);
        for (const auto& ev : out.evicted) rec.deltas.push_back("evicted " + ev);
      }
    }

    // --- step 2b: direct symbolic regression
    std::vector<ExprPtr> pool;
    std::set<std::string> pool_seen;
    auto add_pool = [&](const ExprPtr& e) {
      if (pool_seen.insert(print_expr(e)).second) pool.push_back(e);
    };
    for (const std::string& sym : symbols) {
      const ConceptDef* c = kb_.find_concept(sym);
      if (!c) continue;
      for (const ExprPtr& s : specialize(*c, spec.objects)) add_pool(s);
    }
    for (const ExprPtr& g : gradient_candidates(rec.experiment, symbols)) add_pool(g);

    SearchResult sr = ansatz_search(pool, data, kb_, &work, cfg_.policy);
    const FeatureMatrix features = build_features(pool, data, kb_, &work, cfg_.policy);
    auto pca = pca_relations(features, data, kb_, cfg_.pca_k_max, &work, cfg_.policy);
    std::vector<RelationCandidate> candidates = std::move(sr.candidates);
    rec.truncated |= !sr.complete;
    for (auto& c : pca) candidates.push_back(std::move(c));
    rec.candidates = static_cast<int>(candidates.size());

    // --- step 3: minimal representation against existing knowledge
    const auto survivors = simplify_candidates(std::move(candidates), rec.experiment);

    // --- step 4: classification, extraction, generalization
    for (const RelationCandidate& cand : survivors)
      reward += commit_finding(cand, rec.experiment, data, rec, &work);
  } catch (const BudgetExhausted&) {
    rec.truncated = true;
  }

  rec.work_used = work.used;
  rec.reward = reward;
  trial_cost_[rec.experiment] = work.used;
  engine_.note_trial(rec.experiment, reward);
  records_.push_back(rec);
  return rec;
}

// ---------------------------------------------------------------------------
// the discovery loop

RunSummary DiscoveryWorkflow::run_discovery() {
  namespace fs = std::filesystem;
  fs::create_directories(cfg_.output_dir);
  {
    std::ofstream cfg_echo(cfg_.output_dir + "/config.txt", std::ios::trunc);
    cfg_echo << cfg_.to_text();
  }
  std::ofstream log(cfg_.output_dir + "/trials.log", std::ios::trunc);

  while (trial_index_ < cfg_.max_trials) {
    const std::vector<std::string> feasible = feasible_experiments();
    if (feasible.empty()) {
      const auto dec = engine_.era_step(feasible);
      if (!dec.advance || engine_.trial_budget() > cfg_.era_budget_cap) break;
      continue;
    }
    const TrialRecord rec = run_trial();
    log << rec.to_line() << "\n";
    const auto dec = engine_.era_step(feasible_experiments());
    if (dec.advance && engine_.trial_budget() > cfg_.era_budget_cap) break;
    if (cfg_.checkpoint_every > 0 && trial_index_ % cfg_.checkpoint_every == 0) {
      std::ofstream ck(cfg_.output_dir + "/checkpoint.txt", std::ios::trunc);
      ck << checkpoint_text();
    }
  }

  RunSummary summary;
  summary.trials = trial_index_;
  summary.eras = engine_.era() + 1;
  summary.concepts = kb_.concept_count();
  summary.laws = kb_.law_count();
  for (const ConceptDef* c : kb_.concepts()) {
    if (c->trial < 0) continue;  // builtins
    summary.milestones.emplace_back(concept_category(*c, kb_), c->symbol, c->trial);
  }
  for (const LawDef& l : kb_.laws()) {
    std::string cat = l.general ? "general-law" : "specific-law";
    if (l.general) {
      const ConceptDef* c = kb_.find_concept(l.subject_concept);
      if (c) cat = concept_category(*c, kb_) + "-law";
    }
    summary.milestones.emplace_back(cat, l.name, l.trial);
  }
  std::stable_sort(summary.milestones.begin(), summary.milestones.end(),
                   [](const auto& a, const auto& b) { return std::get<2>(a) < std::get<2>(b); });

  write_outputs(summary);
  return summary;
}

void DiscoveryWorkflow::write_outputs(const RunSummary& summary) const {
  kb_.persist(cfg_.output_dir + "/kb.txt");
  std::ofstream ck(cfg_.output_dir + "/checkpoint.txt", std::ios::trunc);
  ck << checkpoint_text();
  std::ofstream sum(cfg_.output_dir + "/summary.txt", std::ios::trunc);
  sum << summary.to_text();
}

}  // namespace physlaw
