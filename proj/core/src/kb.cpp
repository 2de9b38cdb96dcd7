#include "physlaw/kb.hpp"

#include "physlaw/parser.hpp"
#include "physlaw/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace physlaw {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// probe experiments span multi-object, spring and vertical dynamics so that
// x/y/z-asymmetric concepts get distinguishable signatures
const char* const kProbeExperiments[] = {"collision_2d", "spring_ball_horizontal",
                                         "projectile"};

bool is_observable_symbol(const std::string& s) {
  for (const auto& t : builtin_object_types())
    for (const auto& o : t.observables)
      if (o == s) return true;
  return false;
}

// combined 3-sigma agreement with a small absolute floor for exact values
bool scalar_close(double ma, double sa, double mb, double sb) {
  const double tol = 3.0 * std::sqrt(sa * sa + sb * sb) +
                     1e-12 * (std::abs(ma) + std::abs(mb) + 1.0);
  return std::abs(ma - mb) <= tol;
}

bool mv_equal_3sigma(const MeasuredValue& a, const MeasuredValue& b) {
  using K = MeasuredValue::Kind;
  if (a.is_err() || b.is_err()) return a.is_err() && b.is_err();
  const bool as = a.kind() == K::Zero || a.kind() == K::Const;
  const bool bs = b.kind() == K::Zero || b.kind() == K::Const;
  auto smean = [](const MeasuredValue& v) { return v.is_zero() ? 0.0 : v.mean(); };
  if (as && bs) return scalar_close(smean(a), a.std_dev(), smean(b), b.std_dev());
  if (as != bs) {
    const MeasuredValue& ser = as ? b : a;
    const MeasuredValue& sca = as ? a : b;
    const auto& s = ser.series();
    std::size_t good = 0;
    for (std::size_t i = 0; i < s.n(); ++i) {
      if (s.bad[i]) continue;
      ++good;
      if (!scalar_close(s.mean[i], s.std[i], smean(sca), sca.std_dev())) return false;
    }
    return good * 2 >= s.n();
  }
  const auto& sa = a.series();
  const auto& sb = b.series();
  if (sa.n() != sb.n()) return false;
  std::size_t good = 0;
  for (std::size_t i = 0; i < sa.n(); ++i) {
    if (sa.bad[i] || sb.bad[i]) continue;
    ++good;
    if (!scalar_close(sa.mean[i], sa.std[i], sb.mean[i], sb.std[i])) return false;
  }
  return good * 2 >= sa.n();
}

}  // namespace

KnowledgeBase::KnowledgeBase(DataPolicy policy, uint64_t measurement_seed)
    : policy_(policy), measurement_seed_(measurement_seed) {
  // the symbols layer starts with the space-time observables of the declared
  // object types; they are concepts like any other, just not persisted
  auto add_builtin = [&](const std::string& sym, const std::string& type) {
    ConceptRecord rec;
    rec.def.symbol = sym;
    rec.def.kind = ConceptKind::Dynamical;
    if (!type.empty()) {
      rec.def.slots = {{"i", type}};
      rec.def.body = make_atom(sym, {ObjRef::bound("i")});
    } else {
      rec.def.body = make_atom(sym);
    }
    concepts_.emplace(sym, std::move(rec));
    order_.push_back(sym);
  };
  for (const auto& t : builtin_object_types()) {
    for (const auto& o : t.observables) {
      if (o == "t")
        add_builtin(o, "");
      else
        add_builtin(o, t.name);
    }
  }
}

std::string KnowledgeBase::next_concept_symbol() {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "C%02d", ++concept_counter_);
  return buf;
}

std::string KnowledgeBase::next_law_name() {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "L%02d", ++law_counter_);
  return buf;
}

const ConceptDef* KnowledgeBase::find_concept(const std::string& symbol) const {
  auto it = concepts_.find(symbol);
  return it == concepts_.end() ? nullptr : &it->second.def;
}

bool KnowledgeBase::is_suspect(const std::string& symbol) const {
  auto it = concepts_.find(symbol);
  return it != concepts_.end() && it->second.suspect;
}

std::vector<const ConceptDef*> KnowledgeBase::concepts() const {
  std::vector<const ConceptDef*> out;
  for (const auto& s : order_) out.push_back(&concepts_.at(s).def);
  return out;
}

std::vector<std::string> KnowledgeBase::symbols() const { return order_; }

MeasuredValue KnowledgeBase::evaluate(const ExprPtr& e, const ExperimentData& data,
                                      WorkCounter* work) {
  return eval(e, data, *this, work, policy_);
}

// ---------------------------------------------------------------------------
// probe suite and concept registration

namespace {

std::map<std::string, double> probe_params(const ExperimentSpec& spec, int variant) {
  std::map<std::string, double> p;
  if (variant == 0) return p;
  for (const auto& ps : spec.params) {
    if (ps.kind == ParamKind::World) continue;
    const double f = ps.kind == ParamKind::Initial ? 0.3 : 0.4;
    p[ps.name] = ps.def + f * (ps.hi - ps.def);
  }
  return p;
}

}  // namespace

std::vector<MeasuredValue> KnowledgeBase::compute_probe_signature(const ConceptDef& c) {
  std::vector<MeasuredValue> sig;
  for (const char* exp_name : kProbeExperiments) {
    const ExperimentSpec* spec = find_experiment(exp_name);
    if (!spec) continue;
    for (int variant = 0; variant < 2; ++variant) {
      // probe data is deterministic; simulate fresh each time to stay
      // independent of registration history
      const ExperimentData data =
          simulate(*spec, probe_params(*spec, variant),
                   seed_from(measurement_seed_, std::string("probe/") + exp_name,
                             static_cast<uint64_t>(variant)),
                   policy_);
      for (const ExprPtr& e : specialize(c, data.roster)) {
        // registration runs before the concept is in the table, so evaluate
        // the body directly when the atom refers to the candidate itself
        try {
          if (c.kind == ConceptKind::Intrinsic || c.kind == ConceptKind::UniversalConstant) {
            sig.push_back(intrinsic_value(
                c, e->indices.empty() ? PhysObject{} : resolve_object(data, e->indices[0].id)));
          } else if (c.kind == ConceptKind::Summation) {
            MeasuredValue acc = MeasuredValue::zero(0.0);
            bool first = true;
            for (const PhysObject& o : data.roster) {
              if (o.type != c.sum_type) continue;
              const MeasuredValue term = evaluate(
                  substitute(c.body, {{c.sum_var, ObjRef::concrete(o.id)}}), data);
              acc = first ? term : combine(acc, term, BinaryOp::Add, policy_);
              first = false;
            }
            sig.push_back(acc);
          } else {
            std::map<std::string, ObjRef> env;
            for (std::size_t i = 0; i < c.slots.size(); ++i) env[c.slots[i].var] = e->indices[i];
            sig.push_back(evaluate(substitute(c.body, env), data));
          }
        } catch (const EvalError&) {
          sig.push_back(MeasuredValue::err());
        }
      }
    }
  }
  return sig;
}

const std::vector<MeasuredValue>& KnowledgeBase::probe_signature(const std::string& symbol) {
  auto it = probe_cache_.find(symbol);
  if (it != probe_cache_.end()) return it->second;
  const ConceptDef* c = find_concept(symbol);
  if (!c) throw KbError("probe_signature: unknown symbol " + symbol);
  return probe_cache_.emplace(symbol, compute_probe_signature(*c)).first->second;
}

RegisterResult KnowledgeBase::register_concept(ConceptDef c, int trial,
                                               const std::string& source_experiment) {
  c.trial = trial;
  c.source_experiment = source_experiment;

  // referential integrity of the body
  std::vector<const Expr*> atoms;
  collect_atoms(c.body, atoms);
  for (const Expr* a : atoms) {
    if (a->symbol == "t" || is_observable_symbol(a->symbol)) continue;
    bool is_slot = false;
    for (const auto& s : c.slots) is_slot |= s.var == a->symbol;
    if (is_slot) continue;
    if (!find_concept(a->symbol))
      throw KbError("register_concept: body references unknown symbol '" + a->symbol + "'");
  }

  const std::vector<MeasuredValue> sig = compute_probe_signature(c);
  bool all_err = !sig.empty();
  for (const auto& v : sig) all_err &= v.is_err();
  if (all_err) return {RegisterOutcome::Unmeasurable, ""};

  auto signatures_equal = [](const std::vector<MeasuredValue>& a,
                             const std::vector<MeasuredValue>& b) {
    if (a.size() != b.size() || a.empty()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!mv_equal_3sigma(a[i], b[i])) return false;
    return true;
  };

  for (const std::string& sym : order_) {
    const ConceptRecord& rec = concepts_.at(sym);
    if (sig.empty()) {
      // no probe evidence: fall back to structural identity
      if (rec.def.kind == c.kind && rec.def.slots == c.slots &&
          rec.def.sum_type == c.sum_type && expr_equal(rec.def.body, c.body))
        return {RegisterOutcome::Duplicate, sym};
      continue;
    }
    if (signatures_equal(sig, probe_signature(sym)))
      return {RegisterOutcome::Duplicate, sym};
  }

  if (c.symbol.empty()) c.symbol = next_concept_symbol();
  if (concepts_.count(c.symbol))
    throw KbError("register_concept: symbol '" + c.symbol + "' already registered");
  probe_cache_[c.symbol] = sig;
  ConceptRecord rec;
  rec.def = c;
  concepts_.emplace(c.symbol, std::move(rec));
  order_.push_back(c.symbol);
  return {RegisterOutcome::Added, c.symbol};
}

// ---------------------------------------------------------------------------
// intrinsic measurement

MeasuredValue KnowledgeBase::intrinsic_value(const ConceptDef& c, const PhysObject& target) {
  const std::string key = c.symbol + "|" + target.fingerprint();
  const bool memoize = !c.symbol.empty();  // unnamed candidates stay out of the memo
  if (memoize) {
    auto hit = memo_.find(key);
    if (hit != memo_.end()) return hit->second;
  }
  // the seed depends on the measurement procedure, not the symbol, so probe
  // evaluations before naming agree with memoized ones after
  const std::string seed_key = "measure/" + c.intrinsic.experiment + "/" +
                               print_expr(c.body) + "/" + target.fingerprint();

  const ExperimentSpec* spec = find_experiment(c.intrinsic.experiment);
  if (!spec)
    throw KbError("intrinsic measurement: unknown experiment " + c.intrinsic.experiment);

  std::map<std::string, double> params;
  std::map<std::string, ObjRef> env;
  for (const auto& [obj_name, var] : c.intrinsic.bindings) {
    const PhysObject* slot_obj = spec->find_object(obj_name);
    if (!slot_obj)
      throw KbError("intrinsic measurement: experiment " + spec->name + " has no object " +
                    obj_name);
    env[var] = ObjRef::concrete(slot_obj->id);
    if (var == c.intrinsic.measured_var) {
      if (slot_obj->type != target.type)
        throw KbError("intrinsic measurement: object type mismatch for " + c.symbol);
      for (const auto& [prop, value] : target.props) {
        if (spec->find_param(obj_name + "." + prop)) params[obj_name + "." + prop] = value;
      }
    }
  }

  MeasuredValue result;
  try {
    const ExperimentData data =
        simulate(*spec, params, seed_from(measurement_seed_, seed_key), policy_);
    result = evaluate(substitute(c.body, env), data);
  } catch (const std::exception&) {
    result = MeasuredValue::err();
  }
  if (!result.is_const() && !result.is_zero()) {
    // measurement failed to produce a constant; flag the concept
    auto it = concepts_.find(c.symbol);
    if (it != concepts_.end()) it->second.suspect = true;
    result = MeasuredValue::err();
  }
  if (memoize) memo_.emplace(key, result);
  return result;
}

// ---------------------------------------------------------------------------
// laws

const LawDef* KnowledgeBase::find_law(const std::string& name) const {
  for (const auto& l : laws_)
    if (l.name == name) return &l;
  return nullptr;
}

bool KnowledgeBase::validate_law(const LawDef& l, const std::string& experiment,
                                 const ExperimentData* data, LawProvenance* prov) {
  const ExperimentSpec* spec = find_experiment(experiment);
  if (!spec) throw KbError("validate_law: unknown experiment " + experiment);
  ExperimentData local;
  if (!data) {
    const std::string subject =
        l.general ? l.subject_concept : print_expr(l.subject_expr);
    LawProvenance p;
    p.seed = seed_from(measurement_seed_, "validate/" + experiment + "/" + subject);
    local = simulate(*spec, {}, p.seed, policy_);
    p.params = local.assignment;
    if (prov) *prov = p;
    data = &local;
  }

  std::vector<ExprPtr> exprs;
  if (l.general) {
    const ConceptDef* c = find_concept(l.subject_concept);
    if (!c) throw KbError("validate_law: unknown concept " + l.subject_concept);
    exprs = specialize(*c, data->roster);
  } else {
    exprs = {l.subject_expr};
  }
  if (exprs.empty()) return false;

  for (const ExprPtr& e : exprs) {
    MeasuredValue v;
    try {
      v = evaluate(e, *data);
    } catch (const EvalError&) {
      return false;
    }
    if (l.kind == LawKind::Conserved) {
      if (!v.is_const() && !v.is_zero()) return false;
    } else {
      if (!v.is_zero()) return false;
    }
  }
  return true;
}

VarTable& KnowledgeBase::experiment_vars(const std::string& experiment) {
  auto it = exp_vars_.find(experiment);
  if (it != exp_vars_.end()) return it->second;
  VarTable& vars = exp_vars_[experiment];
  // canonical seeding: time first, then the experiment's observables sorted,
  // then geometry constants; lazy registrations follow deterministically
  vars.add("t", VarClass::Time);
  const ExperimentSpec* spec = find_experiment(experiment);
  if (spec) {
    std::vector<std::string> keys;
    for (const auto& o : spec->objects) {
      const ObjectTypeDef* t = find_object_type(o.type);
      if (!t) continue;
      for (const auto& obs : t->observables) {
        if (obs == "t") continue;
        keys.push_back(obs + "[" + std::to_string(o.id) + "]");
      }
    }
    std::sort(keys.begin(), keys.end());
    for (const auto& k : keys) vars.add(k, VarClass::Dependent);
    for (const auto& [g, v] : spec->geometry) vars.add(g, VarClass::Constant);
  }
  return vars;
}

VarClass KnowledgeBase::classify_atom(const std::string& atom_key,
                                      const ExperimentSpec& spec) const {
  if (atom_key == "t") return VarClass::Time;
  if (spec.geometry.count(atom_key)) return VarClass::Constant;
  const auto bracket = atom_key.find('[');
  const std::string sym = atom_key.substr(0, bracket);
  if (is_observable_symbol(sym)) return VarClass::Dependent;
  const ConceptDef* c = find_concept(sym);
  if (c && (c->kind == ConceptKind::Intrinsic || c->kind == ConceptKind::UniversalConstant))
    return VarClass::Constant;
  throw KbError("classify_atom: '" + atom_key + "' has no algebraic class (expand first)");
}

std::vector<Poly> KnowledgeBase::law_polys(const LawDef& l, const std::string& experiment) {
  const ExperimentSpec* spec = find_experiment(experiment);
  if (!spec) throw KbError("law_polys: unknown experiment " + experiment);
  VarTable& vars = experiment_vars(experiment);
  auto classify = [&](const std::string& key) { return classify_atom(key, *spec); };

  std::vector<ExprPtr> exprs;
  if (l.general) {
    const ConceptDef* c = find_concept(l.subject_concept);
    if (!c) throw KbError("law_polys: unknown concept " + l.subject_concept);
    exprs = specialize(*c, spec->objects);
  } else {
    exprs = {l.subject_expr};
  }

  std::vector<Poly> out;
  for (const ExprPtr& e : exprs) {
    const ExprPtr flat = expand_for_algebra(e, *this, spec->objects);
    RationalFn r = expr_to_rational(flat, vars, classify);
    if (l.kind == LawKind::Conserved) r = r.total_derivative();
    Poly p = r.num;
    if (!p.is_zero() && !p.is_ground()) out.push_back(p.primitive());
  }
  return out;
}

CharSet KnowledgeBase::reduction_basis(const std::string& experiment,
                                       const std::set<std::string>& scope,
                                       const std::string& excluded_law) {
  std::string key = experiment + "||";
  for (const auto& s : scope) key += s + ",";
  key += "||" + excluded_law;
  auto hit = basis_cache_.find(key);
  if (hit != basis_cache_.end()) return hit->second;

  const ExperimentSpec* spec = find_experiment(experiment);
  if (!spec) throw KbError("reduction_basis: unknown experiment " + experiment);
  VarTable& vars = experiment_vars(experiment);
  auto classify = [&](const std::string& k) { return classify_atom(k, *spec); };

  std::vector<Poly> polys;
  for (const std::string& ctext : spec->constraints) {
    Poly h = parse_poly(ctext, vars, classify);
    if (!h.is_zero() && !h.is_ground()) polys.push_back(h.primitive());
  }
  for (const LawDef& l : laws_) {
    if (!l.general || l.name == excluded_law) continue;
    if (!std::includes(l.scope.begin(), l.scope.end(), scope.begin(), scope.end()))
      continue;
    for (Poly& p : law_polys(l, experiment)) polys.push_back(std::move(p));
  }
  CharSet cs = autoreduce(std::move(polys));
  basis_cache_.emplace(key, cs);
  return cs;
}

Redundancy KnowledgeBase::check_general_redundancy(const LawDef& candidate,
                                                   const std::string& excluded_law) {
  std::map<std::string, std::vector<Poly>> specialized;
  std::map<std::string, CharSet> bases;
  const std::string excl = excluded_law.empty() ? candidate.name : excluded_law;
  for (const std::string& exp : candidate.scope) {
    specialized[exp] = law_polys(candidate, exp);
    bases[exp] = reduction_basis(exp, candidate.scope, excl);
  }
  return reduce_general_law(specialized, bases);
}

LawOutcome KnowledgeBase::record_law(LawDef l) {
  LawOutcome out;
  if (l.scope.empty()) {
    out.detail = "law has empty scope";
    return out;
  }
  if (l.name.empty()) l.name = next_law_name();
  if (find_law(l.name)) {
    out.detail = "law name already recorded";
    return out;
  }
  if (l.general && !find_concept(l.subject_concept))
    throw KbError("record_law: unknown subject concept " + l.subject_concept);

  for (const std::string& exp : l.scope) {
    LawProvenance prov;
    const bool have = l.origins.count(exp) > 0;
    if (!validate_law(l, exp, nullptr, have ? nullptr : &prov)) {
      out.detail = "validation failed in " + exp;
      return out;
    }
    if (!have) l.origins[exp] = prov;
  }

  if (l.general) {
    if (check_general_redundancy(l, l.name) == Redundancy::Redundant) {
      out.detail = "redundant against existing general laws";
      return out;
    }
  }

  out.name = l.name;
  const bool general = l.general;
  laws_.push_back(std::move(l));
  basis_cache_.clear();
  out.accepted = true;
  if (general) evict_redundant_after(laws_.back(), out);
  return out;
}

void KnowledgeBase::evict_redundant_after(const LawDef& committed, LawOutcome& out) {
  // existing general laws whose scope the new law covers, most complex first
  std::vector<std::string> order;
  for (const LawDef& l : laws_) {
    if (!l.general || l.name == committed.name) continue;
    if (std::includes(committed.scope.begin(), committed.scope.end(), l.scope.begin(),
                      l.scope.end()))
      order.push_back(l.name);
  }
  std::sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) {
    const ConceptDef* ca = find_concept(find_law(a)->subject_concept);
    const ConceptDef* cb = find_concept(find_law(b)->subject_concept);
    const int xa = ca ? complexity(ca->body) : 0;
    const int xb = cb ? complexity(cb->body) : 0;
    if (xa != xb) return xa > xb;
    return a < b;
  });
  for (const std::string& name : order) {
    const LawDef* l = find_law(name);
    if (!l) continue;
    if (check_general_redundancy(*l, name) == Redundancy::Redundant) {
      laws_.erase(std::remove_if(laws_.begin(), laws_.end(),
                                 [&](const LawDef& x) { return x.name == name; }),
                  laws_.end());
      basis_cache_.clear();
      out.evicted.push_back(name);
    }
  }
}

LawOutcome KnowledgeBase::widen_scope(const std::string& law_name,
                                      const std::string& experiment) {
  LawOutcome out;
  out.name = law_name;
  LawDef* target = nullptr;
  for (auto& l : laws_)
    if (l.name == law_name) target = &l;
  if (!target) throw KbError("widen_scope: unknown law " + law_name);
  if (target->scope.count(experiment)) {
    out.accepted = true;
    out.detail = "already in scope";
    return out;
  }
  LawProvenance prov;
  if (!validate_law(*target, experiment, nullptr, &prov)) {
    out.detail = "validation failed in " + experiment;
    return out;  // law unchanged
  }
  if (target->general) {
    LawDef widened = *target;
    widened.scope.insert(experiment);
    if (check_general_redundancy(widened, law_name) == Redundancy::Redundant) {
      out.detail = "redundant at widened scope";
      return out;
    }
  }
  target->scope.insert(experiment);
  target->origins[experiment] = prov;
  basis_cache_.clear();
  out.accepted = true;
  if (target->general) evict_redundant_after(*target, out);
  return out;
}

// ---------------------------------------------------------------------------
// persistence

std::string KnowledgeBase::to_text() const {
  std::ostringstream os;
  os << "physlaw-kb v1\n";
  os << "seed " << measurement_seed_ << "\n";
  os << "policy " << fmt17(policy_.chi2_confidence) << " " << fmt17(policy_.zero_sigma)
     << " " << fmt17(policy_.bad_fraction) << " " << policy_.n_stencil << " "
     << fmt17(policy_.k_sys) << " " << fmt17(policy_.exact_floor) << "\n";
  os << "counters " << concept_counter_ << " " << law_counter_ << "\n";
  for (const std::string& sym : order_) {
    const ConceptRecord& rec = concepts_.at(sym);
    if (is_observable_symbol(sym) || sym == "t") continue;  // builtins
    os << "concept " << sym << " | trial " << rec.def.trial << " | exp "
       << (rec.def.source_experiment.empty() ? "-" : rec.def.source_experiment)
       << " | suspect " << (rec.suspect ? 1 : 0) << " :: " << print_concept(rec.def)
       << "\n";
  }
  for (const LawDef& l : laws_) {
    os << "law " << l.name << " | trial " << l.trial << " | general "
       << (l.general ? 1 : 0) << " :: " << print_law(l) << "\n";
    for (const auto& [exp, prov] : l.origins) {
      os << "origin " << l.name << " | " << exp << " | seed " << prov.seed << " | params";
      for (const auto& [k, v] : prov.params) os << " " << k << "=" << fmt17(v);
      os << "\n";
    }
  }
  for (const auto& [key, value] : memo_) {
    std::string one = value.to_columnar({});
    if (!one.empty() && one.back() == '\n') one.pop_back();
    os << "memo " << key << " :: " << one << "\n";
  }
  os << "end\n";
  return os.str();
}

void KnowledgeBase::persist(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw KbError("persist: cannot open " + tmp);
    f << to_text();
    if (!f.good()) throw KbError("persist: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

KnowledgeBase KnowledgeBase::from_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "physlaw-kb v1")
    throw KbError("load: bad header (expected 'physlaw-kb v1')");

  DataPolicy policy;
  uint64_t seed = 0;
  int ccounter = 0, lcounter = 0;
  struct PendingConcept {
    std::string symbol;
    int trial;
    std::string exp;
    bool suspect;
    std::string decl;
  };
  std::vector<PendingConcept> pending_concepts;
  struct PendingLaw {
    std::string name;
    int trial;
    bool general;
    std::string decl;
  };
  std::vector<PendingLaw> pending_laws;
  std::vector<std::pair<std::string, std::string>> pending_origins;  // (meta, -)
  std::vector<std::pair<std::string, std::string>> pending_memo;
  bool saw_end = false;

  auto meta_fields = [](const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
      const auto bar = s.find('|', start);
      std::string f = s.substr(start, bar == std::string::npos ? bar : bar - start);
      // trim
      const auto b = f.find_first_not_of(' ');
      const auto e = f.find_last_not_of(' ');
      out.push_back(b == std::string::npos ? "" : f.substr(b, e - b + 1));
      if (bar == std::string::npos) break;
      start = bar + 1;
    }
    return out;
  };

  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line == "end") {
      saw_end = true;
      break;
    }
    std::istringstream ls(line);
    std::string head;
    ls >> head;
    if (head == "seed") {
      ls >> seed;
    } else if (head == "policy") {
      ls >> policy.chi2_confidence >> policy.zero_sigma >> policy.bad_fraction >>
          policy.n_stencil >> policy.k_sys >> policy.exact_floor;
    } else if (head == "counters") {
      ls >> ccounter >> lcounter;
    } else if (head == "concept" || head == "law" || head == "origin" || head == "memo") {
      const auto sep = line.find(" :: ");
      std::string meta = line;
      std::string payload;
      if (sep != std::string::npos) {
        meta = line.substr(0, sep);
        payload = line.substr(sep + 4);
      }
      if (head == "concept") {
        const auto fields = meta_fields(meta.substr(8));
        if (fields.size() < 4 || payload.empty()) throw KbError("load: malformed concept line");
        PendingConcept pc;
        pc.symbol = fields[0];
        pc.trial = std::stoi(fields[1].substr(6));
        pc.exp = fields[2].substr(4);
        if (pc.exp == "-") pc.exp.clear();
        pc.suspect = fields[3].substr(8) == "1";
        pc.decl = payload;
        pending_concepts.push_back(std::move(pc));
      } else if (head == "law") {
        const auto fields = meta_fields(meta.substr(4));
        if (fields.size() < 3 || payload.empty()) throw KbError("load: malformed law line");
        PendingLaw pl;
        pl.name = fields[0];
        pl.trial = std::stoi(fields[1].substr(6));
        pl.general = fields[2].substr(8) == "1";
        pl.decl = payload;
        pending_laws.push_back(std::move(pl));
      } else if (head == "origin") {
        pending_origins.emplace_back(meta.substr(7), "");
      } else {
        if (payload.empty()) throw KbError("load: malformed memo line");
        std::string key;
        std::istringstream ms(meta.substr(5));
        ms >> key;
        pending_memo.emplace_back(key, payload);
      }
    } else {
      throw KbError("load: unknown record '" + head + "'");
    }
  }
  if (!saw_end) throw KbError("load: truncated file (missing end marker)");

  KnowledgeBase kb(policy, seed);
  for (const auto& pc : pending_concepts) {
    ConceptDef def = parse_concept(pc.decl);
    if (def.symbol != pc.symbol) throw KbError("load: concept symbol mismatch");
    def.trial = pc.trial;
    def.source_experiment = pc.exp;
    ConceptRecord rec;
    rec.def = std::move(def);
    rec.suspect = pc.suspect;
    kb.concepts_.emplace(pc.symbol, std::move(rec));
    kb.order_.push_back(pc.symbol);
  }
  for (const auto& pl : pending_laws) {
    LawDef def = parse_law(pl.decl);
    def.name = pl.name;
    def.trial = pl.trial;
    def.general = pl.general;
    if (def.general) {
      if (def.subject_expr->kind != NodeKind::Atom)
        throw KbError("load: general law subject must be a concept symbol");
      def.subject_concept = def.subject_expr->symbol;
      def.subject_expr = nullptr;
    }
    kb.laws_.push_back(std::move(def));
  }
  for (const auto& [meta, _] : pending_origins) {
    std::istringstream ms(meta);
    std::string law_name, bar, exp;
    ms >> law_name >> bar >> exp;
    std::string tok;
    LawProvenance prov;
    ms >> bar >> tok;  // "| seed"
    if (tok != "seed") throw KbError("load: malformed origin line");
    ms >> prov.seed;
    ms >> bar >> tok;  // "| params"
    while (ms >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      prov.params[tok.substr(0, eq)] = std::stod(tok.substr(eq + 1));
    }
    bool found = false;
    for (auto& l : kb.laws_) {
      if (l.name != law_name) continue;
      l.origins[exp] = prov;
      found = true;
    }
    if (!found) throw KbError("load: origin for unknown law " + law_name);
  }
  for (const auto& [key, payload] : pending_memo)
    kb.memo_[key] = MeasuredValue::parse_columnar(payload);
  kb.concept_counter_ = ccounter;
  kb.law_counter_ = lcounter;
  return kb;
}

KnowledgeBase KnowledgeBase::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw KbError("load: cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return from_text(buf.str());
}

}  // namespace physlaw
