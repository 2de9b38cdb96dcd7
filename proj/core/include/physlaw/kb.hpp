#pragma once

#include "physlaw/diffalg.hpp"
#include "physlaw/eval.hpp"
#include "physlaw/experiment.hpp"
#include "physlaw/expr.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace physlaw {

class KbError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RegisterOutcome : uint8_t { Added, Duplicate, Unmeasurable };

struct RegisterResult {
  RegisterOutcome outcome;
  std::string symbol;  // the new symbol (Added) or the matching existing one
};

struct LawOutcome {
  bool accepted = false;
  std::string name;
  std::string detail;  // failure reason or eviction notes
  std::vector<std::string> evicted;
};

// The three-layer theory base: symbols, concepts, laws, plus the intrinsic
// measurement memo and the per-experiment reduction bases. Single writer; all
// mutation goes through the registration calls below.
class KnowledgeBase : public ConceptStore {
 public:
  explicit KnowledgeBase(DataPolicy policy = {}, uint64_t measurement_seed = 0xfeedbeef);

  // ---- symbols & concepts ---------------------------------------------
  // Dedup against every registered concept on the fixed probe suite: a
  // candidate matching an existing concept within combined 3 sigma on every
  // probe value is a duplicate. A candidate that evaluates to Err on every
  // probe is rejected as unmeasurable.
  RegisterResult register_concept(ConceptDef c, int trial = -1,
                                  const std::string& source_experiment = "");

  const ConceptDef* find_concept(const std::string& symbol) const override;
  MeasuredValue intrinsic_value(const ConceptDef& c, const PhysObject& target) override;
  bool is_suspect(const std::string& symbol) const;

  // registration order
  std::vector<const ConceptDef*> concepts() const;
  // observables + concepts, as registered in the symbols layer
  std::vector<std::string> symbols() const;

  // ---- laws -------------------------------------------------------------
  // Validates in every scoped experiment; general laws additionally pass the
  // redundancy reduction, and a commit can evict now-redundant narrower laws.
  LawOutcome record_law(LawDef l);
  LawOutcome widen_scope(const std::string& law_name, const std::string& experiment);
  const std::vector<LawDef>& laws() const { return laws_; }
  const LawDef* find_law(const std::string& name) const;

  // Re-evaluates a law's subject in one experiment (fresh deterministic
  // simulation unless data is supplied). Conserved laws accept Const or Zero;
  // Zero laws require Zero.
  bool validate_law(const LawDef& l, const std::string& experiment,
                    const ExperimentData* data = nullptr, LawProvenance* prov = nullptr);

  // Specializes a law's subject in an experiment and converts to differential
  // polynomials (Conserved laws via their total time derivative).
  std::vector<Poly> law_polys(const LawDef& l, const std::string& experiment);
  // Reduction basis for a candidate of the given scope in one experiment:
  // wider-or-equal-scope general laws (minus the excluded one) plus the
  // experiment's geometry constraints.
  CharSet reduction_basis(const std::string& experiment,
                          const std::set<std::string>& scope,
                          const std::string& excluded_law);
  // Runs the redundancy check for a candidate general law.
  Redundancy check_general_redundancy(const LawDef& candidate,
                                      const std::string& excluded_law = "");

  // ---- persistence --------------------------------------------------------
  void persist(const std::string& path) const;
  std::string to_text() const;
  static KnowledgeBase load(const std::string& path);
  static KnowledgeBase from_text(const std::string& text);

  const DataPolicy& policy() const { return policy_; }
  uint64_t measurement_seed() const { return measurement_seed_; }
  std::size_t concept_count() const { return order_.size(); }
  std::size_t law_count() const { return laws_.size(); }

  // evaluation helper bound to this KB
  MeasuredValue evaluate(const ExprPtr& e, const ExperimentData& data,
                         WorkCounter* work = nullptr);

  // per-experiment variable table used for algebraic conversion (stable,
  // grows monotonically, deterministic)
  VarTable& experiment_vars(const std::string& experiment);

 private:
  struct ConceptRecord {
    ConceptDef def;
    bool suspect = false;
  };

  std::string next_concept_symbol();
  std::string next_law_name();
  const std::vector<MeasuredValue>& probe_signature(const std::string& symbol);
  std::vector<MeasuredValue> compute_probe_signature(const ConceptDef& c);
  VarClass classify_atom(const std::string& atom_key, const ExperimentSpec& spec) const;
  void evict_redundant_after(const LawDef& committed, LawOutcome& out);

  DataPolicy policy_;
  uint64_t measurement_seed_;
  int concept_counter_ = 0;
  int law_counter_ = 0;
  std::map<std::string, ConceptRecord> concepts_;
  std::vector<std::string> order_;  // concept registration order
  std::vector<LawDef> laws_;
  std::map<std::string, MeasuredValue> memo_;  // "symbol|fingerprint" -> Const
  std::map<std::string, std::vector<MeasuredValue>> probe_cache_;
  std::map<std::string, VarTable> exp_vars_;
  std::map<std::string, CharSet> basis_cache_;
};

}  // namespace physlaw
