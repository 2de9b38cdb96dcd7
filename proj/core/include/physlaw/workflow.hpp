#pragma once

#include "physlaw/config.hpp"
#include "physlaw/kb.hpp"
#include "physlaw/recommend.hpp"
#include "physlaw/regression.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace physlaw {

struct TrialRecord {
  int index = 0;
  int era = 0;
  std::string experiment;
  uint64_t seed = 0;
  std::vector<std::string> concepts;  // selected symbols
  int candidates = 0;
  std::vector<std::string> deltas;  // committed kb changes, human readable
  double reward = 0.0;
  uint64_t work_used = 0;
  bool truncated = false;

  std::string to_line() const;  // line-delimited structured record
};

enum class LawClass : uint8_t { ParameterIndependent, ObjectIntrinsic, ParameterDependent };

struct Classification {
  LawClass cls = LawClass::ParameterDependent;
  bool constant_invariant = false;       // universal-constant candidate
  std::vector<std::string> intrinsic_objects;  // roster names owning the value
};

struct RunSummary {
  int trials = 0;
  int eras = 0;
  std::size_t concepts = 0;
  std::size_t laws = 0;
  // (category, symbol-or-name, first commit trial)
  std::vector<std::tuple<std::string, std::string, int>> milestones;
  std::string to_text() const;
};

// Rough functional category of a committed concept, used by the milestone
// table (velocity-like, acceleration-like, mass-like, ...).
std::string concept_category(const ConceptDef& def, const KnowledgeBase& kb);

// The four-step trial orchestrator: select, discover, simplify/classify,
// extract. Owns the KB and the recommendation engine; single writer.
class DiscoveryWorkflow {
 public:
  explicit DiscoveryWorkflow(const RunConfig& cfg);

  // resumes from a checkpoint produced by run_discovery
  DiscoveryWorkflow(const RunConfig& cfg, const std::string& checkpoint_text);

  std::vector<std::string> feasible_experiments() const;
  TrialRecord run_trial();

  Classification classify_law(LawKind kind, const ExprPtr& subject,
                              const std::string& experiment);

  // Runs trials under era control until max_trials or exhaustion; writes
  // config echo, trial log, kb file, summary and checkpoints to output_dir.
  RunSummary run_discovery();

  std::string checkpoint_text() const;

  KnowledgeBase& kb() { return kb_; }
  const KnowledgeBase& kb() const { return kb_; }
  RecommendationEngine& engine() { return engine_; }
  int trial_index() const { return trial_index_; }
  const std::vector<TrialRecord>& records() const { return records_; }

 private:
  struct GeometryContext;

  std::vector<ExprPtr> gradient_candidates(const std::string& experiment,
                                           const std::vector<std::string>& symbols);
  std::vector<TermSpec> extension_terms(const std::vector<std::string>& symbols,
                                        const std::string& experiment) const;
  std::vector<RelationCandidate> simplify_candidates(
      std::vector<RelationCandidate> candidates, const std::string& experiment);
  // extraction + generalization of one surviving relation; returns the reward
  double commit_finding(const RelationCandidate& cand, const std::string& experiment,
                        const ExperimentData& data, TrialRecord& rec, WorkCounter* work);
  bool propose_general(const ExprPtr& expr, LawKind kind, const std::string& experiment,
                       TrialRecord& rec, double& reward, WorkCounter* work);
  void write_outputs(const RunSummary& summary) const;

  RunConfig cfg_;
  KnowledgeBase kb_;
  RecommendationEngine engine_;
  int trial_index_ = 0;
  std::map<std::string, uint64_t> trial_cost_;  // last work units per experiment
  std::vector<TrialRecord> records_;
};

}  // namespace physlaw
