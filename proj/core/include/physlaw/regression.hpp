#pragma once

#include "physlaw/eval.hpp"
#include "physlaw/expr.hpp"
#include "physlaw/kb.hpp"

#include <optional>
#include <vector>

namespace physlaw {

struct Verdict {
  enum class Result : uint8_t { Accepted, Rejected, Inconclusive };
  Result result = Result::Rejected;
  double chi2 = 0.0;
  MeasuredValue value;
};

// Statistical check of one relation: a Zero relation must normalize to the
// Zero variant, a Conserved relation to Const (identically-zero "conserved"
// quantities are rejected as trivial). Err evaluations are inconclusive.
Verdict validate_relation(const ExprPtr& expr, const ExperimentData& data,
                          ConceptStore& store, LawKind kind, WorkCounter* work = nullptr,
                          const DataPolicy& policy = {});

struct RelationCandidate {
  LawKind kind = LawKind::Conserved;
  ExprPtr expr;  // fitted coefficients embedded as rational literals
  double chi2 = 0.0;
  bool accepted = false;
  int complexity_score = 0;
};

struct SearchResult {
  std::vector<RelationCandidate> candidates;  // sorted by complexity
  bool complete = true;                       // false when the budget ran out
};

// Elementary-ansatz search over the selected expressions: constancy of single
// expressions, derivative probes d a / d b, pairwise linear relations via
// value ratios, and two-term relations over degree <= 3 monomials via
// derivative ratios. Coefficients are fitted, rationalized and validated.
SearchResult ansatz_search(const std::vector<ExprPtr>& exprs, const ExperimentData& data,
                           ConceptStore& store, WorkCounter* budget = nullptr,
                           const DataPolicy& policy = {});

// Feature matrix over the usable (good-everywhere) time points.
struct FeatureMatrix {
  std::vector<ExprPtr> columns;
  std::vector<std::vector<double>> mean;  // [row][col]
  std::vector<std::vector<double>> std;   // [row][col]
  std::size_t rows() const { return mean.size(); }
  std::size_t cols() const { return columns.size(); }
};

// Builds the matrix from series-valued expressions; Err and constant columns
// are dropped (their relations belong to the ansatz stage).
FeatureMatrix build_features(const std::vector<ExprPtr>& exprs, const ExperimentData& data,
                             ConceptStore& store, WorkCounter* work = nullptr,
                             const DataPolicy& policy = {});

// Null-space relation mining: singular directions of the standardized matrix
// below the noise floor become linear relation candidates, refit by weighted
// least squares around the strongest column, pruned at 3 sigma and validated.
std::vector<RelationCandidate> pca_relations(const FeatureMatrix& f,
                                             const ExperimentData& data, ConceptStore& store,
                                             int k_max, WorkCounter* work = nullptr,
                                             const DataPolicy& policy = {});

// A candidate additive term for law extension: a one-object template summed
// over every object of one type (the summation concept it would become).
struct TermSpec {
  std::string sum_type;  // e.g. "Spring"
  std::string sum_var;   // bound variable of the template
  ExprPtr body;          // one-object template
};

// Per-experiment expansion of a term: the concrete sum over the roster
// (a zero literal when no object matches).
ExprPtr expand_term(const TermSpec& term, const std::vector<PhysObject>& roster);

// Plausible-reasoning extension of a failing general law: searches additions
// of up to two candidate terms with fitted coefficients so the modified law
// validates in the failing experiment and still holds across the previous
// scope (where absent terms evaluate to exact zero). The zero-term subset is
// tried first, so laws that already hold come back with a widened scope.
struct Extension {
  std::vector<std::pair<TermSpec, Rational>> terms;  // fitted additions
  std::set<std::string> scope;                       // old scope + failing exp
  bool unchanged = false;                            // no term was needed
};
std::optional<Extension> extend_general_law(const LawDef& law, const std::string& failing_exp,
                                            const std::vector<TermSpec>& candidate_terms,
                                            KnowledgeBase& kb, WorkCounter* budget = nullptr);

}  // namespace physlaw
