#pragma once

#include "physlaw/experiment.hpp"
#include "physlaw/expr.hpp"
#include "physlaw/measured.hpp"

#include <string>
#include <vector>

namespace physlaw {

class EvalError : public UsageError {
 public:
  using UsageError::UsageError;
};

class BudgetExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Deterministic work accounting: one unit per expression node evaluated.
struct WorkCounter {
  uint64_t used = 0;
  uint64_t budget = UINT64_MAX;

  void charge(uint64_t n = 1) {
    used += n;
    if (used > budget) throw BudgetExhausted("work budget exhausted");
  }
  uint64_t remaining() const { return budget > used ? budget - used : 0; }
};

// Resolution interface the evaluator uses to look up concepts and intrinsic
// measurements; implemented by the knowledge base.
class ConceptStore {
 public:
  virtual ~ConceptStore() = default;
  virtual const ConceptDef* find_concept(const std::string& symbol) const = 0;
  // Measured (memoized) value of an intrinsic concept or universal constant
  // for the given target object.
  virtual MeasuredValue intrinsic_value(const ConceptDef& c, const PhysObject& target) = 0;
};

// Recovers an object's hidden property bundle from a run's provenance so a
// measurement experiment can receive "the same object".
PhysObject resolve_object(const ExperimentData& data, int object_id);

// Bottom-up evaluation of an expression against one experiment's data.
// Unresolvable symbols and arity violations are usage errors; numeric
// failures come back as the Err variant.
MeasuredValue eval(const ExprPtr& e, const ExperimentData& data, ConceptStore& store,
                   WorkCounter* work = nullptr, const DataPolicy& policy = {});

// One expression per admissible injective assignment of roster objects to the
// concept's typed slots. Summation concepts and universal constants yield
// exactly one expression.
std::vector<ExprPtr> specialize(const ConceptDef& c, const std::vector<PhysObject>& roster);

// Replaces concrete object ids by universally quantified typed variables; a
// sum of one template instantiated over every object of one type becomes a
// Summation concept.
ConceptDef generalize(const ExprPtr& e, const std::vector<PhysObject>& roster);

// Expands concept atoms recursively until only observables, intrinsic
// concepts, universal constants and numbers remain. Intrinsic and universal
// atoms are left in place (they act as symbolic constants downstream).
ExprPtr expand_for_algebra(const ExprPtr& e, const ConceptStore& store,
                           const std::vector<PhysObject>& roster);

}  // namespace physlaw
