#pragma once

#include "physlaw/expr.hpp"
#include "physlaw/poly.hpp"

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace physlaw {

// Auto-reduced, ranking-sorted characteristic set. At most one member per
// dependent variable; ground polynomials are excluded.
using CharSet = std::vector<Poly>;

// One reduction step for the termination trace: the targeted indeterminate
// and the degree being eliminated. Steps strictly descend in ranking order.
struct ReductionStep {
  Indet target;
  int degree;
};

// Full Ritt reduction: repeatedly prolongs members of cs to match the highest
// reducible derivative of p and takes pseudo-remainders until no member's
// leader (or a prolongation of it) divides anything left. Deterministic under
// the fixed orderly ranking. A zero remainder places p in the ideal generated
// by cs saturated at initials and separants.
Poly ritt_reduce(const Poly& p, const CharSet& cs,
                 std::vector<ReductionStep>* trace = nullptr);

// Algebraic pseudo-remainder of f by g regarded as univariate in v.
Poly pseudo_remainder(Poly f, const Poly& g, const Indet& v);

// Auto-reduction: returns a set in which no member is Ritt-reducible by the
// others, generating the same reduction behavior on the inputs. Idempotent.
CharSet autoreduce(std::vector<Poly> polys);

// The two-step minimal-representation loop: equations are visited in order of
// increasing complexity (ties broken by canonical polynomial order) and kept
// iff they do not reduce to zero modulo the set accumulated so far.
std::vector<Poly> minimal_representation(const std::vector<std::pair<Poly, int>>& eqs);

enum class Redundancy : uint8_t { Novel, Redundant };

// Bridge from the DSL to the differential-polynomial ring. The expression
// must be fully expanded (observables, intrinsic constants, numbers); D[P]/D[Q]
// maps to total derivatives via the quotient d(P)/dt / d(Q)/dt. Atoms are
// registered under their printed form with the class the callback returns.
RationalFn expr_to_rational(const ExprPtr& e, VarTable& vars,
                            const std::function<VarClass(const std::string&)>& classify);

// A candidate general law, specialized per experiment in its claimed scope,
// is redundant iff every specialization reduces to zero against that
// experiment's basis of wider-scope laws and geometry constraints.
Redundancy reduce_general_law(const std::map<std::string, std::vector<Poly>>& specialized,
                              const std::map<std::string, CharSet>& basis_per_experiment);

}  // namespace physlaw
