#pragma once

#include "physlaw/poly.hpp"

#include <map>
#include <string>
#include <vector>

namespace physlaw {

// Symbolic differential form: coefficient of dX per coordinate (order-0
// dependent variable). Zero coefficients are omitted.
struct DifferentialForm {
  std::map<int, RationalFn> coeffs;

  DifferentialForm operator+(const DifferentialForm& o) const;
  DifferentialForm operator-(const DifferentialForm& o) const;
  DifferentialForm scaled(const RationalFn& s) const;
  bool symbolically_zero() const;
  bool equals(const DifferentialForm& o) const;
  // Projective equality: equal up to one overall nonzero scale.
  bool proportional(const DifferentialForm& o) const;
  std::string to_string(const VarTable& vars) const;
};

// Tangent vector field with symbolic components.
struct VectorField {
  std::map<int, RationalFn> comps;
};

enum class ConstraintType : uint8_t { First, Second };

// Classified constraint system: eliminated forms, per-form type, reference
// vectors and the (symbolically inverted) pairing matrix H.
struct ConstraintSystem {
  const VarTable* vars = nullptr;
  std::vector<Poly> constraints;          // original h_i
  std::vector<int> cartesian;             // coordinate var ids
  std::vector<int> others;                // non-cartesian geometric var ids
  std::vector<DifferentialForm> forms;    // eliminated rows
  std::vector<ConstraintType> types;
  std::vector<int> second_var;            // pivot u per second-type row, -1 otherwise
  std::vector<VectorField> refs;
  std::vector<std::vector<RationalFn>> h_matrix;
  std::vector<std::vector<RationalFn>> h_inverse;
  RationalFn h_det;

  std::size_t size() const { return forms.size(); }
  // |det H| evaluated at a numeric configuration; near-zero means the
  // reference vectors degenerate there.
  double det_at(const std::function<double(const Indet&)>& point) const;
};

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Gaussian elimination over the differential forms of the constraints:
// second-type rows involve exactly one non-cartesian variable, first-type
// rows only cartesian differentials. Reference vectors are d/du for
// second-type rows and the cartesian gradient direction for first-type rows.
// Rank deficiencies raise GeometryError naming the offending constraint.
ConstraintSystem classify_constraints(const std::vector<Poly>& constraints,
                                      const std::vector<int>& cartesian_vars,
                                      const std::vector<int>& other_vars,
                                      const VarTable& vars);

// The plain differential df over the system's coordinates.
DifferentialForm differential(const RationalFn& f, const ConstraintSystem& cs);

// Constraint-aware gradient: df minus its projection onto the constraint
// forms, so that <v_i, Df> = 0 and D(h_i) = 0 for every constraint.
DifferentialForm constrained_gradient(const RationalFn& f, const ConstraintSystem& cs);

// Numeric cross-check of the symbolic path: evaluates the same formula with
// H inverted in floating point at one configuration.
std::map<int, double> numeric_gradient(const RationalFn& f, const ConstraintSystem& cs,
                                       const std::function<double(const Indet&)>& point);

}  // namespace physlaw
