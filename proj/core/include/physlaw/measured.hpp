#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace physlaw {

// Tunables of the data algebra. Defaults apply everywhere unless a run
// config overrides them.
struct DataPolicy {
  double chi2_confidence = 0.999;  // constancy-test confidence level
  double zero_sigma = 3.0;         // Const demotes to Zero when |mean| <= zero_sigma*std
  double bad_fraction = 0.25;      // series degrades to Err past this fraction of bad points
  int n_stencil = 5;               // centered-difference stencil size (odd, >= 3)
  double k_sys = 3.0;              // systematic-vs-chance error ratio that marks a point bad
  double exact_floor = 1e-8;       // resolution floor, relative to local data scale
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BinaryOp : uint8_t { Add, Sub, Mul, Div };

// Per-point collapsed series: mean and standard error of the mean at each of
// the N grid points, plus the bad-point mask.
struct SeriesData {
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<uint8_t> bad;
  int repeat_time = 1;

  std::size_t n() const { return mean.size(); }
  std::size_t bad_count() const;
};

// Tagged union of the four data formats the engine computes with. Values are
// immutable; every operation returns a fresh, normalized value. Numeric
// failure is encoded as the Err variant, never thrown.
class MeasuredValue {
 public:
  enum class Kind : uint8_t { Zero, Const, Series, Err };

  MeasuredValue() : kind_(Kind::Err) {}

  static MeasuredValue zero(double std_dev);
  static MeasuredValue constant(double mean, double std_dev);
  // Takes collapsed per-point statistics; applies normalization.
  static MeasuredValue series(SeriesData s, const DataPolicy& policy = {});
  // Collapses repeat_time x n raw observations (row-major, samples[r*n + i])
  // to per-point mean and standard error, then normalizes.
  static MeasuredValue series_from_samples(const std::vector<double>& samples,
                                           int repeat_time, std::size_t n,
                                           const DataPolicy& policy = {});
  static MeasuredValue err();

  Kind kind() const { return kind_; }
  bool is_err() const { return kind_ == Kind::Err; }
  bool is_series() const { return kind_ == Kind::Series; }
  bool is_const() const { return kind_ == Kind::Const; }
  bool is_zero() const { return kind_ == Kind::Zero; }

  double mean() const;                // Zero (0.0) and Const
  double std_dev() const;             // Zero and Const
  const SeriesData& series() const;   // Series only

  std::string to_string() const;      // human-readable one-liner

  // Columnar text: one "time mean std bad" row per point (Series), or a
  // single-line record for scalar variants. Round-trips via parse_columnar.
  std::string to_columnar(const std::vector<double>& grid) const;
  static MeasuredValue parse_columnar(const std::string& text);

 private:
  Kind kind_;
  double mean_ = 0.0;
  double std_ = 0.0;
  SeriesData series_;
};

// Normalization: Series with too many bad points -> Err; constant-behaved
// Series -> Const; Const consistent with zero -> Zero. Idempotent.
MeasuredValue normalize(const MeasuredValue& v, const DataPolicy& policy = {});

// First-order (quadrature) error propagation through the four operations.
// Any Err operand forces Err; division by a Zero (or zero-consistent
// denominator) yields Err.
MeasuredValue combine(const MeasuredValue& a, const MeasuredValue& b, BinaryOp op,
                      const DataPolicy& policy = {});

// chi^2 constancy test on the good points of a series. Returns the pooled
// Const when the series is consistent with a constant at the given
// confidence, nullopt otherwise. All-bad input is a usage error.
std::optional<MeasuredValue> chi2_const_test(const SeriesData& s, double confidence);

// The raw chi^2 statistic and threshold behind the test, for diagnostics.
struct Chi2Result {
  double statistic = 0.0;
  double threshold = 0.0;
  double central = 0.0;
  double pooled_std = 0.0;
  std::size_t dof = 0;
};
Chi2Result chi2_const_statistic(const SeriesData& s, double confidence);

// N-point centered-difference derivative d(num)/d(den) with noise
// propagation. den must be strictly monotonic over its good points; both
// series live on the same grid. Stencil points whose estimated systematic
// error exceeds k_sys times the propagated chance error, and which survive no
// re-estimation, are marked bad.
MeasuredValue differentiate(const MeasuredValue& num, const MeasuredValue& den,
                            const DataPolicy& policy = {});

// Finite-difference weights for the m-th derivative at x0 over the given
// nodes (Fornberg's recurrence). Exact on polynomials of degree < nodes.size().
std::vector<double> fd_weights(const std::vector<double>& nodes, double x0, int order);

}  // namespace physlaw
