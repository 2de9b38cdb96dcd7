#include "physlaw/measured.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace physlaw {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool finite(double v) { return std::isfinite(v); }

}  // namespace

std::size_t SeriesData::bad_count() const {
  std::size_t c = 0;
  for (uint8_t b : bad) c += b != 0;
  return c;
}

MeasuredValue MeasuredValue::zero(double std_dev) {
  if (std_dev < 0 || !finite(std_dev)) return err();
  MeasuredValue v;
  v.kind_ = Kind::Zero;
  v.std_ = std_dev;
  return v;
}

MeasuredValue MeasuredValue::constant(double mean, double std_dev) {
  if (std_dev < 0 || !finite(mean) || !finite(std_dev)) return err();
  MeasuredValue v;
  v.kind_ = Kind::Const;
  v.mean_ = mean;
  v.std_ = std_dev;
  return v;
}

MeasuredValue MeasuredValue::err() { return MeasuredValue(); }

MeasuredValue MeasuredValue::series(SeriesData s, const DataPolicy& policy) {
  const std::size_t n = s.mean.size();
  if (n == 0 || s.std.size() != n || s.bad.size() != n) return err();
  for (std::size_t i = 0; i < n; ++i) {
    if (!finite(s.mean[i]) || !finite(s.std[i]) || s.std[i] < 0) s.bad[i] = 1;
  }
  MeasuredValue v;
  v.kind_ = Kind::Series;
  v.series_ = std::move(s);
  return normalize(v, policy);
}

MeasuredValue MeasuredValue::series_from_samples(const std::vector<double>& samples,
                                                 int repeat_time, std::size_t n,
                                                 const DataPolicy& policy) {
  if (repeat_time < 2 || samples.size() != static_cast<std::size_t>(repeat_time) * n)
    throw UsageError("series_from_samples: need repeat_time >= 2 and repeat_time*n samples");
  SeriesData s;
  s.mean.resize(n);
  s.std.resize(n);
  s.bad.assign(n, 0);
  s.repeat_time = repeat_time;
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int r = 0; r < repeat_time; ++r) sum += samples[static_cast<std::size_t>(r) * n + i];
    const double m = sum / repeat_time;
    double ss = 0.0;
    for (int r = 0; r < repeat_time; ++r) {
      const double d = samples[static_cast<std::size_t>(r) * n + i] - m;
      ss += d * d;
    }
    s.mean[i] = m;
    // standard error of the mean
    s.std[i] = std::sqrt(ss / (repeat_time - 1) / repeat_time);
  }
  return series(std::move(s), policy);
}

double MeasuredValue::mean() const {
  switch (kind_) {
    case Kind::Zero: return 0.0;
    case Kind::Const: return mean_;
    default: throw UsageError("mean(): value is not Zero/Const");
  }
}

double MeasuredValue::std_dev() const {
  if (kind_ != Kind::Zero && kind_ != Kind::Const)
    throw UsageError("std_dev(): value is not Zero/Const");
  return std_;
}

const SeriesData& MeasuredValue::series() const {
  if (kind_ != Kind::Series) throw UsageError("series(): value is not a Series");
  return series_;
}

std::string MeasuredValue::to_string() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Zero: os << "Zero(std=" << std_ << ")"; break;
    case Kind::Const: os << "Const(" << mean_ << " +- " << std_ << ")"; break;
    case Kind::Err: os << "Err"; break;
    case Kind::Series:
      os << "Series(n=" << series_.n() << ", bad=" << series_.bad_count() << ")";
      break;
  }
  return os.str();
}

std::string MeasuredValue::to_columnar(const std::vector<double>& grid) const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Zero: os << "zero " << fmt17(std_) << "\n"; break;
    case Kind::Const: os << "const " << fmt17(mean_) << " " << fmt17(std_) << "\n"; break;
    case Kind::Err: os << "err\n"; break;
    case Kind::Series: {
      if (grid.size() != series_.n())
        throw UsageError("to_columnar: grid length mismatch");
      os << "series " << series_.n() << " " << series_.repeat_time << "\n";
      for (std::size_t i = 0; i < series_.n(); ++i) {
        os << fmt17(grid[i]) << " " << fmt17(series_.mean[i]) << " "
           << fmt17(series_.std[i]) << " " << int(series_.bad[i]) << "\n";
      }
      break;
    }
  }
  return os.str();
}

MeasuredValue MeasuredValue::parse_columnar(const std::string& text) {
  std::istringstream is(text);
  std::string tag;
  is >> tag;
  if (tag == "err") return err();
  if (tag == "zero") {
    double s = 0;
    is >> s;
    if (!is) throw UsageError("parse_columnar: malformed zero record");
    return zero(s);
  }
  if (tag == "const") {
    double m = 0, s = 0;
    is >> m >> s;
    if (!is) throw UsageError("parse_columnar: malformed const record");
    MeasuredValue v;
    v.kind_ = Kind::Const;
    v.mean_ = m;
    v.std_ = s;
    return v;
  }
  if (tag == "series") {
    std::size_t n = 0;
    int repeat = 1;
    is >> n >> repeat;
    SeriesData s;
    s.repeat_time = repeat;
    s.mean.resize(n);
    s.std.resize(n);
    s.bad.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      double t, m, sd;
      int b;
      is >> t >> m >> sd >> b;
      if (!is) throw UsageError("parse_columnar: truncated series record");
      s.mean[i] = m;
      s.std[i] = sd;
      s.bad[i] = static_cast<uint8_t>(b);
    }
    MeasuredValue v;
    v.kind_ = Kind::Series;
    v.series_ = std::move(s);
    return v;  // stored form is already normalized; do not re-normalize here
  }
  throw UsageError("parse_columnar: unknown record tag '" + tag + "'");
}

Chi2Result chi2_const_statistic(const SeriesData& s, double confidence) {
  if (confidence <= 0.0 || confidence >= 1.0)
    throw UsageError("chi2_const_statistic: confidence must be in (0,1)");
  // resolution floor keeps exact (std=0) data testable
  double scale = 0.0;
  std::size_t n_good = 0;
  for (std::size_t i = 0; i < s.n(); ++i) {
    if (s.bad[i]) continue;
    scale = std::max(scale, std::abs(s.mean[i]));
    ++n_good;
  }
  if (n_good == 0) throw UsageError("chi2_const_statistic: all points bad");
  const double floor_std = 1e-15 * (scale + 1.0);

  double wsum = 0.0, wmean = 0.0;
  for (std::size_t i = 0; i < s.n(); ++i) {
    if (s.bad[i]) continue;
    const double sd = std::max(s.std[i], floor_std);
    const double w = 1.0 / (sd * sd);
    wsum += w;
    wmean += w * s.mean[i];
  }
  Chi2Result r;
  r.central = wmean / wsum;
  r.pooled_std = std::sqrt(1.0 / wsum);
  r.dof = n_good > 1 ? n_good - 1 : 1;
  double stat = 0.0;
  for (std::size_t i = 0; i < s.n(); ++i) {
    if (s.bad[i]) continue;
    const double sd = std::max(s.std[i], floor_std);
    const double d = (s.mean[i] - r.central) / sd;
    stat += d * d;
  }
  r.statistic = stat;
  boost::math::chi_squared dist(static_cast<double>(r.dof));
  r.threshold = boost::math::quantile(dist, confidence);
  return r;
}

std::optional<MeasuredValue> chi2_const_test(const SeriesData& s, double confidence) {
  const Chi2Result r = chi2_const_statistic(s, confidence);
  if (r.statistic < r.threshold)
    return MeasuredValue::constant(r.central, r.pooled_std);
  return std::nullopt;
}

MeasuredValue normalize(const MeasuredValue& v, const DataPolicy& policy) {
  switch (v.kind()) {
    case MeasuredValue::Kind::Err: return v;
    case MeasuredValue::Kind::Zero: return v;
    case MeasuredValue::Kind::Const:
      // constant consistent with zero collapses to Zero
      if (std::abs(v.mean()) <= policy.zero_sigma * v.std_dev())
        return MeasuredValue::zero(v.std_dev());
      return v;
    case MeasuredValue::Kind::Series: {
      const SeriesData& s = v.series();
      const std::size_t n = s.n();
      if (n == 0) return MeasuredValue::err();
      if (static_cast<double>(s.bad_count()) > policy.bad_fraction * static_cast<double>(n))
        return MeasuredValue::err();
      if (n - s.bad_count() >= 2) {
        if (auto c = chi2_const_test(s, policy.chi2_confidence))
          return normalize(*c, policy);
      }
      return v;
    }
  }
  return MeasuredValue::err();
}

namespace {

struct Gauss {
  double mean, var;
};

Gauss apply_op(const Gauss& a, const Gauss& b, BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return {a.mean + b.mean, a.var + b.var};
    case BinaryOp::Sub: return {a.mean - b.mean, a.var + b.var};
    case BinaryOp::Mul:
      // exact variance of a product of independent gaussians
      return {a.mean * b.mean,
              b.mean * b.mean * a.var + a.mean * a.mean * b.var + a.var * b.var};
    case BinaryOp::Div: {
      const double m = a.mean / b.mean;
      const double b2 = b.mean * b.mean;
      return {m, a.var / b2 + a.mean * a.mean * b.var / (b2 * b2)};
    }
  }
  return {0.0, 0.0};
}

bool div_denominator_zeroish(double mean, double sd, const DataPolicy& policy) {
  return std::abs(mean) <= policy.zero_sigma * sd;
}

}  // namespace

MeasuredValue combine(const MeasuredValue& a, const MeasuredValue& b, BinaryOp op,
                      const DataPolicy& policy) {
  using K = MeasuredValue::Kind;
  if (a.is_err() || b.is_err()) return MeasuredValue::err();

  const bool a_scalar = a.kind() == K::Zero || a.kind() == K::Const;
  const bool b_scalar = b.kind() == K::Zero || b.kind() == K::Const;

  if (op == BinaryOp::Div) {
    if (b.kind() == K::Zero) return MeasuredValue::err();
    if (b_scalar && div_denominator_zeroish(b.mean(), b.std_dev(), policy))
      return MeasuredValue::err();
  }

  if (a_scalar && b_scalar) {
    const Gauss g = apply_op({a.mean(), a.std_dev() * a.std_dev()},
                             {b.mean(), b.std_dev() * b.std_dev()}, op);
    if (!finite(g.mean) || !finite(g.var)) return MeasuredValue::err();
    MeasuredValue c = MeasuredValue::constant(g.mean, std::sqrt(g.var));
    return normalize(c, policy);
  }

  // at least one series: broadcast scalars pointwise
  const SeriesData* sa = a.is_series() ? &a.series() : nullptr;
  const SeriesData* sb = b.is_series() ? &b.series() : nullptr;
  if (sa && sb && sa->n() != sb->n())
    throw UsageError("combine: series grids have different lengths");
  const std::size_t n = sa ? sa->n() : sb->n();

  SeriesData out;
  out.mean.resize(n);
  out.std.resize(n);
  out.bad.assign(n, 0);
  out.repeat_time = sa ? sa->repeat_time : sb->repeat_time;

  for (std::size_t i = 0; i < n; ++i) {
    const bool bad_in = (sa && sa->bad[i]) || (sb && sb->bad[i]);
    const double am = sa ? sa->mean[i] : a.mean();
    const double asd = sa ? sa->std[i] : a.std_dev();
    const double bm = sb ? sb->mean[i] : b.mean();
    const double bsd = sb ? sb->std[i] : b.std_dev();
    if (bad_in) {
      out.bad[i] = 1;
      continue;
    }
    if (op == BinaryOp::Div && div_denominator_zeroish(bm, bsd, policy)) {
      out.bad[i] = 1;  // denominator indistinguishable from zero here
      continue;
    }
    const Gauss g = apply_op({am, asd * asd}, {bm, bsd * bsd}, op);
    if (!finite(g.mean) || !finite(g.var)) {
      out.bad[i] = 1;
      continue;
    }
    out.mean[i] = g.mean;
    out.std[i] = std::sqrt(g.var);
  }
  return MeasuredValue::series(std::move(out), policy);
}

std::vector<double> fd_weights(const std::vector<double>& nodes, double x0, int order) {
  // B. Fornberg, "Generation of finite difference formulas on arbitrarily
  // spaced grids", Math. Comp. 51 (1988).
  const int n = static_cast<int>(nodes.size()) - 1;
  const int m = order;
  if (n < m) throw UsageError("fd_weights: not enough nodes for derivative order");
  std::vector<std::vector<double>> c(static_cast<std::size_t>(n) + 1,
                                     std::vector<double>(static_cast<std::size_t>(m) + 1, 0.0));
  double c1 = 1.0;
  double c4 = nodes[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i <= n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = nodes[static_cast<std::size_t>(i)] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = nodes[static_cast<std::size_t>(i)] - nodes[static_cast<std::size_t>(j)];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] =
              c1 * (k * c[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(k - 1)] -
                    c5 * c[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(k)]) /
              c2;
        c[static_cast<std::size_t>(i)][0] =
            -c1 * c5 * c[static_cast<std::size_t>(i - 1)][0] / c2;
      }
      for (int k = mn; k >= 1; --k)
        c[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] =
            (c4 * c[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] -
             k * c[static_cast<std::size_t>(j)][static_cast<std::size_t>(k - 1)]) /
            c3;
      c[static_cast<std::size_t>(j)][0] = c4 * c[static_cast<std::size_t>(j)][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) w[i] = c[i][static_cast<std::size_t>(m)];
  return w;
}

namespace {

// Weighted least-squares polynomial fit over a window, centered/scaled for
// conditioning. Returns fitted values, the derivative at x0 and its variance.
struct LocalFit {
  double residual_rms = 0.0;
  double deriv_at_x0 = 0.0;
  double deriv_var = 0.0;
  bool ok = false;
};

LocalFit wls_poly_fit(const std::vector<double>& xs, const std::vector<double>& ys,
                      const std::vector<double>& sds, int degree, double x0,
                      double noise_floor) {
  LocalFit out;
  const int npts = static_cast<int>(xs.size());
  const int ncoef = degree + 1;
  if (npts < ncoef) return out;
  double xc = 0.0;
  for (double x : xs) xc += x;
  xc /= npts;
  double span = 0.0;
  for (double x : xs) span = std::max(span, std::abs(x - xc));
  if (span == 0.0) return out;

  Eigen::MatrixXd A(npts, ncoef);
  Eigen::VectorXd b(npts);
  Eigen::VectorXd wts(npts);
  for (int i = 0; i < npts; ++i) {
    const double sd = std::max(sds[static_cast<std::size_t>(i)], noise_floor);
    const double w = 1.0 / sd;
    wts(i) = w;
    double p = 1.0;
    const double u = (xs[static_cast<std::size_t>(i)] - xc) / span;
    for (int j = 0; j < ncoef; ++j) {
      A(i, j) = w * p;
      p *= u;
    }
    b(i) = w * ys[static_cast<std::size_t>(i)];
  }
  const Eigen::MatrixXd AtA = A.transpose() * A;
  const Eigen::VectorXd Atb = A.transpose() * b;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(AtA);
  if (ldlt.info() != Eigen::Success) return out;
  const Eigen::VectorXd coef = ldlt.solve(Atb);

  // residuals in data units
  double ss = 0.0;
  for (int i = 0; i < npts; ++i) {
    const double u = (xs[static_cast<std::size_t>(i)] - xc) / span;
    double p = 1.0, fit = 0.0;
    for (int j = 0; j < ncoef; ++j) {
      fit += coef(j) * p;
      p *= u;
    }
    const double r = ys[static_cast<std::size_t>(i)] - fit;
    ss += r * r;
  }
  out.residual_rms = std::sqrt(ss / npts);

  // derivative functional c^T beta at x0, plus variance via (A^T A)^-1
  const double u0 = (x0 - xc) / span;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(ncoef);
  double p = 1.0;
  for (int j = 1; j < ncoef; ++j) {
    g(j) = j * p / span;
    p *= u0;
  }
  out.deriv_at_x0 = 0.0;
  p = 1.0;
  for (int j = 1; j < ncoef; ++j) {
    out.deriv_at_x0 += coef(j) * j * p / span;
    p *= u0;
  }
  const Eigen::VectorXd cov_g = ldlt.solve(g);
  out.deriv_var = g.dot(cov_g);
  out.ok = out.deriv_var >= 0 && std::isfinite(out.deriv_at_x0);
  return out;
}

}  // namespace

MeasuredValue differentiate(const MeasuredValue& num, const MeasuredValue& den,
                            const DataPolicy& policy) {
  if (num.is_err() || den.is_err()) return MeasuredValue::err();
  if (!den.is_series())
    throw UsageError("differentiate: denominator must be a Series");
  // derivative of a constant is zero; scale its residual noise by the span
  // of the denominator
  if (num.is_zero() || num.is_const()) {
    const SeriesData& d = den.series();
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < d.n(); ++i) {
      if (d.bad[i]) continue;
      lo = std::min(lo, d.mean[i]);
      hi = std::max(hi, d.mean[i]);
    }
    const double span = (hi > lo) ? hi - lo : 1.0;
    return MeasuredValue::zero(num.std_dev() / span);
  }

  const SeriesData& f = num.series();
  const SeriesData& x = den.series();
  const std::size_t n = f.n();
  if (x.n() != n) throw UsageError("differentiate: series grids have different lengths");
  const int s = policy.n_stencil;
  if (s < 3 || s % 2 == 0) throw UsageError("differentiate: n_stencil must be odd and >= 3");

  std::vector<std::size_t> good;
  good.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (!f.bad[i] && !x.bad[i]) good.push_back(i);
  if (good.size() < static_cast<std::size_t>(s)) return MeasuredValue::err();

  // strict monotonicity of the denominator over good points
  bool inc = true, dec = true;
  for (std::size_t k = 1; k < good.size(); ++k) {
    const double d = x.mean[good[k]] - x.mean[good[k - 1]];
    inc &= d > 0;
    dec &= d < 0;
  }
  if (!inc && !dec)
    throw UsageError("differentiate: denominator is not strictly monotonic");

  SeriesData out;
  out.mean.assign(n, 0.0);
  out.std.assign(n, 0.0);
  out.bad.assign(n, 1);
  out.repeat_time = f.repeat_time;

  const std::size_t g = good.size();
  // map grid index -> rank among good points
  std::vector<std::size_t> rank(n, 0);
  for (std::size_t k = 0; k < g; ++k) rank[good[k]] = k;

  for (std::size_t i = 0; i < n; ++i) {
    if (f.bad[i] || x.bad[i]) continue;
    const std::size_t r = rank[i];
    // centered stencil of s good points, clamped at the boundaries
    std::size_t lo = r > static_cast<std::size_t>(s / 2) ? r - static_cast<std::size_t>(s / 2) : 0;
    lo = std::min(lo, g - static_cast<std::size_t>(s));
    std::vector<double> nodes(static_cast<std::size_t>(s)), vals(static_cast<std::size_t>(s)),
        sds(static_cast<std::size_t>(s));
    for (int j = 0; j < s; ++j) {
      const std::size_t idx = good[lo + static_cast<std::size_t>(j)];
      nodes[static_cast<std::size_t>(j)] = x.mean[idx];
      vals[static_cast<std::size_t>(j)] = f.mean[idx];
      sds[static_cast<std::size_t>(j)] = f.std[idx];
    }
    const std::vector<double> w = fd_weights(nodes, x.mean[i], 1);
    double d = 0.0, var = 0.0;
    for (int j = 0; j < s; ++j) {
      d += w[static_cast<std::size_t>(j)] * vals[static_cast<std::size_t>(j)];
      var += w[static_cast<std::size_t>(j)] * w[static_cast<std::size_t>(j)] *
             sds[static_cast<std::size_t>(j)] * sds[static_cast<std::size_t>(j)];
    }
    // Neighboring estimates share stencil points, so their errors are
    // anti-correlated; without covariance tracking (out of scope) the
    // constancy test would run hot on differentiated series. Report the
    // independence-equivalent std: scale variance by 1 - 2 sum_k rho_k with
    // rho_k the lag-k autocorrelation induced by the weights.
    double kappa2 = 1.0;
    {
      double w2 = 0.0, cross = 0.0;
      for (int j = 0; j < s; ++j) w2 += w[static_cast<std::size_t>(j)] * w[static_cast<std::size_t>(j)];
      for (int k = 1; k < s; ++k)
        for (int j = 0; j + k < s; ++j)
          cross += w[static_cast<std::size_t>(j)] * w[static_cast<std::size_t>(j + k)];
      if (w2 > 0.0) kappa2 = std::max(1.0, 1.0 - 2.0 * cross / w2);
      var *= kappa2;
    }

    // systematic-error check: residual of a degree s-1 fit over a widened
    // window must stay within k_sys of the local chance error
    const std::size_t wlen = std::min<std::size_t>(2 * static_cast<std::size_t>(s) - 1, g);
    std::size_t wlo = r > (wlen - 1) / 2 ? r - (wlen - 1) / 2 : 0;
    wlo = std::min(wlo, g - wlen);
    std::vector<double> wx(wlen), wy(wlen), wsd(wlen);
    double yscale = 0.0, noise2 = 0.0;
    for (std::size_t j = 0; j < wlen; ++j) {
      const std::size_t idx = good[wlo + j];
      wx[j] = x.mean[idx];
      wy[j] = f.mean[idx];
      wsd[j] = f.std[idx];
      yscale = std::max(yscale, std::abs(f.mean[idx]));
      noise2 += f.std[idx] * f.std[idx];
    }
    const double pooled = std::sqrt(noise2 / static_cast<double>(wlen));
    const double floor = policy.exact_floor * (yscale + 1e-300);
    const double tol = policy.k_sys * std::max(pooled, floor);
    const double noise_floor = 1e-12 * (yscale + 1.0);

    const LocalFit fit1 = wls_poly_fit(wx, wy, wsd, s - 1, x.mean[i], noise_floor);
    if (fit1.ok && fit1.residual_rms <= tol) {
      out.mean[i] = d;
      out.std[i] = std::sqrt(var);
      out.bad[i] = 0;
      continue;
    }
    // re-estimation: higher-degree fit over a wider window
    const std::size_t wlen2 = std::min<std::size_t>(3 * static_cast<std::size_t>(s) - 2, g);
    std::size_t wlo2 = r > (wlen2 - 1) / 2 ? r - (wlen2 - 1) / 2 : 0;
    wlo2 = std::min(wlo2, g - wlen2);
    std::vector<double> w2x(wlen2), w2y(wlen2), w2sd(wlen2);
    double yscale2 = 0.0, noise2b = 0.0;
    for (std::size_t j = 0; j < wlen2; ++j) {
      const std::size_t idx = good[wlo2 + j];
      w2x[j] = x.mean[idx];
      w2y[j] = f.mean[idx];
      w2sd[j] = f.std[idx];
      yscale2 = std::max(yscale2, std::abs(f.mean[idx]));
      noise2b += f.std[idx] * f.std[idx];
    }
    const double pooled2 = std::sqrt(noise2b / static_cast<double>(wlen2));
    const double tol2 = policy.k_sys * std::max(pooled2, policy.exact_floor * (yscale2 + 1e-300));
    const LocalFit fit2 =
        wls_poly_fit(w2x, w2y, w2sd, std::min<int>(s + 1, static_cast<int>(wlen2) - 1),
                     x.mean[i], noise_floor);
    if (fit2.ok && fit2.residual_rms <= tol2) {
      out.mean[i] = fit2.deriv_at_x0;
      out.std[i] = std::sqrt(std::max(fit2.deriv_var, 0.0) * kappa2);
      out.bad[i] = 0;
    }
    // else: systematic error cannot be estimated; stays bad
  }
  return MeasuredValue::series(std::move(out), policy);
}

}  // namespace physlaw
