#include "physlaw/rational.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace physlaw {

double to_double(const Rational& r) { return static_cast<double>(r); }

Rational rationalize(double x, double rel_tol) {
  if (!std::isfinite(x)) throw std::invalid_argument("rationalize: non-finite input");
  if (x == 0.0) return Rational(0);
  const bool neg = x < 0;
  double v = std::abs(x);
  const double tol = std::max(rel_tol * v, std::numeric_limits<double>::denorm_min());

  // continued-fraction convergents p/q of v
  Integer p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  double frac = v;
  for (int iter = 0; iter < 64; ++iter) {
    const double fl = std::floor(frac);
    if (fl > 9.0e18) break;
    Integer a = static_cast<long long>(fl);
    Integer p2 = a * p1 + p0;
    Integer q2 = a * q1 + q0;
    p0 = p1; q0 = q1; p1 = p2; q1 = q2;
    const double approx = static_cast<double>(Rational(p1, q1));
    if (std::abs(approx - v) <= tol) break;
    const double rem = frac - fl;
    if (rem < 1e-18) break;
    frac = 1.0 / rem;
  }
  Rational r(p1, q1);
  return neg ? Rational(-r) : r;
}

std::string rational_to_string(const Rational& r) {
  const Integer num = boost::multiprecision::numerator(r);
  const Integer den = boost::multiprecision::denominator(r);
  if (den == 1) return num.str();
  return num.str() + "/" + den.str();
}

Rational parse_rational(const std::string& s) {
  const auto slash = s.find('/');
  try {
    if (slash == std::string::npos) return Rational(Integer(s));
    return Rational(Integer(s.substr(0, slash)), Integer(s.substr(slash + 1)));
  } catch (const std::exception&) {
    throw std::invalid_argument("parse_rational: malformed rational '" + s + "'");
  }
}

}  // namespace physlaw
