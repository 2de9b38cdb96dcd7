#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <string>

namespace physlaw {

using Integer = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

// Nearest rational with small denominator within |x|*rel_tol of x, found by
// truncating the continued-fraction expansion. Used to turn fitted floating
// point coefficients into exact coefficients before algebraic reduction.
Rational rationalize(double x, double rel_tol = 1e-6);

double to_double(const Rational& r);

// "3", "-1/2" style text, round-trips through parse_rational.
std::string rational_to_string(const Rational& r);
Rational parse_rational(const std::string& s);

}  // namespace physlaw
