#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <string>
#include <string_view>

namespace fraclab {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;
using i128 = __int128;

/// num * 2^{-level}; level may be negative.
Rational dyadic(std::int64_t num, int level);
Rational pow2(int e);

/// Accepts "p", "p/q", "-p/q", decimal "0.25" and "2^-k".
Rational parse_rational(std::string_view text);

/// "p/q", or "p" when q == 1.
std::string to_string(const Rational& r);

double to_double(const Rational& r);
long double to_long_double(const Rational& r);

/// Returns k if r == 2^{-k}; throws PreconditionError otherwise.
int dyadic_level_of(const Rational& r);
bool is_dyadic_power(const Rational& r);

/// Floor of a rational as a big integer.
BigInt floor_big(const Rational& r);

std::int64_t to_int64_checked(const BigInt& v);
i128 to_i128(const BigInt& v);
BigInt from_i128(i128 v);
std::int64_t floor_div(std::int64_t a, std::int64_t b);
i128 floor_div128(i128 a, i128 b);

/// Value c * 2^{e} with c rational and e rational, kept canonical: e in [0,1).
/// Two ExactScaled values are mathematically equal iff their fields are equal.
struct ExactScaled {
  Rational coeff{0};
  Rational exp2{0};

  static ExactScaled make(const Rational& coeff, const Rational& exp2);
  double to_double() const;
  bool operator==(const ExactScaled&) const = default;
};

}  // namespace fraclab
