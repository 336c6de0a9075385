#include "fraclab/rational.hpp"

#include "fraclab/errors.hpp"

#include <cmath>
#include <limits>

namespace fraclab {

Rational pow2(int e) {
  BigInt one = 1;
  if (e >= 0) return Rational(BigInt(one << e));
  return Rational(one, BigInt(one << (-e)));
}

Rational dyadic(std::int64_t num, int level) { return Rational(num) * pow2(-level); }

namespace {

BigInt parse_int(std::string_view s) {
  if (s.empty()) throw ParseError("empty integer");
  bool neg = false;
  std::size_t i = 0;
  if (s[0] == '-' || s[0] == '+') {
    neg = s[0] == '-';
    i = 1;
  }
  if (i >= s.size()) throw ParseError("bad integer '" + std::string(s) + "'");
  BigInt v = 0;
  for (; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9') throw ParseError("bad integer '" + std::string(s) + "'");
    v = v * 10 + (s[i] - '0');
  }
  return neg ? BigInt(-v) : v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

Rational parse_rational(std::string_view text) {
  auto s = trim(text);
  if (s.rfind("2^", 0) == 0) {
    auto e = parse_int(s.substr(2));
    return pow2(static_cast<int>(e));
  }
  if (auto slash = s.find('/'); slash != std::string_view::npos) {
    BigInt p = parse_int(trim(s.substr(0, slash)));
    BigInt q = parse_int(trim(s.substr(slash + 1)));
    if (q == 0) throw ParseError("zero denominator in '" + std::string(s) + "'");
    return Rational(p, q);
  }
  if (auto dot = s.find('.'); dot != std::string_view::npos) {
    std::string digits(s.substr(0, dot));
    std::string frac(s.substr(dot + 1));
    bool neg = !digits.empty() && digits[0] == '-';
    if (digits.empty() || digits == "-" || digits == "+") digits += "0";
    BigInt ip = parse_int(digits);
    if (frac.empty()) return Rational(ip);
    BigInt fp = parse_int(frac);
    BigInt den = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
    Rational f(fp, den);
    return neg ? Rational(ip) - f : Rational(ip) + f;
  }
  return Rational(parse_int(s));
}

std::string to_string(const Rational& r) {
  auto n = boost::multiprecision::numerator(r);
  auto d = boost::multiprecision::denominator(r);
  if (d == 1) return n.str();
  return n.str() + "/" + d.str();
}

double to_double(const Rational& r) { return r.convert_to<double>(); }
long double to_long_double(const Rational& r) { return r.convert_to<long double>(); }

bool is_dyadic_power(const Rational& r) {
  if (r <= 0) return false;
  BigInt n = boost::multiprecision::numerator(r);
  BigInt d = boost::multiprecision::denominator(r);
  auto pow_of_two = [](const BigInt& v) { return v > 0 && (v & (v - 1)) == 0; };
  return (n == 1 && pow_of_two(d)) || (d == 1 && pow_of_two(n));
}

int dyadic_level_of(const Rational& r) {
  if (!is_dyadic_power(r)) throw PreconditionError("not a dyadic power: " + to_string(r));
  BigInt n = boost::multiprecision::numerator(r);
  BigInt d = boost::multiprecision::denominator(r);
  if (n == 1) return static_cast<int>(boost::multiprecision::msb(d));
  return -static_cast<int>(boost::multiprecision::msb(n));
}

BigInt floor_big(const Rational& r) {
  BigInt n = boost::multiprecision::numerator(r);
  BigInt d = boost::multiprecision::denominator(r);
  BigInt q = n / d;
  if (n < 0 && q * d != n) q -= 1;
  return q;
}

std::int64_t to_int64_checked(const BigInt& v) {
  if (v > std::numeric_limits<std::int64_t>::max() || v < std::numeric_limits<std::int64_t>::min())
    throw PreconditionError("integer overflow: " + v.str());
  return static_cast<std::int64_t>(v);
}

i128 to_i128(const BigInt& v) {
  static const BigInt lim = BigInt(1) << 126;
  if (v >= lim || v <= -lim) throw PreconditionError("integer overflow: " + v.str());
  BigInt mag = v < 0 ? BigInt(-v) : v;
  auto lo = static_cast<std::uint64_t>(mag & BigInt(std::numeric_limits<std::uint64_t>::max()));
  auto hi = static_cast<std::uint64_t>(mag >> 64);
  i128 r = (static_cast<i128>(hi) << 64) | static_cast<i128>(lo);
  return v < 0 ? -r : r;
}

BigInt from_i128(i128 v) {
  bool neg = v < 0;
  unsigned __int128 u = neg ? static_cast<unsigned __int128>(-v) : static_cast<unsigned __int128>(v);
  BigInt b = BigInt(static_cast<std::uint64_t>(u >> 64));
  b <<= 64;
  b += BigInt(static_cast<std::uint64_t>(u));
  return neg ? BigInt(-b) : b;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

i128 floor_div128(i128 a, i128 b) {
  i128 q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

ExactScaled ExactScaled::make(const Rational& coeff, const Rational& exp2) {
  ExactScaled v;
  if (coeff == 0) return v;
  BigInt fl = floor_big(exp2);
  v.exp2 = exp2 - Rational(fl);
  int shift = static_cast<int>(fl);
  v.coeff = coeff * pow2(shift);
  return v;
}

double ExactScaled::to_double() const {
  return static_cast<double>(to_long_double(coeff) * std::pow(2.0L, to_long_double(exp2)));
}

}  // namespace fraclab
