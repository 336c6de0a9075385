#include "fraclab/projection.hpp"

#include "fraclab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fraclab {

Direction Direction::from_slope(const Rational& theta) {
  Direction d;
  d.a_ = 1;
  d.b_ = theta;
  d.form_ = Form::Slope;
  auto u = d.unit();
  d.c_ = u.first, d.s_ = u.second;
  return d;
}

Direction Direction::from_vector(const Rational& a, const Rational& b) {
  if (a == 0 && b == 0) throw PreconditionError("zero direction vector");
  Direction d;
  d.a_ = a;
  d.b_ = b;
  d.form_ = Form::Vector;
  return d;
}

Direction Direction::from_angle_index(long i, long n) {
  if (n <= 0) throw PreconditionError("angle grid size must be positive");
  Direction d;
  d.form_ = Form::Angle;
  double phi = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
  d.c_ = std::cos(phi);
  d.s_ = std::sin(phi);
  d.angle_index_ = i;
  return d;
}

std::pair<double, double> Direction::unit() const {
  if (form_ == Form::Angle) return {c_, s_};
  long double a = to_long_double(a_), b = to_long_double(b_);
  long double n = std::sqrt(a * a + b * b);
  return {static_cast<double>(a / n), static_cast<double>(b / n)};
}

std::string Direction::label() const {
  switch (form_) {
    case Form::Slope: return "slope=" + to_string(b_);
    case Form::Vector: return "vec=(" + to_string(a_) + "," + to_string(b_) + ")";
    case Form::Angle: return "angle_index=" + std::to_string(angle_index_);
  }
  return {};
}

IntFunctional int_functional(const Direction& dir) {
  if (!dir.exact()) throw PreconditionError("exact projection needs a slope or rational vector direction");
  BigInt da = boost::multiprecision::denominator(dir.a());
  BigInt db = boost::multiprecision::denominator(dir.b());
  BigInt D = boost::multiprecision::lcm(da, db);
  BigInt A = boost::multiprecision::numerator(dir.a()) * (D / da);
  BigInt B = boost::multiprecision::numerator(dir.b()) * (D / db);
  static const BigInt cap = BigInt(1) << 24;
  if (abs(A) > cap || abs(B) > cap || D > cap) throw PreconditionError("direction denominators too large");
  return {to_int64_checked(A), to_int64_checked(B), to_int64_checked(D)};
}

namespace {

// Image of a half-open cell in numerator units: values are v / (D 2^L).
struct CellImage {
  i128 lo, hi;
  bool lo_closed, hi_closed;
};

CellImage cell_image(const IntFunctional& f, const Coord& c) {
  i128 base = static_cast<i128>(f.A) * c.ix + static_cast<i128>(f.B) * c.iy;
  i128 lo = base + std::min<i128>(f.A, 0) + std::min<i128>(f.B, 0);
  i128 hi = base + std::max<i128>(f.A, 0) + std::max<i128>(f.B, 0);
  return {lo, hi, f.A >= 0 && f.B >= 0, f.A <= 0 && f.B <= 0};
}

}  // namespace

std::size_t project_cover(const GridSet& F, const Direction& dir, int j) {
  if (j > F.level()) throw PreconditionError("projection scale finer than resolution");
  if (F.empty()) return 0;
  auto f = int_functional(dir);
  i128 unit = static_cast<i128>(f.D) << (F.level() - j);  // one r-interval in numerator units
  std::vector<std::pair<i128, i128>> ranges;
  ranges.reserve(F.size());
  for (const auto& c : F.cells()) {
    auto im = cell_image(f, c);
    i128 kmin = floor_div128(im.lo, unit);
    i128 kmax = im.hi_closed ? floor_div128(im.hi, unit) : floor_div128(im.hi + unit - 1, unit) - 1;
    ranges.push_back({kmin, kmax});
  }
  std::sort(ranges.begin(), ranges.end());
  std::size_t total = 0;
  i128 cur_lo = ranges[0].first, cur_hi = ranges[0].second;
  for (std::size_t i = 1; i < ranges.size(); ++i) {
    if (ranges[i].first <= cur_hi + 1) {
      cur_hi = std::max(cur_hi, ranges[i].second);
    } else {
      total += static_cast<std::size_t>(cur_hi - cur_lo + 1);
      cur_lo = ranges[i].first, cur_hi = ranges[i].second;
    }
  }
  total += static_cast<std::size_t>(cur_hi - cur_lo + 1);
  return total;
}

TubeDecomposition tube_decompose(const GridMeasure& mu, const Direction& dir, int width_level) {
  if (width_level > mu.level()) throw PreconditionError("tube width below cell side");
  if (mu.exp2() != 0) throw PreconditionError("tube decomposition expects a measure without an irrational scale factor");
  auto f = int_functional(dir);
  i128 unit = static_cast<i128>(f.D) << (mu.level() - width_level);
  std::vector<std::pair<i128, std::size_t>> keyed;
  keyed.reserve(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const auto& c = mu.support().cells()[i];
    i128 v = static_cast<i128>(f.A) * c.ix + static_cast<i128>(f.B) * c.iy;
    keyed.push_back({floor_div128(v, unit), i});
  }
  std::sort(keyed.begin(), keyed.end());
  TubeDecomposition td{dir, width_level, {}};
  for (const auto& [k, i] : keyed) {
    if (td.tubes.empty() || td.tubes.back().index != static_cast<std::int64_t>(k))
      td.tubes.push_back({static_cast<std::int64_t>(k), {}, Rational(0)});
    td.tubes.back().cells.push_back(i);
    td.tubes.back().mass += mu.weights()[i];
  }
  return td;
}

CoverResult greedy_min_cover(const GridMeasure& mu, const Direction& dir, int width_level, const Rational& m) {
  if (m < 0) throw PreconditionError("negative mass threshold");
  auto td = tube_decompose(mu, dir, width_level);
  Rational total = mu.weight_sum();
  if (m > total) throw PreconditionError("mass threshold " + to_string(m) + " exceeds total mass " + to_string(total));
  std::vector<const Tube*> order;
  for (const auto& t : td.tubes) order.push_back(&t);
  std::stable_sort(order.begin(), order.end(), [](const Tube* x, const Tube* y) { return x->mass > y->mass; });
  CoverResult res;
  for (const Tube* t : order) {
    if (res.mass >= m) break;
    res.mass += t->mass;
    res.tubes.push_back(t->index);
    ++res.count;
  }
  return res;
}

}  // namespace fraclab
