#include "fraclab/grid_measure.hpp"

#include "fraclab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace fraclab {

GridMeasure::GridMeasure(GridSet support, std::vector<Rational> weights, Rational exp2)
    : support_(std::move(support)), weights_(std::move(weights)), exp2_(std::move(exp2)) {
  if (weights_.size() != support_.size()) throw PreconditionError("weights/support size mismatch");
  for (std::size_t i = 0; i < weights_.size(); ++i)
    if (weights_[i] <= 0) throw PreconditionError("weights must be strictly positive on the support");
  if (exp2_ < 0 || exp2_ >= 1) {
    auto canon = ExactScaled::make(Rational(1), exp2_);
    for (auto& w : weights_) w *= canon.coeff;
    exp2_ = canon.exp2;
  }
}

GridMeasure GridMeasure::uniform(const GridSet& support) {
  std::vector<Rational> w(support.size(), support.empty() ? Rational(0) : Rational(1, support.size()));
  return GridMeasure(support, std::move(w));
}

Rational GridMeasure::weight_sum() const {
  Rational s = 0;
  for (const auto& w : weights_) s += w;
  return s;
}

ExactScaled GridMeasure::mass() const { return ExactScaled::make(weight_sum(), exp2_); }

ExactScaled GridMeasure::mass_of(const GridSet& e) const {
  if (e.level() != level()) throw PreconditionError("mass_of: level mismatch");
  Rational s = 0;
  for (const auto& c : e.cells())
    if (auto i = support_.index_of(c); i >= 0) s += weights_[static_cast<std::size_t>(i)];
  return ExactScaled::make(s, exp2_);
}

GridMeasure GridMeasure::restrict_to(const GridSet& e) const {
  if (e.level() != level()) throw PreconditionError("restrict_to: level mismatch");
  std::vector<Coord> cells;
  std::vector<Rational> w;
  for (std::size_t i = 0; i < support_.size(); ++i)
    if (e.contains(support_.cells()[i])) {
      cells.push_back(support_.cells()[i]);
      w.push_back(weights_[i]);
    }
  return GridMeasure(GridSet(level(), std::move(cells), support_.window()), std::move(w), exp2_);
}

GridMeasure GridMeasure::normalized() const {
  Rational total = weight_sum();
  if (total == 0) throw PreconditionError("cannot normalise a zero measure");
  std::vector<Rational> w;
  w.reserve(weights_.size());
  for (const auto& x : weights_) w.push_back(x / total);
  return GridMeasure(support_, std::move(w));
}

GridMeasure::IntegerView GridMeasure::integer_view() const {
  BigInt den = 1;
  for (const auto& w : weights_) den = boost::multiprecision::lcm(den, BigInt(boost::multiprecision::denominator(w)));
  static const BigInt cap = BigInt(1) << 100;
  if (den > cap) throw PreconditionError("common denominator too large for integer view");
  IntegerView v;
  BigInt total = 0;
  for (const auto& w : weights_) {
    BigInt n = boost::multiprecision::numerator(w) * (den / boost::multiprecision::denominator(w));
    total += n;
    if (total > cap) throw PreconditionError("integer view overflow");
    v.num.push_back(to_i128(n));
  }
  v.den = to_i128(den);
  return v;
}

namespace {

Rational rpow(const Rational& b, unsigned e) {
  Rational r = 1;
  for (unsigned i = 0; i < e; ++i) r *= b;
  return r;
}

// c * 2^{p/q} versus bound, as the sign of c^q 2^p - bound^q.
int compare_scaled(const ExactScaled& v, const Rational& bound) {
  if (v.coeff == 0) return bound > 0 ? -1 : (bound == 0 ? 0 : 1);
  BigInt p = boost::multiprecision::numerator(v.exp2);
  BigInt q = boost::multiprecision::denominator(v.exp2);
  if (q > 4096) throw PreconditionError("exponent denominator too large for exact comparison");
  unsigned qq = static_cast<unsigned>(q);
  Rational lhs = rpow(v.coeff, qq) * pow2(static_cast<int>(p));
  Rational rhs = rpow(bound, qq);
  return lhs < rhs ? -1 : (lhs == rhs ? 0 : 1);
}

std::int64_t isqrt_floor(std::int64_t n) {
  if (n <= 0) return 0;
  auto r = static_cast<std::int64_t>(std::sqrt(static_cast<double>(n)));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r;
}

std::int64_t ceil_div2(std::int64_t a) { return -floor_div(-a, 2); }

// Support packed into row prefix sums; coordinates in half-cell units.
struct DenseGrid {
  std::int64_t x0 = 0, y0 = 0, W = 0, H = 0;
  std::vector<i128> prefix;  // H rows of W+1

  DenseGrid(const GridSet& s, const std::vector<i128>& num) {
    std::int64_t xl = s.cells().front().ix, xh = xl, yl = s.cells().front().iy, yh = yl;
    for (const auto& c : s.cells()) {
      xl = std::min(xl, c.ix), xh = std::max(xh, c.ix);
      yl = std::min(yl, c.iy), yh = std::max(yh, c.iy);
    }
    x0 = xl, y0 = yl, W = xh - xl + 1, H = yh - yl + 1;
    if (W * H > (std::int64_t{1} << 26)) throw PreconditionError("support bounding box too large for scan");
    prefix.assign(static_cast<std::size_t>(H * (W + 1)), 0);
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto& c = s.cells()[i];
      prefix[static_cast<std::size_t>((c.iy - y0) * (W + 1) + (c.ix - x0) + 1)] += num[i];
    }
    for (std::int64_t r = 0; r < H; ++r)
      for (std::int64_t c = 1; c <= W; ++c)
        prefix[static_cast<std::size_t>(r * (W + 1) + c)] += prefix[static_cast<std::size_t>(r * (W + 1) + c - 1)];
  }

  // Total weight of cells meeting the open ball centred at (X, Y) of radius rho (half units).
  i128 ball_sum(std::int64_t X, std::int64_t Y, std::int64_t rho) const {
    std::int64_t rlo = std::max(floor_div(Y - rho - 2, 2) + 1, y0);
    std::int64_t rhi = std::min(floor_div(Y + rho - 1, 2), y0 + H - 1);
    i128 total = 0;
    for (std::int64_t iy = rlo; iy <= rhi; ++iy) {
      std::int64_t dy = std::max<std::int64_t>({2 * iy - Y, Y - 2 * iy - 2, 0});
      std::int64_t w2 = rho * rho - dy * dy;
      if (w2 <= 0) continue;
      std::int64_t t = isqrt_floor(w2 - 1);
      std::int64_t clo = std::max(ceil_div2(X - t - 2), x0);
      std::int64_t chi = std::min(floor_div(X + t, 2), x0 + W - 1);
      if (clo > chi) continue;
      const i128* row = &prefix[static_cast<std::size_t>((iy - y0) * (W + 1))];
      total += row[chi - x0 + 1] - row[clo - x0];
    }
    return total;
  }
};

Rational to_rational(i128 v) { return Rational(from_i128(v)); }

Point half_point(std::int64_t X, std::int64_t Y, int level) { return {dyadic(X, level + 1), dyadic(Y, level + 1)}; }

struct RadiusRange {
  int upper_max = 0;  // upper-bound radii 2^i cells, i = 0..upper_max
  int lower_max = -1; // lower-bound radii with r <= diam(spt)
};

RadiusRange radius_range(const GridSet& s) {
  Rational d2 = diameter2(s) * pow2(2 * s.level());  // in cell units
  RadiusRange rr;
  while (Rational(pow2(2 * rr.upper_max)) < 4 * d2) ++rr.upper_max;
  while (Rational(pow2(2 * (rr.lower_max + 1))) <= d2) ++rr.lower_max;
  return rr;
}

RegularityReport scan_measure(const GridMeasure& mu, const Rational& s, const Rational& C, bool lower) {
  if (mu.empty()) throw PreconditionError("regularity check on an empty measure");
  RegularityReport rep;
  rep.s = s;
  rep.C = C;
  const auto& set = mu.support();
  const int k = set.level();
  auto view = mu.integer_view();
  DenseGrid grid(set, view.num);
  auto rr = radius_range(set);
  Rational den = to_rational(view.den);

  bool ok = true;
  bool have = false;
  double best = 0;
  for (int i = 0; i <= rr.upper_max; ++i) {
    std::int64_t rho = std::int64_t{2} << i;
    i128 smax = -1;
    std::int64_t bx = 0, by = 0;
    for (std::int64_t Y = 2 * grid.y0; Y <= 2 * (grid.y0 + grid.H); ++Y)
      for (std::int64_t X = 2 * grid.x0; X <= 2 * (grid.x0 + grid.W); ++X) {
        i128 v = grid.ball_sum(X, Y, rho);
        ++rep.tested;
        if (v > smax) smax = v, bx = X, by = Y;
      }
    auto ratio = ExactScaled::make(to_rational(smax) / den, mu.exp2() + Rational(k - i) * s);
    if (compare_scaled(ratio, C) > 0) ok = false;
    double d = ratio.to_double();
    if (!have || d > best) {
      have = true, best = d;
      rep.max_ratio = ratio;
      rep.witness = {half_point(bx, by, k), pow2(i - k), Rational(0), "upper"};
    }
  }
  double cbest = best;
  if (lower) {
    bool have_min = false;
    double lowest = 0;
    for (int i = 0; i <= rr.lower_max; ++i) {
      std::int64_t rho = std::int64_t{2} << i;
      i128 smin = -1;
      std::int64_t bx = 0, by = 0;
      for (const auto& c : set.cells()) {
        i128 v = grid.ball_sum(2 * c.ix + 1, 2 * c.iy + 1, rho);
        ++rep.tested;
        if (smin < 0 || v < smin) smin = v, bx = 2 * c.ix + 1, by = 2 * c.iy + 1;
      }
      auto ratio = ExactScaled::make(to_rational(smin) / den, mu.exp2() + Rational(k - i) * s);
      if (C == 0 || compare_scaled(ratio, Rational(1) / C) < 0) ok = false;
      double d = ratio.to_double();
      if (!have_min || d < lowest) {
        have_min = true, lowest = d;
        rep.min_ratio = ratio;
        if (1.0 / d > cbest) {
          cbest = 1.0 / d;
          rep.witness = {half_point(bx, by, k), pow2(i - k), Rational(0), "lower"};
        }
      }
    }
  }
  rep.C_best = cbest;
  rep.verdict = ok;
  return rep;
}

}  // namespace

bool scaled_le(const ExactScaled& v, const Rational& bound) { return compare_scaled(v, bound) <= 0; }
bool scaled_ge(const ExactScaled& v, const Rational& bound) { return compare_scaled(v, bound) >= 0; }

RegularityReport check_frostman(const GridMeasure& mu, const Rational& s, const Rational& C) {
  return scan_measure(mu, s, C, false);
}

RegularityReport check_ahlfors(const GridMeasure& mu, const Rational& s, const Rational& C) {
  return scan_measure(mu, s, C, true);
}

RegularityReport check_upper_regular(const GridSet& K, const Rational& s, const Rational& C) {
  if (K.empty()) throw PreconditionError("regularity check on an empty set");
  RegularityReport rep;
  rep.s = s;
  rep.C = C;
  const int k = K.level();
  // Row index: iy -> sorted ix list.
  std::map<std::int64_t, std::vector<std::int64_t>> rows;
  std::int64_t xl = K.cells().front().ix, xh = xl, yl = K.cells().front().iy, yh = yl;
  for (const auto& c : K.cells()) {
    rows[c.iy].push_back(c.ix);
    xl = std::min(xl, c.ix), xh = std::max(xh, c.ix), yl = std::min(yl, c.iy), yh = std::max(yh, c.iy);
  }
  auto rr = radius_range(K);
  bool ok = true, have = false;
  double best = 0;
  std::vector<Coord> inball, anc;
  for (int i = 0; i <= rr.upper_max; ++i) {
    std::int64_t rho = std::int64_t{2} << i;
    for (std::int64_t Y = 2 * yl; Y <= 2 * (yh + 1); ++Y)
      for (std::int64_t X = 2 * xl; X <= 2 * (xh + 1); ++X) {
        inball.clear();
        for (auto it = rows.lower_bound(floor_div(Y - rho - 2, 2) + 1);
             it != rows.end() && it->first <= floor_div(Y + rho - 1, 2); ++it) {
          std::int64_t iy = it->first;
          std::int64_t dy = std::max<std::int64_t>({2 * iy - Y, Y - 2 * iy - 2, 0});
          std::int64_t w2 = rho * rho - dy * dy;
          if (w2 <= 0) continue;
          std::int64_t t = isqrt_floor(w2 - 1);
          std::int64_t clo = ceil_div2(X - t - 2), chi = floor_div(X + t, 2);
          auto a = std::lower_bound(it->second.begin(), it->second.end(), clo);
          for (; a != it->second.end() && *a <= chi; ++a) inball.push_back({*a, iy});
        }
        if (inball.empty()) continue;
        for (int a = 0; a <= i; ++a) {
          anc.clear();
          for (const auto& c : inball) anc.push_back({c.ix >> a, c.iy >> a});
          std::sort(anc.begin(), anc.end());
          auto count = static_cast<std::int64_t>(std::unique(anc.begin(), anc.end()) - anc.begin());
          ++rep.tested;
          auto ratio = ExactScaled::make(Rational(count), -Rational(i - a) * s);
          double d = ratio.to_double();
          if (!have || d > best) {
            have = true, best = d;
            rep.max_ratio = ratio;
            rep.witness = {half_point(X, Y, k), pow2(a - k), pow2(i - k), "upper"};
          }
        }
      }
  }
  // Verdict on the exact maximum: recheck every radius pair only at the recorded sup.
  ok = compare_scaled(rep.max_ratio, C) <= 0;
  rep.C_best = best;
  rep.verdict = ok;
  return rep;
}

GridMeasure renormalize(const GridMeasure& mu, const Ball& B, const Rational& s) {
  if (!is_dyadic_power(B.radius)) throw PreconditionError("renormalisation radius must be a dyadic power");
  const int j = dyadic_level_of(B.radius);  // r0 = 2^-j
  const int k = mu.level();
  const int k2 = k - j;
  if (k2 < 0) throw PreconditionError("renormalisation underflows the resolution");
  if (k2 > 40) throw PreconditionError("renormalisation overflows the resolution cap");
  Rational scale = pow2(k);
  Rational X0 = B.center.x * scale, Y0 = B.center.y * scale;
  if (boost::multiprecision::denominator(X0) != 1 || boost::multiprecision::denominator(Y0) != 1)
    throw PreconditionError("renormalisation centre is not on the support lattice");
  auto x0 = to_int64_checked(boost::multiprecision::numerator(X0));
  auto y0 = to_int64_checked(boost::multiprecision::numerator(Y0));
  std::vector<Coord> cells;
  cells.reserve(mu.size());
  for (const auto& c : mu.support().cells()) cells.push_back({c.ix - x0, c.iy - y0});
  const auto& w = mu.support().window();
  Rational inv = pow2(j);
  Window w2{(w.x0 - B.center.x) * inv, (w.y0 - B.center.y) * inv, (w.x1 - B.center.x) * inv,
            (w.y1 - B.center.y) * inv};
  return GridMeasure(GridSet(k2, std::move(cells), w2), mu.weights(), mu.exp2() + Rational(j) * s);
}

CubeFamily canonical_dyadic_family(const GridMeasure& mu, int lo, int hi) {
  CubeFamily fam;
  for (int i = lo; i <= hi; ++i) {
    std::map<Coord, std::vector<std::size_t>> groups;
    int d = mu.level() - i;
    if (d < 0) throw PreconditionError("cube level finer than the measure");
    for (std::size_t t = 0; t < mu.size(); ++t) {
      const auto& c = mu.support().cells()[t];
      groups[{c.ix >> d, c.iy >> d}].push_back(t);
    }
    fam.levels.push_back(i);
    auto& lvl = fam.cubes.emplace_back();
    for (auto& [_, v] : groups) lvl.push_back(std::move(v));
  }
  return fam;
}

DavidReport verify_david_cubes(const GridMeasure& mu, const CubeFamily& fam, const Rational& A,
                               const Rational& s) {
  if (fam.levels.size() != fam.cubes.size()) throw PreconditionError("cube family shape mismatch");
  const std::size_t n = mu.size();
  // Structural check: every level partitions the support.
  std::vector<std::vector<std::size_t>> owner(fam.levels.size(), std::vector<std::size_t>(n, SIZE_MAX));
  for (std::size_t l = 0; l < fam.levels.size(); ++l) {
    for (std::size_t q = 0; q < fam.cubes[l].size(); ++q)
      for (auto t : fam.cubes[l][q]) {
        if (t >= n) throw PreconditionError("cube references a cell outside the support");
        if (owner[l][t] != SIZE_MAX)
          throw PreconditionError("level " + std::to_string(fam.levels[l]) + ": cubes " +
                                  std::to_string(owner[l][t]) + " and " + std::to_string(q) + " overlap");
        owner[l][t] = q;
      }
    for (std::size_t t = 0; t < n; ++t)
      if (owner[l][t] == SIZE_MAX)
        throw PreconditionError("level " + std::to_string(fam.levels[l]) + " does not cover support cell " +
                                std::to_string(t));
  }
  DavidReport rep;
  // Q1: finer cubes sit inside a single coarser cube.
  for (std::size_t a = 0; a < fam.levels.size() && rep.q1; ++a)
    for (std::size_t b = 0; b < fam.levels.size() && rep.q1; ++b) {
      if (fam.levels[b] <= fam.levels[a]) continue;
      for (std::size_t q = 0; q < fam.cubes[b].size() && rep.q1; ++q) {
        const auto& cube = fam.cubes[b][q];
        for (auto t : cube)
          if (owner[a][t] != owner[a][cube.front()]) {
            rep.q1 = false;
            rep.q1_witness = CubeViolation{fam.levels[b], q, fam.levels[a], owner[a][t], "cube straddles two coarser cubes"};
            break;
          }
      }
    }
  Rational dspt2 = diameter2(mu.support());
  Rational A2 = A * A;
  for (std::size_t l = 0; l < fam.levels.size(); ++l) {
    const int i = fam.levels[l];
    Rational side2 = pow2(-2 * i);
    for (std::size_t q = 0; q < fam.cubes[l].size(); ++q) {
      std::vector<Coord> cells;
      Rational wsum = 0;
      for (auto t : fam.cubes[l][q]) {
        cells.push_back(mu.support().cells()[t]);
        wsum += mu.weights()[t];
      }
      Rational d2 = diameter2(GridSet(mu.level(), cells, mu.support().window()));
      if (rep.q2 && (d2 * A2 < side2 || d2 > A2 * side2)) {
        rep.q2 = false;
        rep.q2_witness = CubeViolation{i, q, i, q, "diam^2 = " + to_string(d2) + " vs 2^{-2i} = " + to_string(side2)};
      }
      if (rep.q3 && side2 <= dspt2) {
        auto ratio = ExactScaled::make(wsum, mu.exp2() + Rational(i) * s);  // mu(Q) / 2^{-is}
        if (compare_scaled(ratio, A) > 0 || compare_scaled(ratio, Rational(1) / A) < 0) {
          rep.q3 = false;
          rep.q3_witness = CubeViolation{i, q, i, q, "mu(Q)/2^{-is} = " + std::to_string(ratio.to_double())};
        }
      }
    }
  }
  return rep;
}

void write_measure(std::ostream& os, const GridMeasure& mu) {
  write_text(os, mu.support());
  os << "weights\n";
  if (mu.exp2() != 0) os << "scale2 " << to_string(mu.exp2()) << "\n";
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const auto& c = mu.support().cells()[i];
    const auto& w = mu.weights()[i];
    os << c.ix << " " << c.iy << " " << boost::multiprecision::numerator(w) << " "
       << boost::multiprecision::denominator(w) << "\n";
  }
}

GridMeasure read_measure(std::istream& is) {
  std::string line, head;
  while (std::getline(is, line)) {
    if (line.rfind("weights", 0) == 0) break;
    head += line + "\n";
  }
  if (line.rfind("weights", 0) != 0) throw ParseError("measure file lacks a 'weights' section");
  std::istringstream hs(head);
  GridSet support = read_text(hs);
  Rational exp2 = 0;
  std::map<Coord, Rational> w;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    if (line.rfind("scale2", 0) == 0) {
      std::string kw, v;
      ls >> kw >> v;
      exp2 = parse_rational(v);
      continue;
    }
    Coord c;
    std::string p, q;
    ls >> c.ix >> c.iy >> p >> q;
    if (ls.fail()) throw ParseError("bad weight line '" + line + "'");
    if (!support.contains(c)) throw ParseError("weight for a cell outside the support: '" + line + "'");
    if (w.count(c)) throw ParseError("duplicate weight line '" + line + "'");
    w[c] = parse_rational(p + "/" + q);
  }
  if (w.size() != support.size()) throw ParseError("weights do not cover the support");
  std::vector<Rational> weights;
  for (const auto& c : support.cells()) weights.push_back(w[c]);
  return GridMeasure(std::move(support), std::move(weights), exp2);
}

}  // namespace fraclab
