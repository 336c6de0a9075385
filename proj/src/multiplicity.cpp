#include "fraclab/multiplicity.hpp"

#include "fraclab/errors.hpp"
#include "fraclab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace fraclab {

int dyadic_ceil_level(const Rational& v) {
  if (v <= 0) throw PreconditionError("scale must be positive");
  int j = 0;
  while (pow2(-j) < v) --j;
  while (pow2(-(j + 1)) >= v) ++j;
  return j;
}

namespace {

struct Bound {
  i128 n = 0, d = 1;
  bool closed = false;
  bool inf = true;
};

// a < b for finite fractions with positive denominators.
bool frac_less(const Bound& a, const Bound& b) { return a.n * b.d < b.n * a.d; }
bool frac_equal(const Bound& a, const Bound& b) { return a.n * b.d == b.n * a.d; }

// {λ : u <= αλ < v}; returns false when empty.
bool constraint(i128 alpha, i128 u, i128 v, Bound& lo, Bound& hi) {
  if (alpha == 0) {
    if (u <= 0 && 0 < v) return true;
    return false;
  }
  Bound l, h;
  l.inf = h.inf = false;
  if (alpha > 0) {
    l = {u, alpha, true, false};
    h = {v, alpha, false, false};
  } else {
    l = {-v, -alpha, false, false};
    h = {-u, -alpha, true, false};
  }
  if (lo.inf || frac_less(lo, l) || (frac_equal(lo, l) && !l.closed)) lo = l;
  if (hi.inf || frac_less(h, hi) || (frac_equal(h, hi) && !h.closed)) hi = h;
  return true;
}

}  // namespace

FiberCounter::FiberCounter(const GridSet& K, const Direction& dir, int lo_level, int sample_level) {
  auto f = int_functional(dir);
  std::int64_t g = std::gcd(std::abs(f.A), std::abs(f.B));
  A_ = f.A / g;
  B_ = f.B / g;
  GridSet Kc = at_level(K, lo_level);
  L_ = std::max(lo_level, sample_level);
  shift_ = L_ - sample_level;
  if (L_ - lo_level > 40) throw PreconditionError("fiber counter: scale gap too large");
  H_ = static_cast<i128>(1) << (L_ - lo_level);
  hull_width_ = (static_cast<i128>(std::abs(A_)) + std::abs(B_)) * H_;
  cells_.reserve(Kc.size());
  for (const auto& c : Kc.cells()) {
    i128 X0 = static_cast<i128>(c.ix) * H_, Y0 = static_cast<i128>(c.iy) * H_;
    i128 lo = A_ * X0 + B_ * Y0 + std::min<i128>(A_, 0) * H_ + std::min<i128>(B_, 0) * H_;
    cells_.push_back({X0, Y0, lo});
  }
  std::sort(cells_.begin(), cells_.end(), [](const Cell& a, const Cell& b) { return a.hull_lo < b.hull_lo; });
}

std::pair<i128, i128> FiberCounter::radius2(const Rational& radius) const {
  Rational r2 = radius * radius * pow2(2 * L_);
  return {to_i128(boost::multiprecision::numerator(r2)), to_i128(boost::multiprecision::denominator(r2))};
}

bool FiberCounter::meets(const Cell& c, i128 Xc, i128 Yc, i128 p, i128 q) const {
  Bound lo, hi;
  // Points Xc + λ(-B, A) inside [X0, X0+H) x [Y0, Y0+H).
  if (!constraint(-static_cast<i128>(B_), c.X0 - Xc, c.X0 + H_ - Xc, lo, hi)) return false;
  if (!constraint(static_cast<i128>(A_), c.Y0 - Yc, c.Y0 + H_ - Yc, lo, hi)) return false;
  if (!lo.inf && !hi.inf) {
    if (frac_less(hi, lo)) return false;
    if (frac_equal(lo, hi) && !(lo.closed && hi.closed)) return false;
  }
  // Open chord |λ| < c with c^2 = p / (q (A^2 + B^2)).
  i128 qn = q * (static_cast<i128>(A_) * A_ + static_cast<i128>(B_) * B_);
  auto below_c = [&](i128 n, i128 d) { return n < 0 || n * n * qn < p * d * d; };
  if (!lo.inf && !below_c(lo.n, lo.d)) return false;
  if (!hi.inf && !below_c(-hi.n, hi.d)) return false;
  return true;
}

long FiberCounter::count(std::int64_t X, std::int64_t Y, const Rational& radius) const {
  i128 Xc = static_cast<i128>(X) << shift_, Yc = static_cast<i128>(Y) << shift_;
  auto [p, q] = radius2(radius);
  i128 t = A_ * Xc + B_ * Yc;
  auto first = std::lower_bound(cells_.begin(), cells_.end(), t - hull_width_,
                                [](const Cell& c, i128 v) { return c.hull_lo < v; });
  long n = 0;
  for (auto it = first; it != cells_.end() && it->hull_lo <= t; ++it)
    if (meets(*it, Xc, Yc, p, q)) ++n;
  return n;
}

long FiberCounter::count_exhaustive(std::int64_t X, std::int64_t Y, const Rational& radius) const {
  i128 Xc = static_cast<i128>(X) << shift_, Yc = static_cast<i128>(Y) << shift_;
  auto [p, q] = radius2(radius);
  long n = 0;
  for (const auto& c : cells_)
    if (meets(c, Xc, Yc, p, q)) ++n;
  return n;
}

namespace {

int dyadic_denominator_level(const Rational& v) {
  BigInt d = boost::multiprecision::denominator(v);
  if ((d & (d - 1)) != 0) throw PreconditionError("sample point must have dyadic coordinates");
  return static_cast<int>(boost::multiprecision::msb(d));
}

}  // namespace

long multiplicity_at(const GridSet& K, const Direction& dir, const Point& x, const ScalePairQuery& q) {
  int s = std::max({dyadic_denominator_level(x.x), dyadic_denominator_level(x.y), 0});
  FiberCounter fc(K, dir, q.lo_level, s);
  auto X = to_int64_checked(boost::multiprecision::numerator(x.x * pow2(s)));
  auto Y = to_int64_checked(boost::multiprecision::numerator(x.y * pow2(s)));
  return fc.count(X, Y, q.hi);
}

MultiplicityField multiplicity_field(const GridSet& K, const Direction& dir, const ScalePairQuery& q,
                                     const std::optional<GridSet>& domain, bool exhaustive) {
  const GridSet& dom = domain ? *domain : K;
  FiberCounter fc(K, dir, q.lo_level, dom.level() + 1);
  MultiplicityField field{dir, q, dom, std::vector<long>(dom.size(), 0)};
  for (std::size_t i = 0; i < dom.size(); ++i) {
    const auto& c = dom.cells()[i];
    field.values[i] = exhaustive ? fc.count_exhaustive(2 * c.ix + 1, 2 * c.iy + 1, q.hi)
                                 : fc.count(2 * c.ix + 1, 2 * c.iy + 1, q.hi);
  }
  return field;
}

GridSet high_mult_set(const GridSet& K, const Direction& dir, double threshold, const ScalePairQuery& q,
                      const std::optional<GridSet>& domain) {
  if (threshold < 1) throw PreconditionError("high-multiplicity threshold must be >= 1");
  auto field = multiplicity_field(K, dir, q, domain);
  std::vector<Coord> out;
  for (std::size_t i = 0; i < field.values.size(); ++i)
    if (static_cast<double>(field.values[i]) >= threshold) out.push_back(field.domain.cells()[i]);
  return GridSet(field.domain.level(), std::move(out), field.domain.window());
}

GridSet cells_in_ball(const GridSet& set, const Rational& radius) {
  Rational R = radius * pow2(set.level() + 1);
  Rational R2 = R * R;
  std::vector<Coord> out;
  for (const auto& c : set.cells()) {
    std::int64_t X = 2 * c.ix + 1, Y = 2 * c.iy + 1;
    if (Rational(X * X + Y * Y) < R2) out.push_back(c);
  }
  return GridSet(set.level(), std::move(out), set.window());
}

namespace {

Rational weight_of(const GridMeasure& mu, const GridSet& cells) {
  Rational s = 0;
  for (const auto& c : cells.cells()) s += mu.weights()[static_cast<std::size_t>(mu.support().index_of(c))];
  return s;
}

void require_plain(const GridMeasure& mu) {
  if (mu.exp2() != 0) throw PreconditionError("operation expects a measure without an irrational scale factor");
}

}  // namespace

IotaResult iota_integrand(const GridMeasure& mu, const ArcMeasure& nu, double sigma, int delta_level,
                          int spacing_level, bool exhaustive) {
  require_plain(mu);
  if (delta_level > mu.level()) throw PreconditionError("iota: delta finer than the measure's resolution");
  if (sigma < 0) throw PreconditionError("iota: sigma must be >= 0");
  const GridSet& K = mu.support();
  GridSet domain = cells_in_ball(K, Rational(1));
  double threshold = std::max(1.0, std::exp2(static_cast<double>(delta_level) * sigma));
  auto dirs = directions_from(nu, spacing_level);
  IotaResult res;
  res.terms.resize(dirs.size());
  ScalePairQuery q{delta_level, Rational(1)};
  parallel_for(dirs.size(), [&](std::size_t i) {
    auto field = multiplicity_field(K, dirs[i].dir, q, domain, exhaustive);
    Rational m = 0;
    for (std::size_t t = 0; t < field.values.size(); ++t)
      if (static_cast<double>(field.values[t]) >= threshold)
        m += mu.weights()[static_cast<std::size_t>(K.index_of(domain.cells()[t]))];
    res.terms[i] = {dirs[i].dir, dirs[i].mass, m};
  });
  for (const auto& t : res.terms) res.value += t.nu_mass * t.mu_mass;
  res.value_double = to_double(res.value);
  res.upper_bound = weight_of(mu, domain) * nu.mass();
  return res;
}

LowMultiplicityProfile low_mult_profile(const GridMeasure& mu, const Direction& dir, const ScaleLadder& ladder,
                                        double sigma0, double lambda, const Rational& A) {
  require_plain(mu);
  if (ladder.N < 1) throw PreconditionError("ladder depth must be >= 1");
  const GridSet& K = mu.support();
  LowMultiplicityProfile prof{dir, ladder, lambda, sigma0, A, {}, {}, {}, Rational(0)};
  prof.bad.assign(K.size(), {});
  double threshold = std::exp2(static_cast<double>(ladder.m) * sigma0);
  for (int j = 1; j <= ladder.N; ++j) {
    int lo = dyadic_ceil_level(A * ladder.scale(j + 1));
    FiberCounter fc(K, dir, lo, K.level() + 1);
    Rational hi = A * ladder.scale(j);
    std::vector<char> flag(K.size(), 0);
    parallel_for(K.size(), [&](std::size_t i) {
      const auto& c = K.cells()[i];
      flag[i] = static_cast<double>(fc.count(2 * c.ix + 1, 2 * c.iy + 1, hi)) >= threshold;
    });
    for (std::size_t i = 0; i < K.size(); ++i)
      if (flag[i]) prof.bad[i].push_back(j);
  }
  std::vector<Coord> low;
  GridSet ball = cells_in_ball(K, Rational(1));
  for (std::size_t i = 0; i < K.size(); ++i) {
    double d = static_cast<double>(prof.bad[i].size()) / ladder.N;
    prof.density.push_back(d);
    if (d <= lambda)
      low.push_back(K.cells()[i]);
    else if (ball.contains(K.cells()[i]))
      prof.mass_outside += mu.weights()[i];
  }
  prof.low_set = GridSet(K.level(), std::move(low), K.window());
  return prof;
}

namespace {

struct TubeSpan {
  i128 lo, hi;  // image in numerator units
  bool lo_closed, hi_closed;
  i128 kmin, kmax;
};

std::vector<TubeSpan> tube_spans(const GridSet& F, const IntFunctional& f) {
  std::vector<TubeSpan> out;
  i128 unit = f.D;
  for (const auto& c : F.cells()) {
    i128 base = static_cast<i128>(f.A) * c.ix + static_cast<i128>(f.B) * c.iy;
    i128 lo = base + std::min<i128>(f.A, 0) + std::min<i128>(f.B, 0);
    i128 hi = base + std::max<i128>(f.A, 0) + std::max<i128>(f.B, 0);
    bool lc = f.A >= 0 && f.B >= 0, hc = f.A <= 0 && f.B <= 0;
    i128 kmin = floor_div128(lo, unit);
    i128 kmax = hc ? floor_div128(hi, unit) : floor_div128(hi + unit - 1, unit) - 1;
    out.push_back({lo, hi, lc, hc, kmin, kmax});
  }
  return out;
}

long min_multiplicity(const GridSet& G, const Direction& dir) {
  if (G.empty()) return 0;
  FiberCounter fc(G, dir, G.level() - 2, G.level() + 1);
  long best = -1;
  for (const auto& c : G.cells()) {
    long v = fc.count(2 * c.ix + 1, 2 * c.iy + 1, Rational(4));
    if (best < 0 || v < best) best = v;
  }
  return best;
}

// Cells of F whose image meets 2T for some tube T with at least min_count incident cells.
GridSet refine_by_count(const GridSet& F, const std::vector<TubeSpan>& spans, const std::map<i128, long>& counts,
                        long min_count, i128 unit) {
  std::vector<Coord> out;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const auto& s = spans[i];
    bool hit = false;
    for (i128 t = s.kmin - 1; t <= s.kmax + 1 && !hit; ++t) {
      auto it = counts.find(t);
      if (it == counts.end() || it->second < min_count) continue;
      // 2T_t = [(2t-1) unit/2, (2t+3) unit/2) in doubled units.
      i128 a = (2 * t - 1) * unit, b = (2 * t + 3) * unit;
      bool left_ok = 2 * s.lo < b;
      bool right_ok = s.hi_closed ? 2 * s.hi >= a : 2 * s.hi > a;
      hit = left_ok && right_ok;
    }
    if (hit) out.push_back(F.cells()[i]);
  }
  return GridSet(F.level(), std::move(out), F.window());
}

}  // namespace

HereditaryResult hereditary_refine(const GridMeasure& mu, const GridSet& F, const Direction& dir, double M,
                                   const Rational& kappa, const Rational& C_reg, const Rational& c, bool search) {
  require_plain(mu);
  const int k = mu.level();
  if (F.level() != k) throw PreconditionError("hereditary_refine: F must be at the measure's resolution");
  const GridSet& K = mu.support();
  if (!is_subset(F, K)) throw HypothesisError("hereditary_refine: F is not contained in spt mu");
  GridSet inball = cells_in_ball(F, Rational(1));
  if (inball.size() != F.size()) throw HypothesisError("hereditary_refine: F is not contained in B(1)");
  if (!F.empty()) {
    FiberCounter fc(K, dir, k, k + 1);
    for (const auto& cell : F.cells())
      if (static_cast<double>(fc.count(2 * cell.ix + 1, 2 * cell.iy + 1, Rational(1))) < M)
        throw HypothesisError("hereditary_refine: F not inside H(K, M, [delta, 1]) at cell (" +
                              std::to_string(cell.ix) + "," + std::to_string(cell.iy) + ")");
  }
  HereditaryResult res;
  res.mass_F = weight_of(mu, F);
  if (res.mass_F < kappa) throw HypothesisError("hereditary_refine: mu(F) < kappa");
  res.M_prime = to_double(c * kappa / (C_reg * C_reg)) * M;
  auto f = int_functional(dir);
  auto spans = tube_spans(F, f);
  std::map<i128, long> counts;
  for (const auto& s : spans)
    for (i128 t = s.kmin; t <= s.kmax; ++t) ++counts[t];
  // Heavy: more than M' incident cells.
  long min_count = static_cast<long>(std::floor(res.M_prime)) + 1;
  for (const auto& [t, n] : counts) (n >= min_count ? res.heavy_tubes : res.light_tubes)++;
  res.G = refine_by_count(F, spans, counts, min_count, f.D);
  res.mass_G = weight_of(mu, res.G);
  res.min_multiplicity = min_multiplicity(res.G, dir);
  res.holds_mass = 2 * res.mass_G >= res.mass_F;
  res.holds_multiplicity = res.G.empty() || static_cast<double>(res.min_multiplicity) >= res.M_prime;
  if (search && !F.empty()) {
    long maxcount = 0;
    for (const auto& [t, n] : counts) maxcount = std::max(maxcount, n);
    double best = -1;
    for (long T = 1; T <= maxcount; ++T) {
      GridSet G = refine_by_count(F, spans, counts, T, f.D);
      if (G.empty() || 2 * weight_of(mu, G) < res.mass_F) break;
      long mm = min_multiplicity(G, dir);
      if (mm >= T - 1) best = std::max(best, static_cast<double>(std::min<long>(T, mm)));
    }
    if (best >= 0) res.c_max = best * to_double(C_reg * C_reg / kappa) / M;
  }
  return res;
}

DecompositionReport check_mult_decomposition(const GridMeasure& mu, const GridSet& K, const Direction& dir,
                                             const DecompositionParams& p, bool search) {
  require_plain(mu);
  if (p.M < 1 || p.N < p.M) throw PreconditionError("decomposition: need 1 <= M <= N");
  if (p.delta_level < p.Delta_level) throw PreconditionError("decomposition: need delta <= Delta");
  GridSet domain = cells_in_ball(mu.support(), Rational(1));
  const int sl = domain.level() + 1;
  FiberCounter fN(K, dir, p.delta_level, sl);
  FiberCounter fM(K, dir, dyadic_ceil_level(p.inflation * pow2(-p.delta_level)), sl);
  FiberCounter fT(K, dir, p.Delta_level, sl);
  Rational Delta3 = p.inflation * pow2(-p.Delta_level);
  Rational cfac = p.c * p.kappa * p.kappa / (p.A * p.A * p.C_reg * p.C_reg * p.C_reg);
  double tail_threshold = to_double(cfac) * p.N / p.M;
  DecompositionReport rep;
  std::vector<std::pair<long, Rational>> tail_points;  // (multiplicity at [Delta, 3], weight) on the LHS set
  for (const auto& c : domain.cells()) {
    std::int64_t X = 2 * c.ix + 1, Y = 2 * c.iy + 1;
    Rational w = mu.weights()[static_cast<std::size_t>(mu.support().index_of(c))];
    bool inN = static_cast<double>(fN.count(X, Y, p.A)) >= p.N;
    if (inN) rep.lhs += w;
    if (static_cast<double>(fM.count(X, Y, Delta3)) >= p.M) rep.term_main += w;
    if (inN) {
      long mt = fT.count(X, Y, p.inflation);
      tail_points.push_back({mt, w});
      if (static_cast<double>(mt) >= tail_threshold) rep.term_tail += w;
    }
  }
  rep.rhs = (1 + p.kappa) * rep.term_main + p.kappa + rep.term_tail;
  rep.slack = rep.rhs - rep.lhs;
  rep.holds = rep.slack >= 0;
  if (search) {
    Rational need = rep.lhs - (1 + p.kappa) * rep.term_main - p.kappa;
    if (need <= 0) {
      rep.c_max = std::nullopt;
    } else {
      std::sort(tail_points.begin(), tail_points.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
      Rational acc = 0;
      Rational per_c = cfac / p.c * Rational(boost::multiprecision::cpp_rational(p.N)) /
                       Rational(boost::multiprecision::cpp_rational(p.M));
      rep.c_max = Rational(0);
      for (const auto& [mt, w] : tail_points) {
        acc += w;
        if (acc >= need) {
          rep.c_max = Rational(mt) / per_c;
          break;
        }
      }
    }
  }
  return rep;
}

FiberEntropyReport check_fiber_entropy_bound(const GridSet& F, const Direction& dir, const ScaleLadder& ladder,
                                             const std::vector<int>& a, double sigma, double eta, double C) {
  const int L = ladder.delta_level();
  if (F.level() != L) throw PreconditionError("fiber entropy: F must be at resolution delta");
  if (a.size() < 2 || a.front() != 0 || a.back() != ladder.N) throw PreconditionError("partition must run 0..N");
  for (std::size_t i = 0; i + 1 < a.size(); ++i)
    if (a[i] >= a[i + 1]) throw PreconditionError("partition must be strictly increasing");
  if (cells_in_ball(F, Rational(1)).size() != F.size()) throw HypothesisError("fiber entropy: F not inside B(1)");
  const std::size_t n = a.size() - 1;
  FiberEntropyReport rep;
  rep.C = C;
  std::vector<long> weight(F.size(), 0);
  for (std::size_t j = 0; j < n; ++j) {
    int len = a[j + 1] - a[j];
    double threshold = std::exp2(static_cast<double>(ladder.m * len) * sigma);
    int lo = dyadic_ceil_level(Rational(50) * ladder.scale(a[j + 1]));
    Rational hi = Rational(50) * ladder.scale(a[j]);
    FiberCounter fc(F, dir, lo, L + 1);
    for (std::size_t i = 0; i < F.size(); ++i) {
      const auto& c = F.cells()[i];
      if (static_cast<double>(fc.count(2 * c.ix + 1, 2 * c.iy + 1, hi)) >= threshold) weight[i] += len;
    }
  }
  for (std::size_t i = 0; i < F.size(); ++i) {
    double frac = static_cast<double>(weight[i]) / ladder.N;
    rep.max_bad_weight = std::max(rep.max_bad_weight, frac);
    if (frac > eta + 1e-15)
      throw HypothesisError("fiber entropy: bad-scale weight " + std::to_string(frac) + " > eta at cell (" +
                            std::to_string(F.cells()[i].ix) + "," + std::to_string(F.cells()[i].iy) + ")");
  }
  // Max over t of the number of 5δ-cells (rounded up to 8δ) of F met by the fiber pi = t.
  if (!F.empty()) {
    GridSet Fc = coarsen(F, dyadic_ceil_level(Rational(5) * pow2(-L)));
    auto f = int_functional(dir);
    std::int64_t g = std::gcd(std::abs(f.A), std::abs(f.B));
    std::int64_t A = f.A / g, B = f.B / g;
    std::vector<std::pair<i128, int>> events;
    for (const auto& c : Fc.cells()) {
      i128 base = static_cast<i128>(A) * c.ix + static_cast<i128>(B) * c.iy;
      i128 lo = base + std::min<i128>(A, 0) + std::min<i128>(B, 0);
      i128 hi = base + std::max<i128>(A, 0) + std::max<i128>(B, 0);
      bool lc = A >= 0 && B >= 0, hc = A <= 0 && B <= 0;
      // Doubled units: covered integers [2lo + !lc, 2hi - !hc].
      events.push_back({2 * lo + (lc ? 0 : 1), +1});
      events.push_back({2 * hi - (hc ? 0 : 1) + 1, -1});
    }
    std::sort(events.begin(), events.end());
    long cur = 0;
    for (const auto& [x, d] : events) {
      cur += d;
      rep.lhs = std::max(rep.lhs, cur);
    }
  }
  double exponent = static_cast<double>(L) * (sigma + eta);
  rep.rhs = std::pow(C, static_cast<double>(n)) * std::exp2(exponent);
  rep.holds = static_cast<double>(rep.lhs) <= rep.rhs;
  rep.C_min = std::max(1.0, std::pow(static_cast<double>(rep.lhs) / std::exp2(exponent), 1.0 / static_cast<double>(n)));
  return rep;
}

}  // namespace fraclab
