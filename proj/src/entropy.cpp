#include "fraclab/entropy.hpp"

#include "fraclab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace fraclab {

namespace {

using boost::multiprecision::denominator;
using boost::multiprecision::msb;
using boost::multiprecision::numerator;

long double log2_big(const BigInt& v) {
  unsigned top = msb(v);
  if (top < 60) return std::log2(static_cast<long double>(static_cast<unsigned long long>(v)));
  BigInt head = v >> (top - 60);
  return static_cast<long double>(top - 60) + std::log2(static_cast<long double>(static_cast<unsigned long long>(head)));
}

long double log2_rational(const Rational& r) { return log2_big(numerator(r)) - log2_big(denominator(r)); }

struct Neumaier {
  long double sum = 0, comp = 0;
  void add(long double v) {
    long double t = sum + v;
    if (std::fabs(sum) >= std::fabs(v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }
  double value() const { return static_cast<double>(sum + comp); }
};

void require_probability(const Rational& total, const char* what) {
  if (total != 1) throw PreconditionError(std::string(what) + " is not a probability measure (mass " + to_string(total) + ")");
}

void require_plain(const GridMeasure& mu) {
  if (mu.exp2() != 0) throw PreconditionError("entropy: measure carries an irrational scale factor");
}

std::map<Coord, Rational> grouped(const GridMeasure& mu, int level) {
  require_plain(mu);
  if (level > mu.level()) throw PreconditionError("partition finer than the measure's resolution");
  std::map<Coord, Rational> out;
  int shift = mu.level() - level;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const auto& c = mu.support().cells()[i];
    out[{c.ix >> shift, c.iy >> shift}] += mu.weights()[i];
  }
  return out;
}

// coarse part -> (fine part -> mass)
std::map<Coord, std::map<Coord, Rational>> nested(const GridMeasure& mu, int fine, int coarse) {
  if (coarse > fine) throw PreconditionError("coarse partition must not refine the fine one");
  std::map<Coord, std::map<Coord, Rational>> out;
  int shift = fine - coarse;
  for (const auto& [c, m] : grouped(mu, fine)) out[{c.ix >> shift, c.iy >> shift}][c] = m;
  return out;
}

std::map<std::int64_t, Rational> grouped(const ArcMeasure& nu, int level) {
  std::map<std::int64_t, Rational> out;
  for (const auto& [i, m] : nu.masses_at(level)) out[i] = m;
  return out;
}

std::string atom_name(const Coord& c, int level) {
  return "(" + std::to_string(c.ix) + "," + std::to_string(c.iy) + ") at level " + std::to_string(level);
}

}  // namespace

PartitionLadder PartitionLadder::from(const ScaleLadder& ladder) {
  PartitionLadder p;
  for (int j = 0; j <= ladder.N; ++j) p.levels.push_back(ladder.level(j));
  return p;
}

void PartitionLadder::validate(int resolution) const {
  if (levels.empty()) throw PreconditionError("empty partition ladder");
  for (std::size_t i = 0; i + 1 < levels.size(); ++i)
    if (levels[i] >= levels[i + 1]) throw PreconditionError("partition ladder must refine strictly");
  if (levels.back() > resolution) throw PreconditionError("partition ladder finer than the measure's resolution");
}

std::vector<Rational> part_masses(const GridMeasure& mu, int level) {
  std::vector<Rational> out;
  for (const auto& [c, m] : grouped(mu, level))
    if (m > 0) out.push_back(m);
  return out;
}

std::vector<Rational> part_masses(const ArcMeasure& nu, int level) {
  std::vector<Rational> out;
  for (const auto& [i, m] : nu.masses_at(level))
    if (m > 0) out.push_back(m);
  return out;
}

double entropy_of(const std::vector<Rational>& masses) {
  Rational total = 0;
  for (const auto& m : masses) {
    if (m < 0) throw PreconditionError("negative mass");
    total += m;
  }
  require_probability(total, "distribution");
  Neumaier acc;
  for (const auto& m : masses)
    if (m > 0) acc.add(-static_cast<long double>(to_long_double(m)) * log2_rational(m));
  return acc.value();
}

double entropy(const GridMeasure& mu, int level) { return entropy_of(part_masses(mu, level)); }
double entropy(const ArcMeasure& nu, int level) { return entropy_of(part_masses(nu, level)); }

double conditional_entropy(const GridMeasure& mu, int fine, int coarse) {
  require_probability(mu.weight_sum(), "measure");
  Neumaier acc;
  for (const auto& [Q, parts] : nested(mu, fine, coarse)) {
    Rational mq = 0;
    for (const auto& [E, m] : parts) mq += m;
    if (mq == 0) continue;
    for (const auto& [E, m] : parts)
      if (m > 0) acc.add(to_long_double(m) * log2_rational(mq / m));
  }
  return acc.value();
}

double conditional_entropy(const ArcMeasure& nu, int fine, int coarse) {
  require_probability(nu.mass(), "arc measure");
  if (coarse > fine) throw PreconditionError("coarse partition must not refine the fine one");
  std::map<std::int64_t, Rational> coarse_mass = grouped(nu, coarse);
  Neumaier acc;
  for (const auto& [i, m] : grouped(nu, fine)) {
    const Rational& mq = coarse_mass.at(i >> (fine - coarse));
    if (m > 0) acc.add(to_long_double(m) * log2_rational(mq / m));
  }
  return acc.value();
}

EntropyProfile entropy_profile(const GridMeasure& mu, const PartitionLadder& ladder) {
  ladder.validate(mu.level());
  EntropyProfile p;
  p.ladder = ladder;
  for (int l : ladder.levels) {
    auto masses = part_masses(mu, l);
    p.parts.push_back(masses.size());
    p.entropy.push_back(entropy_of(masses));
  }
  Neumaier acc;
  for (std::size_t j = 0; j + 1 < ladder.levels.size(); ++j) {
    p.conditional.push_back(conditional_entropy(mu, ladder.levels[j + 1], ladder.levels[j]));
    acc.add(p.conditional.back());
  }
  p.conditional_sum = acc.value();
  p.chain_rule_error = std::fabs(p.conditional_sum - (p.entropy.back() - p.entropy.front()));
  return p;
}

double kl_divergence(const GridMeasure& nu, const GridMeasure& mu, int level) {
  require_probability(nu.weight_sum(), "nu");
  require_probability(mu.weight_sum(), "mu");
  auto gm = grouped(mu, level);
  Neumaier acc;
  for (const auto& [E, v] : grouped(nu, level)) {
    if (v == 0) continue;
    auto it = gm.find(E);
    if (it == gm.end() || it->second == 0)
      throw PreconditionError("absolute continuity fails on atom " + atom_name(E, level));
    acc.add(to_long_double(v) * log2_rational(v / it->second));
  }
  return acc.value();
}

double kl_conditional(const GridMeasure& nu, const GridMeasure& mu, int fine, int coarse) {
  require_probability(nu.weight_sum(), "nu");
  require_probability(mu.weight_sum(), "mu");
  auto gm = nested(mu, fine, coarse);
  Neumaier acc;
  for (const auto& [F, parts] : nested(nu, fine, coarse)) {
    Rational vf = 0;
    for (const auto& [E, v] : parts) vf += v;
    if (vf == 0) continue;
    auto fit = gm.find(F);
    if (fit == gm.end()) throw PreconditionError("absolute continuity fails on atom " + atom_name(F, coarse));
    Rational mf = 0;
    for (const auto& [E, m] : fit->second) mf += m;
    if (mf == 0) throw PreconditionError("absolute continuity fails on atom " + atom_name(F, coarse));
    for (const auto& [E, v] : parts) {
      if (v == 0) continue;
      auto eit = fit->second.find(E);
      if (eit == fit->second.end() || eit->second == 0)
        throw PreconditionError("absolute continuity fails on atom " + atom_name(E, fine));
      // ν(F) ν_F(E) log(ν_F(E)/μ_F(E))
      acc.add(to_long_double(v) * log2_rational((v / vf) / (eit->second / mf)));
    }
  }
  return acc.value();
}

PartialSumReport kl_partial_sum(const GridMeasure& nu, const GridMeasure& mu, const GridSet& parts) {
  require_probability(nu.weight_sum(), "nu");
  require_probability(mu.weight_sum(), "mu");
  auto gn = grouped(nu, parts.level());
  auto gm = grouped(mu, parts.level());
  Neumaier acc;
  Rational vG = 0, mG = 0;
  for (const auto& E : parts.cells()) {
    auto nit = gn.find(E);
    auto mit = gm.find(E);
    Rational v = nit == gn.end() ? Rational(0) : nit->second;
    Rational m = mit == gm.end() ? Rational(0) : mit->second;
    vG += v;
    mG += m;
    if (v == 0) continue;
    if (m == 0) throw PreconditionError("absolute continuity fails on atom " + atom_name(E, parts.level()));
    acc.add(to_long_double(v) * log2_rational(v / m));
  }
  if (vG == 0) throw PreconditionError("sub-collection has zero nu-mass");
  PartialSumReport r;
  r.sum = acc.value();
  r.bound = static_cast<double>(to_long_double(vG) * log2_rational(vG / mG));
  r.holds = r.sum >= r.bound - 1e-12 && r.bound >= -1.0;
  return r;
}

GoodScalesReport good_scales(const GridSet& K, const ScaleLadder& ladder, double s, double eps, double C) {
  const int L = ladder.delta_level();
  if (K.level() < L) throw PreconditionError("good_scales: set resolution coarser than delta");
  if (eps <= 0) throw PreconditionError("good_scales: eps must be positive");
  GridSet Kd = coarsen(K, L);
  double logK = std::log2(static_cast<double>(Kd.size()));
  if (Kd.empty() || logK < (s - eps) * L - 1e-12)
    throw HypothesisError("good_scales: |K|_delta < delta^{-s+eps} (log2 count " + std::to_string(logK) + ")");
  GridMeasure ubar = GridMeasure::uniform(Kd);
  GoodScalesReport r;
  double root = std::sqrt(eps);
  r.threshold = (s - root) * ladder.m;
  r.required = (1 - 2 * root) * ladder.N;
  for (int j = 0; j < ladder.N; ++j) {
    double h = conditional_entropy(ubar, ladder.level(j + 1), ladder.level(j));
    r.conditional.push_back(h);
    if (h >= r.threshold - 1e-12) r.good.push_back(j);
  }
  r.in_regime = ladder.m >= C / eps;
  r.holds = static_cast<double>(r.good.size()) >= r.required - 1e-12;
  r.shortfall = std::max(0.0, r.required - static_cast<double>(r.good.size()));
  return r;
}

GoodCubesReport good_cubes(const GridMeasure& mu, int Delta_level, const Rational& s, const Rational& eps,
                           const Rational& H, const Rational& C, std::optional<Rational> c) {
  require_probability(mu.weight_sum(), "mu");
  if (s <= 0 || eps <= 0 || H < 1 || C <= 0) throw PreconditionError("good_cubes: need s, eps, C > 0 and H >= 1");
  const int m = Delta_level;
  auto parts = grouped(mu, m);
  std::vector<Rational> masses;
  for (const auto& [Q, w] : parts) masses.push_back(w);
  double h = entropy_of(masses);
  if (h < to_double((s - eps) * m) - 1e-12)
    throw HypothesisError("good_cubes: H(mu, D_Delta) = " + std::to_string(h) + " < (s - eps) log 1/Delta");
  if (!scaled_ge(ExactScaled::make(C, s * m), Rational(static_cast<long long>(parts.size()))))
    throw HypothesisError("good_cubes: |spt mu|_Delta > C Delta^{-s}");
  GoodCubesReport r;
  r.c = c ? *c : eps / (16 * C * s);
  if (r.c <= 0) throw PreconditionError("good_cubes: c must be positive");
  r.required = 1 - Rational(3) / H;
  r.in_regime = -std::log2(to_double(r.c)) <= to_double(eps) * m;
  ExactScaled lower = ExactScaled::make(r.c, -s * m);
  ExactScaled upper = ExactScaled::make(Rational(1), -(s - H * eps) * m);
  std::vector<Rational> below_upper;
  for (const auto& [Q, w] : parts) {
    if (!scaled_ge(upper, w)) continue;
    below_upper.push_back(w);
    if (scaled_le(lower, w)) {
      r.cubes.push_back(Q);
      r.mass += w;
    }
  }
  r.holds = r.mass >= r.required;
  std::sort(below_upper.begin(), below_upper.end(), [](const Rational& a, const Rational& b) { return a > b; });
  Rational acc = 0;
  for (const auto& w : below_upper) {
    acc += w;
    if (acc >= r.required) {
      r.c_max = ExactScaled::make(w, s * m);
      break;
    }
  }
  return r;
}

PigeonholeReport partition_pigeonhole(const GridMeasure& mu, const PartitionLadder& ladder,
                                      const std::vector<std::vector<char>>& in_H, const Rational& d) {
  require_plain(mu);
  require_probability(mu.weight_sum(), "mu");
  ladder.validate(mu.level());
  const std::size_t N = ladder.levels.size();
  if (in_H.size() != N) throw PreconditionError("pigeonhole: one H-membership row per ladder level required");
  for (const auto& row : in_H)
    if (row.size() != mu.size()) throw PreconditionError("pigeonhole: H-membership row length mismatch");
  if (d <= 0 || d > 1) throw PreconditionError("pigeonhole: density must lie in (0,1]");
  const auto& cells = mu.support().cells();
  Rational Nr(static_cast<long long>(N));
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (mu.weights()[i] == 0) continue;
    long cnt = 0;
    for (std::size_t j = 0; j < N; ++j) cnt += in_H[j][i] ? 1 : 0;
    if (Rational(cnt) < d * Nr)
      throw HypothesisError("pigeonhole: hypothesis fails at x = " + atom_name(cells[i], mu.level()) + " (" +
                            std::to_string(cnt) + " levels)");
  }
  PigeonholeReport r;
  r.heavy_count.assign(mu.size(), 0);
  r.heavy.assign(N, 0);
  for (std::size_t j = 0; j < N; ++j) {
    int shift = mu.level() - ladder.levels[j];
    std::map<Coord, std::pair<Rational, Rational>> q;  // part -> (μ(Q), μ(H(Q)))
    Rational total_H = 0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
      auto& e = q[{cells[i].ix >> shift, cells[i].iy >> shift}];
      e.first += mu.weights()[i];
      if (in_H[j][i]) {
        e.second += mu.weights()[i];
        total_H += mu.weights()[i];
      }
    }
    if (total_H < d / 2) continue;
    r.good_levels.push_back(static_cast<int>(j));
    for (const auto& [Q, e] : q)
      if (e.second >= d / 4 * e.first) ++r.heavy[j];
    for (std::size_t i = 0; i < mu.size(); ++i) {
      const auto& e = q[{cells[i].ix >> shift, cells[i].iy >> shift}];
      if (e.second >= d / 4 * e.first) ++r.heavy_count[i];
    }
  }
  r.required = d * d / 16;
  std::vector<Coord> F;
  for (std::size_t i = 0; i < mu.size(); ++i)
    if (Rational(r.heavy_count[i]) >= r.required * Nr) {
      F.push_back(cells[i]);
      r.mass_F += mu.weights()[i];
    }
  r.F = GridSet(mu.level(), std::move(F), mu.support().window());
  r.holds = r.mass_F >= r.required;
  return r;
}

}  // namespace fraclab
