#include "fraclab/branching.hpp"

#include "fraclab/entropy.hpp"
#include "fraclab/errors.hpp"
#include "fraclab/grid_measure.hpp"
#include "fraclab/multiplicity.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace fraclab {

namespace {

using boost::multiprecision::denominator;
using boost::multiprecision::numerator;

void check_points(const ScaleLadder& ladder, std::vector<std::int64_t>& points) {
  if (ladder.m < 1 || ladder.N < 1) throw PreconditionError("ladder needs m, N >= 1");
  if (ladder.delta_level() > 62) throw PreconditionError("ladder too deep for 64-bit lattice indices");
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  const std::int64_t top = std::int64_t{1} << ladder.delta_level();
  for (auto p : points)
    if (p < 0 || p >= top) throw PreconditionError("point outside the delta-lattice of [0,1)");
}

}  // namespace

BranchingReport branching_numbers(const ScaleLadder& ladder, std::vector<std::int64_t> points) {
  check_points(ladder, points);
  BranchingReport rep;
  if (points.empty()) return rep;
  const int L = ladder.delta_level();
  for (int j = 0; j < ladder.N; ++j) {
    int parent_shift = L - ladder.level(j), child_shift = L - ladder.level(j + 1);
    std::int64_t expected = -1;
    std::size_t i = 0;
    while (i < points.size()) {
      std::int64_t parent = points[i] >> parent_shift;
      std::int64_t count = 0, last_child = -1;
      for (; i < points.size() && (points[i] >> parent_shift) == parent; ++i) {
        std::int64_t child = points[i] >> child_shift;
        if (child != last_child) ++count, last_child = child;
      }
      if (expected < 0) {
        expected = count;
      } else if (count != expected) {
        rep.violation_level = j;
        rep.violation_interval = parent;
        rep.expected = expected;
        rep.found = count;
        return rep;
      }
    }
    rep.R.push_back(expected);
  }
  // A uniform set has exactly ∏ R_j points.
  long double prod = 1;
  for (auto r : rep.R) prod *= static_cast<long double>(r);
  if (prod != static_cast<long double>(points.size())) throw Error("branching_numbers: product identity failed");
  rep.uniform = true;
  return rep;
}

UniformizeResult uniformize(const ScaleLadder& ladder, std::vector<std::int64_t> points) {
  check_points(ladder, points);
  if (points.empty()) throw PreconditionError("uniformize: empty input");
  const std::size_t n_in = points.size();
  const int L = ladder.delta_level();
  std::vector<std::int64_t> R(static_cast<std::size_t>(ladder.N), 1);
  for (int j = ladder.N - 1; j >= 0; --j) {
    int parent_shift = L - ladder.level(j), child_shift = L - ladder.level(j + 1);
    // parent -> distinct children (ascending)
    std::map<std::int64_t, std::vector<std::int64_t>> kids;
    for (auto p : points) {
      auto& v = kids[p >> parent_shift];
      std::int64_t c = p >> child_shift;
      if (v.empty() || v.back() != c) v.push_back(c);
    }
    // dyadic class of child count -> (#parents, min count)
    std::map<int, std::pair<std::int64_t, std::int64_t>> classes;
    for (const auto& [par, v] : kids) {
      int cls = 63 - __builtin_clzll(static_cast<unsigned long long>(v.size()));
      auto& e = classes[cls];
      e.second = e.first == 0 ? static_cast<std::int64_t>(v.size()) : std::min<std::int64_t>(e.second, v.size());
      ++e.first;
    }
    int best = -1;
    std::int64_t best_score = -1;
    for (const auto& [cls, e] : classes) {
      std::int64_t score = e.first * e.second;
      if (score >= best_score) best_score = score, best = cls;  // ascending: ties go to the larger class
    }
    std::int64_t keep = classes[best].second;
    R[static_cast<std::size_t>(j)] = keep;
    std::vector<std::int64_t> kept_children;
    for (const auto& [par, v] : kids) {
      int cls = 63 - __builtin_clzll(static_cast<unsigned long long>(v.size()));
      if (cls != best) continue;
      kept_children.insert(kept_children.end(), v.begin(), v.begin() + keep);
    }
    std::sort(kept_children.begin(), kept_children.end());
    std::vector<std::int64_t> next;
    for (auto p : points)
      if (std::binary_search(kept_children.begin(), kept_children.end(), p >> child_shift)) next.push_back(p);
    points.swap(next);
  }
  UniformizeResult res;
  res.set.ladder = ladder;
  res.set.points = points;
  res.set.R = R;
  res.size_ratio = static_cast<double>(points.size()) / static_cast<double>(n_in);
  return res;
}

// ---- Interval decomposition ----

namespace {

// E as disjoint integer runs at a common level.
class IntervalSet {
 public:
  explicit IntervalSet(const std::vector<DyadicInterval>& E) {
    for (const auto& I : E) {
      if (I.level < 0 || I.level > 48) throw PreconditionError("E: interval levels must lie in [0,48]");
      if (I.index < 0 || I.index >= (std::int64_t{1} << I.level)) throw PreconditionError("E: interval outside [0,1)");
      level_ = std::max(level_, I.level);
    }
    std::vector<std::pair<std::int64_t, std::int64_t>> runs;
    for (const auto& I : E) {
      int sh = level_ - I.level;
      runs.push_back({I.index << sh, (I.index + 1) << sh});
    }
    std::sort(runs.begin(), runs.end());
    for (const auto& r : runs) {
      if (!runs_.empty() && r.first <= runs_.back().second)
        runs_.back().second = std::max(runs_.back().second, r.second);
      else
        runs_.push_back(r);
    }
    prefix_.push_back(0);
    for (const auto& r : runs_) prefix_.push_back(prefix_.back() + (r.second - r.first));
  }

  int level() const { return level_; }
  Rational measure() const { return Rational(prefix_.back()) * pow2(-level_); }

  // |E ∩ [a, b)| in units of 2^-level.
  std::int64_t overlap(std::int64_t a, std::int64_t b) const {
    return covered_below(b) - covered_below(a);
  }

  // |E ∩ I| / |I|.
  Rational density(const DyadicInterval& I) const {
    if (I.level <= level_) {
      int sh = level_ - I.level;
      std::int64_t a = I.index << sh, b = (I.index + 1) << sh;
      return Rational(overlap(a, b), b - a);
    }
    std::int64_t cell = I.index >> (I.level - level_);
    return Rational(overlap(cell, cell + 1));
  }

 private:
  std::int64_t covered_below(std::int64_t x) const {
    auto it = std::upper_bound(runs_.begin(), runs_.end(), x,
                               [](std::int64_t v, const std::pair<std::int64_t, std::int64_t>& r) { return v < r.first; });
    std::size_t k = static_cast<std::size_t>(it - runs_.begin());
    if (k == 0) return 0;
    const auto& r = runs_[k - 1];
    return prefix_[k - 1] + std::min(x, r.second) - r.first;
  }

  int level_ = 0;
  std::vector<std::pair<std::int64_t, std::int64_t>> runs_;
  std::vector<std::int64_t> prefix_;
};

int gamma_log(const Rational& gamma) {
  if (gamma <= 0 || gamma > Rational(1, 2) || !is_dyadic_power(gamma))
    throw PreconditionError("gamma must be a dyadic power in (0, 1/2]");
  return dyadic_level_of(gamma);
}

// Coarsest dense dyadic I ⊆ J with |I| >= 2^{-g}|J|, leftmost on ties.
std::optional<DyadicInterval> find_dense(const IntervalSet& E, const DyadicInterval& J, int g, const Rational& factor) {
  for (int t = 0; t <= g; ++t) {
    std::int64_t base = J.index << t;
    for (std::int64_t i = 0; i < (std::int64_t{1} << t); ++i) {
      DyadicInterval I{J.level + t, base + i};
      if (E.density(I) >= factor) return I;
    }
  }
  return std::nullopt;
}

}  // namespace

int interval_steps(const Rational& C, const Rational& gamma) {
  if (C < 1) throw PreconditionError("C must be >= 1");
  Rational target = 1 / (4 * C), v = 1;
  int n = 0;
  while (v > target) {
    v *= 1 - gamma;
    ++n;
    if (n > 10000) throw PreconditionError("interval_steps: no convergence");
  }
  return n;
}

IntervalDecomposition interval_decomposition(const std::vector<DyadicInterval>& Evec, const Rational& C,
                                             const Rational& gamma, const Rational& eps) {
  const int g = gamma_log(gamma);
  if (C < 1) throw PreconditionError("C must be >= 1");
  if (eps <= 0) throw PreconditionError("eps must be positive");
  IntervalSet E(Evec);
  if (E.measure() > eps) throw PreconditionError("|E| exceeds eps");
  IntervalDecomposition out;
  out.C = C, out.gamma = gamma, out.eps = eps;
  out.n_steps = interval_steps(C, gamma);
  Rational rho_max = 1 / (4 * C);
  for (int i = 0; i <= out.n_steps; ++i) rho_max *= gamma;
  out.rho_level = 0;
  while (pow2(-out.rho_level) > rho_max) ++out.rho_level;
  const Rational dense_factor = 2 * C * eps;
  std::vector<DyadicInterval> T{{0, 0}};
  Rational bound = 1;
  out.audit.push_back({0, 1, 0, 0, 0, Rational(1), Rational(1)});
  for (int n = 0; n < out.n_steps && !T.empty(); ++n) {
    std::vector<DyadicInterval> next;
    for (const auto& J : T) {
      auto I = find_dense(E, J, g, dense_factor);
      if (!I) {
        out.G.push_back(J);
        continue;
      }
      out.B.push_back(*I);
      int child_level = J.level + g;
      if (child_level > 62) throw PreconditionError("interval decomposition exceeded 62 levels");
      int sh = child_level - I->level;
      std::int64_t i_lo = I->index << sh, i_hi = (I->index + 1) << sh;
      bool is_short = child_level > out.rho_level;
      for (std::int64_t c = J.index << g; c < (J.index + 1) << g; ++c) {
        if (c >= i_lo && c < i_hi) continue;
        (is_short ? out.S : next).push_back({child_level, c});
      }
    }
    T.swap(next);
    bound *= 1 - gamma;
    Rational tl = 0;
    for (const auto& J : T) tl += J.length();
    out.audit.push_back({n + 1, T.size(), out.G.size(), out.B.size(), out.S.size(), tl, bound});
  }
  out.T = T;
  std::sort(out.G.begin(), out.G.end());
  for (const auto& J : out.G) out.measure_G += J.length();
  out.holds_measure = out.measure_G >= 1 - 1 / C;
  out.holds_length = std::all_of(out.G.begin(), out.G.end(), [&](const DyadicInterval& J) { return J.level <= out.rho_level; });
  out.holds_audit = true;
  for (const auto& a : out.audit) out.holds_audit = out.holds_audit && a.transient_length <= a.bound;
  // Exhaustive density check over every dyadic I ⊆ J with |I| >= γ|J|.
  const Rational contract = 8 * C * eps;
  out.holds_density = true;
  for (const auto& J : out.G)
    for (int t = 0; t <= g; ++t)
      for (std::int64_t i = 0; i < (std::int64_t{1} << t); ++i) {
        Rational d = E.density({J.level + t, (J.index << t) + i});
        ++out.density_checks;
        if (d > out.worst_density) out.worst_density = d;
        if (d >= contract) out.holds_density = false;
      }
  return out;
}

// ---- Branching scale finder ----

TauRationals tau_rationals(const Rational& d, const Rational& tau) {
  if (d <= 1) throw PreconditionError("d must exceed 1");
  if (tau <= 0) throw PreconditionError("tau must be positive");
  TauRationals t;
  Rational dp = 1;  // d^{n-1}
  t.n = 1;
  while (1 / (2 * dp) > tau / 4) {
    dp *= d;
    ++t.n;
    if (t.n > 200) throw PreconditionError("tau_rationals: n out of range");
  }
  Rational q = Rational(1, 2);
  for (int j = 0; j <= t.n; ++j) {
    t.Q0.push_back(q);
    q /= d;
  }
  return t;
}

namespace {

long double log2_rat(const Rational& r) {
  return std::log2(static_cast<long double>(to_long_double(r)));
}

std::map<std::int64_t, Rational> arc_masses(const ArcMeasure& nu, int level) {
  std::map<std::int64_t, Rational> out;
  for (const auto& [i, m] : nu.masses_at(level)) out[i] = m;
  return out;
}

}  // namespace

ScaleFinderCertificate branching_scale_finder(const ArcMeasure& nu, int delta_level, const Rational& d,
                                              const Rational& tau, const Rational& eta) {
  if (nu.mass() != 1) throw PreconditionError("scale finder: nu must be a probability measure");
  if (delta_level < 1) throw PreconditionError("scale finder: delta must be < 1");
  if (eta < 0 || eta >= tau * (d - 1) / 2) throw PreconditionError("scale finder: need 0 <= eta < tau (d - 1) / 2");
  ScaleFinderCertificate cert;
  cert.delta_level = delta_level;
  cert.d = d, cert.tau = tau, cert.eta = eta;
  cert.numbers = tau_rationals(d, tau);
  const int n = cert.numbers.n;
  const int k = delta_level;
  // δ_j = δ^{p_j}, p_j = ½ d^{1-j}, j = 0..n
  Rational p = d / 2;
  for (int j = 0; j <= n; ++j) {
    Rational e = p * k;
    int lvl = static_cast<int>(floor_big(e + Rational(1, 2)));
    cert.exponents.push_back(e);
    cert.levels.push_back(lvl);
    cert.rounding.push_back(Rational(lvl) - e);
    p /= d;
  }
  for (int j = 0; j < n; ++j)
    if (cert.levels[j] <= cert.levels[j + 1] || cert.levels[j + 1] < 0)
      throw PreconditionError("scale finder: rounded scale ladder is not strictly nested; delta too large");
  if (nu.level < cert.levels[0]) throw PreconditionError("scale finder: nu resolution coarser than delta_0");
  // Frostman hypothesis with a rational constant not exceeding δ^{-η}.
  Rational expo = eta * k;
  Rational C = floor_big(expo) == expo ? pow2(static_cast<int>(floor_big(expo)))
                                       : Rational(static_cast<long long>(std::floor(std::exp2(to_double(expo)) * 1048576.0)), 1048576);
  while (!scaled_ge(ExactScaled::make(Rational(1), expo), C)) C -= Rational(1, 1048576);
  cert.frostman_C = C;
  auto fr = check_arc_frostman(nu, tau, C);
  if (!fr.verdict)
    throw HypothesisError("scale finder: Frostman hypothesis nu(B(x,r)) <= delta^{-eta} r^tau fails (best constant " +
                          std::to_string(fr.C_best) + ")");
  for (int j = 0; j < n; ++j) cert.conditional.push_back(conditional_entropy(nu, cert.levels[j], cert.levels[j + 1]));
  cert.j = static_cast<int>(std::max_element(cert.conditional.begin(), cert.conditional.end()) - cert.conditional.begin());
  const Rational tau_bar = tau / (4 * n);
  cert.tau_bar = to_double(tau_bar);
  if (cert.conditional[cert.j] < to_double(tau_bar) * k - 1e-12) {
    std::ostringstream os;
    os << "scale finder: no admissible level; conditional entropies";
    for (double h : cert.conditional) os << " " << h;
    os << " < " << to_double(tau_bar) * k;
    throw HypothesisError(os.str());
  }
  const int j = cert.j;
  cert.p = cert.numbers.Q0[static_cast<std::size_t>(j)];
  const int fine = cert.levels[j], coarse = cert.levels[j + 1];
  auto fine_m = arc_masses(nu, fine);
  auto coarse_m = arc_masses(nu, coarse);
  std::map<std::int64_t, std::vector<std::pair<std::int64_t, Rational>>> children;
  for (const auto& [i, m] : fine_m) children[i >> (fine - coarse)].push_back({i, m});
  const ExactScaled light = ExactScaled::make(Rational(1), -k * tau_bar / 4);
  const double top_threshold = to_double(tau_bar) * k / 2;
  for (const auto& [I, mI] : coarse_m) {
    if (mI == 0) continue;
    long double h = 0;
    for (const auto& [J, mJ] : children[I])
      if (mJ > 0) h += static_cast<long double>(to_long_double(mJ / mI)) * log2_rat(mI / mJ);
    if (static_cast<double>(h) < top_threshold - 1e-12) continue;
    cert.top.push_back(I);
    cert.mass_top += mI;
    for (const auto& [J, mJ] : children[I])
      if (mJ > 0 && !scaled_le(light, mJ / mI)) {
        cert.G.push_back(J);
        cert.mass_G += mJ;
      }
  }
  cert.mass_bound = tau * tau / (150 * n * n);
  auto [ok_mass, ok_ratio] = verify_scale_certificate(nu, cert);
  cert.holds_mass = ok_mass;
  cert.holds_ratio = ok_ratio;
  // statistics for the report
  std::map<std::int64_t, Rational> IG;
  for (auto J : cert.G) IG[J >> (fine - coarse)] += fine_m.at(J);
  cert.worst_ratio_log2 = -1e300;
  for (auto J : cert.G) {
    ++cert.pairs_checked;
    double r = static_cast<double>(log2_rat(fine_m.at(J) / IG.at(J >> (fine - coarse))));
    cert.worst_ratio_log2 = std::max(cert.worst_ratio_log2, r);
  }
  return cert;
}

std::pair<bool, bool> verify_scale_certificate(const ArcMeasure& nu, const ScaleFinderCertificate& cert) {
  const int n = cert.numbers.n;
  const int fine = cert.levels.at(static_cast<std::size_t>(cert.j));
  const int coarse = cert.levels.at(static_cast<std::size_t>(cert.j + 1));
  // ν restricted to G, evaluated on the fine partition from the raw atoms.
  std::map<std::int64_t, Rational> on_G;
  std::vector<std::int64_t> G = cert.G;
  std::sort(G.begin(), G.end());
  for (std::size_t i = 0; i < nu.index.size(); ++i) {
    std::int64_t J = nu.index[i] >> (nu.level - fine);
    if (std::binary_search(G.begin(), G.end(), J)) on_G[J] += nu.weight[i];
  }
  Rational total = 0;
  std::map<std::int64_t, Rational> per_I;
  for (const auto& [J, m] : on_G) {
    total += m;
    per_I[J >> (fine - coarse)] += m;
  }
  Rational bound = cert.tau * cert.tau / (150 * n * n);
  bool mass_ok = total >= bound;
  ExactScaled factor_exp = ExactScaled::make(Rational(1), -Rational(cert.delta_level) * cert.tau / (20 * n));
  bool ratio_ok = true;
  for (const auto& [J, m] : on_G) {
    const Rational& mi = per_I.at(J >> (fine - coarse));
    if (!scaled_ge(factor_exp, m / mi)) ratio_ok = false;
  }
  return {mass_ok, ratio_ok};
}

// ---- δ-measures ----

DeltaMeasure::DeltaMeasure(int level, std::vector<std::int64_t> atoms, std::vector<Rational> weights)
    : level_(level) {
  if (level < 0 || level > 40) throw PreconditionError("delta-measure level out of range");
  if (atoms.size() != weights.size()) throw PreconditionError("delta-measure: atoms and weights differ in length");
  extent_ = std::int64_t{1} << level;
  std::vector<std::pair<std::int64_t, Rational>> items;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (atoms[i] < 0 || atoms[i] >= extent_) throw PreconditionError("delta-measure atom outside [0,1)");
    if (weights[i] < 0) throw PreconditionError("delta-measure: negative weight");
    if (weights[i] > 0) items.push_back({atoms[i], weights[i]});
  }
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < items.size(); ++i)
    if (items[i].first == items[i - 1].first) throw PreconditionError("delta-measure: repeated atom");
  Rational total = 0;
  BigInt den = 1;
  for (const auto& [a, w] : items) {
    total += w;
    den = boost::multiprecision::lcm(den, BigInt(denominator(w)));
  }
  if (total != 1) throw PreconditionError("delta-measure must have mass 1 (got " + to_string(total) + ")");
  if (boost::multiprecision::msb(den) > 60) throw PreconditionError("delta-measure: common denominator too large");
  den_ = to_i128(den);
  for (const auto& [a, w] : items) {
    atoms_.push_back(a);
    num_.push_back(to_i128(numerator(w) * (den / denominator(w))));
  }
}

DeltaMeasure DeltaMeasure::uniform(int level, std::vector<std::int64_t> atoms) {
  std::sort(atoms.begin(), atoms.end());
  atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
  if (atoms.empty()) throw PreconditionError("uniform delta-measure on no atoms");
  std::vector<Rational> w(atoms.size(), Rational(1, static_cast<long long>(atoms.size())));
  return DeltaMeasure(level, std::move(atoms), std::move(w));
}

Rational DeltaMeasure::mass() const {
  BigInt s = 0;
  for (auto v : num_) s += from_i128(v);
  return Rational(s, from_i128(den_));
}

Rational DeltaMeasure::l2_squared() const {
  BigInt s = 0;
  for (auto v : num_) {
    BigInt b = from_i128(v);
    s += b * b;
  }
  BigInt d = from_i128(den_);
  return Rational(s, d * d);
}

double DeltaMeasure::l2() const { return std::sqrt(to_double(l2_squared())); }

double l2_norm(const DeltaMeasure& eta) { return eta.l2(); }

DeltaMeasure convolve(const DeltaMeasure& a, const DeltaMeasure& b) {
  if (a.level_ != b.level_) throw PreconditionError("convolution scale mismatch");
  DeltaMeasure out;
  out.level_ = a.level_;
  out.extent_ = a.extent_ + b.extent_;
  out.den_ = a.den_ * b.den_;
  std::map<std::int64_t, i128> acc;
  if (out.extent_ <= (std::int64_t{1} << 24)) {
    std::vector<i128> dense(static_cast<std::size_t>(out.extent_), 0);
    for (std::size_t i = 0; i < a.atoms_.size(); ++i)
      for (std::size_t j = 0; j < b.atoms_.size(); ++j)
        dense[static_cast<std::size_t>(a.atoms_[i] + b.atoms_[j])] += a.num_[i] * b.num_[j];
    for (std::size_t z = 0; z < dense.size(); ++z)
      if (dense[z] != 0) {
        out.atoms_.push_back(static_cast<std::int64_t>(z));
        out.num_.push_back(dense[z]);
      }
  } else {
    for (std::size_t i = 0; i < a.atoms_.size(); ++i)
      for (std::size_t j = 0; j < b.atoms_.size(); ++j) acc[a.atoms_[i] + b.atoms_[j]] += a.num_[i] * b.num_[j];
    for (const auto& [z, v] : acc) {
      out.atoms_.push_back(z);
      out.num_.push_back(v);
    }
  }
  return out;
}

InverseHypothesisReport inverse_hypothesis_gap(const DeltaMeasure& eta1, const DeltaMeasure& eta2,
                                               const Rational& kappa) {
  if (eta1.level() != eta2.level()) throw PreconditionError("inverse hypothesis: scale mismatch");
  if (kappa < 0) throw PreconditionError("kappa must be >= 0");
  DeltaMeasure c = convolve(eta1, eta2);
  Rational ratio = c.l2_squared() / eta1.l2_squared();
  InverseHypothesisReport r;
  r.conv_norm = c.l2();
  r.eta1_norm = eta1.l2();
  const int k = eta1.level();
  r.kappa_star = k == 0 ? 0.0 : std::max(0.0, -static_cast<double>(log2_rat(ratio)) / (2.0 * k));
  r.holds = scaled_le(ExactScaled::make(Rational(1), -2 * kappa * k), ratio);
  return r;
}

StructureReport check_inverse_structure(const DeltaMeasure& eta2, const ScaleLadder& ladder,
                                        const std::vector<std::int64_t>& A, const std::vector<std::int64_t>& B,
                                        double rho) {
  if (eta2.level() != ladder.delta_level()) throw PreconditionError("structure check: ladder does not match delta");
  for (auto b : B)
    if (!std::binary_search(eta2.atoms().begin(), eta2.atoms().end(), b))
      throw PreconditionError("structure check: B is not inside spt eta2");
  StructureReport r;
  r.A = branching_numbers(ladder, A);
  r.B = branching_numbers(ladder, B);
  const double thr = std::exp2((1 - rho) * ladder.m);
  if (r.A.uniform)
    for (int j = 0; j < ladder.N; ++j)
      if (static_cast<double>(r.A.R[static_cast<std::size_t>(j)]) >= thr) r.S.push_back(j);
  r.inclusion = r.A.uniform && r.B.uniform;
  if (r.inclusion)
    for (int j = 0; j < ladder.N; ++j)
      if (r.B.R[static_cast<std::size_t>(j)] > 1 && !std::binary_search(r.S.begin(), r.S.end(), j)) r.inclusion = false;
  const double logdelta = -static_cast<double>(ladder.delta_level());
  const double log_inv_norm2 = -static_cast<double>(log2_rat(eta2.l2_squared()));
  r.lhs = static_cast<double>(ladder.m) * static_cast<double>(r.S.size());
  r.rhs_plus = log_inv_norm2 + rho * logdelta;
  r.rhs_minus = log_inv_norm2 - rho * (-logdelta);
  r.holds_plus = r.lhs >= r.rhs_plus - 1e-12;
  r.holds_minus = r.lhs >= r.rhs_minus - 1e-12;
  return r;
}

ProductBound branching_product_bound(const std::vector<std::int64_t>& R, const std::vector<int>& S, int m,
                                     double rho) {
  ProductBound b;
  for (std::size_t n = 0; n < R.size(); ++n) {
    if (R[n] < 1) throw PreconditionError("branching numbers must be >= 1");
    double l = std::log2(static_cast<double>(R[n]));
    b.log2_product += l;
    if (!std::binary_search(S.begin(), S.end(), static_cast<int>(n))) b.log2_bound += l;
  }
  b.log2_bound += (1 - rho) * m * static_cast<double>(S.size());
  b.holds = b.log2_product >= b.log2_bound - 1e-9;
  return b;
}

// ---- Projection branching lower bound ----

namespace {

std::vector<int> bad_scale_counts(const GridSet& Kd, const Direction& dir, const ScaleLadder& ladder, double sigma) {
  std::vector<int> bad(Kd.size(), 0);
  const double threshold = std::exp2(ladder.m * sigma);
  for (int j = 0; j < ladder.N; ++j) {
    int lo = dyadic_ceil_level(Rational(10) * ladder.scale(j + 1));
    FiberCounter fc(Kd, dir, lo, Kd.level() + 1);
    Rational hi = Rational(10) * ladder.scale(j);
    for (std::size_t i = 0; i < Kd.size(); ++i) {
      const auto& c = Kd.cells()[i];
      if (static_cast<double>(fc.count(2 * c.ix + 1, 2 * c.iy + 1, hi)) > threshold) ++bad[i];
    }
  }
  return bad;
}

}  // namespace

double bad_scale_density(const GridSet& K, const Direction& dir, const ScaleLadder& ladder, double sigma) {
  GridSet Kd = coarsen(K, ladder.delta_level());
  auto bad = bad_scale_counts(Kd, dir, ladder, sigma);
  int mx = bad.empty() ? 0 : *std::max_element(bad.begin(), bad.end());
  return static_cast<double>(mx) / ladder.N;
}

LowerBoundWitness branching_lower_bound_witness(const GridSet& K, const Direction& dir, const ScaleLadder& ladder,
                                                double s, double sigma, double eps, double C) {
  const int L = ladder.delta_level();
  if (K.level() < L) throw PreconditionError("witness: set resolution coarser than delta");
  GridSet Kd = coarsen(K, L);
  double logK = std::log2(static_cast<double>(Kd.size()));
  if (Kd.empty() || logK < (s - eps * eps / 2) * L - 1e-12)
    throw HypothesisError("witness: |K|_delta < delta^{-s+eps^2/2}");
  auto bad = bad_scale_counts(Kd, dir, ladder, sigma);
  LowerBoundWitness w;
  for (std::size_t i = 0; i < Kd.size(); ++i) {
    double frac = static_cast<double>(bad[i]) / ladder.N;
    w.measured_eps = std::max(w.measured_eps, frac);
    if (bad[i] > eps * ladder.N + 1e-12) {
      const auto& c = Kd.cells()[i];
      throw HypothesisError("witness: bad-scale count " + std::to_string(bad[i]) + " > eps N at x = center of (" +
                            std::to_string(c.ix) + "," + std::to_string(c.iy) + ") level " + std::to_string(L));
    }
  }
  w.bound_log2 = ladder.m * (s - sigma - 100 * eps);
  w.required = (1 - 10 * eps) * ladder.N;
  for (int j = 0; j < ladder.N; ++j) {
    int sh = L - ladder.level(j);
    std::map<Coord, std::vector<Coord>> cubes;
    for (const auto& c : Kd.cells()) cubes[{c.ix >> sh, c.iy >> sh}].push_back(c);
    WitnessLevel best{j, {}, 0, false};
    for (auto& [Q, cells] : cubes) {
      std::size_t cnt = project_cover(GridSet(L, cells, Kd.window()), dir, ladder.level(j + 1));
      if (cnt > best.count) best.count = cnt, best.cube = Q;
    }
    best.good = std::log2(static_cast<double>(best.count)) >= w.bound_log2 - 1e-12;
    if (best.good) w.G.push_back(j);
    w.levels.push_back(best);
  }
  std::ostringstream cond;
  cond << "log2(1/Delta) = " << ladder.m << " >= 2C/eps^2 = ";
  if (eps > 0) {
    double need = 2 * C / (eps * eps);
    cond << need;
    w.in_regime = ladder.m >= need;
  } else {
    cond << "inf";
  }
  w.regime_condition = cond.str();
  w.holds = static_cast<double>(w.G.size()) >= w.required - 1e-12;
  return w;
}

}  // namespace fraclab
