#include "fraclab/fractal_gen.hpp"

#include "fraclab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <regex>
#include <set>
#include <sstream>

namespace fraclab {

namespace {

int log2_exact(long v) {
  if (v <= 0 || (v & (v - 1)) != 0) return -1;
  int k = 0;
  while ((1L << k) < v) ++k;
  return k;
}

std::string strip(std::string s) {
  s.erase(std::remove_if(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t'; }), s.end());
  return s;
}

}  // namespace

int DigitSystem::bits() const {
  int k = log2_exact(base);
  if (k <= 0) throw PreconditionError("digit base must be a power of two >= 2");
  return k;
}

double DigitSystem::dimension() const {
  return std::log(static_cast<double>(digits.size())) / std::log(static_cast<double>(base));
}

std::optional<Rational> DigitSystem::exact_dimension() const {
  int a = log2_exact(static_cast<long>(digits.size()));
  if (a < 0) return std::nullopt;
  return Rational(a, bits());
}

std::string DigitSystem::spec() const {
  std::string s = "b=" + std::to_string(base) + ";D=";
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i) s += ",";
    s += "(" + std::to_string(digits[i].first) + "," + std::to_string(digits[i].second) + ")";
  }
  return s + ";n=" + std::to_string(depth);
}

DigitSystem parse_digit_system(const std::string& raw) {
  DigitSystem sys;
  sys.digits.clear();
  bool have_b = false, have_d = false;
  std::stringstream ss(strip(raw));
  std::string part;
  while (std::getline(ss, part, ';')) {
    if (part.empty()) continue;
    auto eq = part.find('=');
    if (eq == std::string::npos) throw ParseError("digit system: expected key=value in '" + part + "'");
    std::string key = part.substr(0, eq), val = part.substr(eq + 1);
    if (key == "b") {
      sys.base = std::stoi(val);
      have_b = true;
    } else if (key == "n") {
      sys.depth = std::stoi(val);
    } else if (key == "D") {
      static const std::regex pair_re(R"(\((-?\d+),(-?\d+)\))");
      std::string rest = val;
      for (std::sregex_iterator it(val.begin(), val.end(), pair_re), end; it != end; ++it)
        sys.digits.push_back({std::stoi((*it)[1]), std::stoi((*it)[2])});
      if (sys.digits.empty()) throw ParseError("digit system: empty or malformed digit list '" + val + "'");
      have_d = true;
    } else {
      throw ParseError("digit system: unknown key '" + key + "'");
    }
  }
  if (!have_b || !have_d) throw ParseError("digit system needs b= and D=");
  sys.bits();
  std::set<std::pair<int, int>> seen;
  for (auto [x, y] : sys.digits) {
    if (x < 0 || y < 0 || x >= sys.base || y >= sys.base)
      throw ParseError("digit (" + std::to_string(x) + "," + std::to_string(y) + ") outside 0..b-1");
    if (!seen.insert({x, y}).second) throw ParseError("duplicate digit");
  }
  if (sys.depth < 1) throw ParseError("depth must be >= 1");
  return sys;
}

PlanarInstance generate_planar(const DigitSystem& sys) {
  const int level = sys.level();
  if (level > 20) throw PreconditionError("generate_planar: resolution overflow (level " + std::to_string(level) + ")");
  std::vector<Coord> cells{{0, 0}};
  for (int t = 0; t < sys.depth; ++t) {
    std::vector<Coord> next;
    next.reserve(cells.size() * sys.digits.size());
    for (const auto& c : cells)
      for (auto [dx, dy] : sys.digits) next.push_back({c.ix * sys.base + dx, c.iy * sys.base + dy});
    cells = std::move(next);
  }
  GridSet set(level, std::move(cells));
  return {set, GridMeasure::uniform(set)};
}

Rational ArcMeasure::mass() const {
  Rational s = 0;
  for (const auto& w : weight) s += w;
  return s;
}

std::vector<std::pair<std::int64_t, Rational>> ArcMeasure::masses_at(int j) const {
  if (j > level) throw PreconditionError("arc partition finer than the measure");
  std::vector<std::pair<std::int64_t, Rational>> out;
  for (std::size_t i = 0; i < index.size(); ++i) {
    std::int64_t a = index[i] >> (level - j);
    if (out.empty() || out.back().first != a) out.push_back({a, Rational(0)});
    out.back().second += weight[i];
  }
  return out;
}

ArcKind parse_arc_kind(const std::string& raw) {
  std::string s = strip(raw);
  ArcKind k;
  if (s == "uniform") return k;
  if (s.rfind("single", 0) == 0) {
    k.type = ArcKind::Type::SingleArc;
    if (auto c = s.find(':'); c != std::string::npos) k.arc_index = std::stoll(s.substr(c + 1));
    return k;
  }
  if (s.rfind("cantor", 0) == 0) {
    k.type = ArcKind::Type::Cantor;
    auto c = s.find(':');
    if (c == std::string::npos) throw ParseError("cantor arc kind needs ':b=..;D=..'");
    std::stringstream ss(s.substr(c + 1));
    std::string part;
    while (std::getline(ss, part, ';')) {
      if (part.rfind("b=", 0) == 0) {
        k.base = std::stoi(part.substr(2));
      } else if (part.rfind("D=", 0) == 0) {
        std::stringstream ds(part.substr(2));
        std::string d;
        while (std::getline(ds, d, ',')) k.digits.push_back(std::stoi(d));
      } else if (!part.empty()) {
        throw ParseError("cantor arc kind: unknown field '" + part + "'");
      }
    }
    if (log2_exact(k.base) <= 0 || k.digits.empty()) throw ParseError("cantor arc kind: bad base or digits");
    for (int d : k.digits)
      if (d < 0 || d >= k.base) throw ParseError("cantor digit out of range");
    std::sort(k.digits.begin(), k.digits.end());
    k.digits.erase(std::unique(k.digits.begin(), k.digits.end()), k.digits.end());
    return k;
  }
  throw ParseError("unknown arc measure kind '" + raw + "'");
}

ArcMeasure generate_arc_measure(const ArcKind& kind, int level) {
  if (level < 1) throw PreconditionError("arc measure level must be >= 1");
  if (level > 24) throw PreconditionError("arc measure level too fine");
  ArcMeasure nu;
  nu.level = level;
  switch (kind.type) {
    case ArcKind::Type::Uniform: {
      std::int64_t n = std::int64_t{1} << level;
      for (std::int64_t i = 0; i < n; ++i) nu.index.push_back(i), nu.weight.push_back(Rational(1, n));
      break;
    }
    case ArcKind::Type::SingleArc: {
      if (kind.arc_index < 0 || kind.arc_index >= (std::int64_t{1} << level))
        throw PreconditionError("single arc index out of range");
      nu.index.push_back(kind.arc_index);
      nu.weight.push_back(Rational(1));
      break;
    }
    case ArcKind::Type::Cantor: {
      int bits = log2_exact(kind.base);
      if (level % bits != 0) throw PreconditionError("cantor arc level must be a multiple of log2(base)");
      std::vector<std::int64_t> idx{0};
      for (int t = 0; t < level / bits; ++t) {
        std::vector<std::int64_t> next;
        for (auto i : idx)
          for (int d : kind.digits) next.push_back(i * kind.base + d);
        idx = std::move(next);
      }
      std::sort(idx.begin(), idx.end());
      for (auto i : idx) nu.index.push_back(i), nu.weight.push_back(Rational(1, idx.size()));
      break;
    }
  }
  return nu;
}

RegularityReport check_arc_frostman(const ArcMeasure& nu, const Rational& tau, const Rational& C) {
  if (nu.index.empty()) throw PreconditionError("Frostman scan of an empty arc measure");
  const int k = nu.level;
  const std::int64_t n = std::int64_t{1} << k;
  BigInt den = 1;
  for (const auto& w : nu.weight) den = boost::multiprecision::lcm(den, BigInt(boost::multiprecision::denominator(w)));
  std::vector<i128> prefix(static_cast<std::size_t>(n + 1), 0);
  for (std::size_t i = 0; i < nu.index.size(); ++i)
    prefix[static_cast<std::size_t>(nu.index[i] + 1)] +=
        to_i128(boost::multiprecision::numerator(nu.weight[i]) * (den / boost::multiprecision::denominator(nu.weight[i])));
  for (std::int64_t i = 1; i <= n; ++i) prefix[static_cast<std::size_t>(i)] += prefix[static_cast<std::size_t>(i - 1)];
  auto range_sum = [&](std::int64_t lo, std::int64_t hi) -> i128 {  // cyclic inclusive
    if (hi - lo + 1 >= n) return prefix[static_cast<std::size_t>(n)];
    std::int64_t a = ((lo % n) + n) % n, b = ((hi % n) + n) % n;
    if (a <= b) return prefix[static_cast<std::size_t>(b + 1)] - prefix[static_cast<std::size_t>(a)];
    return prefix[static_cast<std::size_t>(n)] - prefix[static_cast<std::size_t>(a)] + prefix[static_cast<std::size_t>(b + 1)];
  };
  RegularityReport rep;
  rep.s = tau;
  rep.C = C;
  rep.verdict = true;
  bool have = false;
  double best = 0;
  Rational rden(den);
  for (int i = 0; k - i >= 1; ++i) {  // radii 2^{i-k} up to 1/2
    std::int64_t rho = std::int64_t{2} << i;
    i128 smax = -1;
    std::int64_t bx = 0;
    for (std::int64_t X = 0; X < 2 * n; ++X) {
      std::int64_t lo = floor_div(X - rho - 2, 2) + 1;
      std::int64_t hi = -floor_div(-(X + rho), 2) - 1;
      i128 v = range_sum(lo, hi);
      ++rep.tested;
      if (v > smax) smax = v, bx = X;
    }
    auto ratio = ExactScaled::make(Rational(from_i128(smax)) / rden, Rational(k - i) * tau);
    if (!scaled_le(ratio, C)) rep.verdict = false;
    double d = ratio.to_double();
    if (!have || d > best) {
      have = true, best = d;
      rep.max_ratio = ratio;
      rep.witness = {{dyadic(bx, k + 1), Rational(0)}, pow2(i - k), Rational(0), "upper"};
    }
  }
  rep.C_best = best;
  return rep;
}

std::vector<WeightedDirection> directions_from(const ArcMeasure& nu, int spacing_level) {
  if (spacing_level > nu.level) throw PreconditionError("direction spacing finer than the arc measure");
  std::vector<WeightedDirection> out;
  for (auto& [a, m] : nu.masses_at(spacing_level))
    out.push_back({Direction::from_slope(dyadic(2 * a + 1, spacing_level + 1)), m, {spacing_level, a}});
  return out;
}

void write_arc(std::ostream& os, const ArcMeasure& nu) {
  os << "arc " << nu.level << "\n";
  for (std::size_t i = 0; i < nu.index.size(); ++i)
    os << nu.index[i] << " " << boost::multiprecision::numerator(nu.weight[i]) << " "
       << boost::multiprecision::denominator(nu.weight[i]) << "\n";
}

ArcMeasure read_arc(std::istream& is) {
  std::string line;
  ArcMeasure nu;
  bool head = false;
  std::map<std::int64_t, Rational> w;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    if (!head) {
      std::string kw;
      ls >> kw >> nu.level;
      if (kw != "arc" || ls.fail()) throw ParseError("expected 'arc k' header");
      head = true;
      continue;
    }
    std::int64_t i;
    std::string p, q;
    ls >> i >> p >> q;
    if (ls.fail()) throw ParseError("bad arc line '" + line + "'");
    if (i < 0 || i >= (std::int64_t{1} << nu.level)) throw ParseError("arc index out of range");
    Rational v = parse_rational(p + "/" + q);
    if (v <= 0) throw ParseError("arc weights must be positive");
    if (!w.emplace(i, v).second) throw ParseError("duplicate arc index");
  }
  if (!head) throw ParseError("missing arc header");
  for (auto& [i, v] : w) nu.index.push_back(i), nu.weight.push_back(v);
  return nu;
}

}  // namespace fraclab
