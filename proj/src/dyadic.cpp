#include "fraclab/dyadic.hpp"

#include "fraclab/errors.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace fraclab {

DyadicCell DyadicCell::ancestor(int j) const {
  if (j > level) throw PreconditionError("ancestor level finer than cell");
  int d = level - j;
  return {j, ix >> d, iy >> d};
}

namespace {

std::int64_t clamp64(const BigInt& v) {
  static const BigInt lo = std::numeric_limits<std::int64_t>::min() / 4;
  static const BigInt hi = std::numeric_limits<std::int64_t>::max() / 4;
  if (v < lo) return static_cast<std::int64_t>(lo);
  if (v > hi) return static_cast<std::int64_t>(hi);
  return static_cast<std::int64_t>(v);
}

BigInt ceil_big(const Rational& r) { return -floor_big(-r); }

// Inclusive index range of level-k cells meeting [a, b).
std::pair<std::int64_t, std::int64_t> window_range(const Rational& a, const Rational& b, int k) {
  Rational s = pow2(k);
  return {clamp64(floor_big(a * s)), clamp64(ceil_big(b * s) - 1)};
}

void normalize(std::vector<Coord>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

GridSet::GridSet(int level, std::vector<Coord> cells, Window window)
    : level_(level), cells_(std::move(cells)), window_(std::move(window)) {
  normalize(cells_);
  if (!cells_.empty()) {
    auto [xl, xh] = window_range(window_.x0, window_.x1, level_);
    auto [yl, yh] = window_range(window_.y0, window_.y1, level_);
    for (const auto& c : cells_)
      if (c.ix < xl || c.ix > xh || c.iy < yl || c.iy > yh)
        throw PreconditionError("cell (" + std::to_string(c.ix) + "," + std::to_string(c.iy) +
                                ") at level " + std::to_string(level_) + " lies outside the window");
  }
}

bool GridSet::contains(const Coord& c) const { return std::binary_search(cells_.begin(), cells_.end(), c); }

std::ptrdiff_t GridSet::index_of(const Coord& c) const {
  auto it = std::lower_bound(cells_.begin(), cells_.end(), c);
  if (it == cells_.end() || !(*it == c)) return -1;
  return it - cells_.begin();
}

Point GridSet::center(const Coord& c) const {
  return {dyadic(2 * c.ix + 1, level_ + 1), dyadic(2 * c.iy + 1, level_ + 1)};
}

GridSet coarsen(const GridSet& set, int j) {
  if (j > set.level()) throw PreconditionError("coarsen target finer than resolution");
  int d = set.level() - j;
  std::vector<Coord> out;
  out.reserve(set.size());
  for (const auto& c : set.cells()) out.push_back({c.ix >> d, c.iy >> d});
  return GridSet(j, std::move(out), set.window());
}

GridSet at_level(const GridSet& set, int j) {
  if (j <= set.level()) return coarsen(set, j);
  int d = j - set.level();
  if (d > 12) throw PreconditionError("refinement by more than 12 levels");
  std::int64_t n = std::int64_t{1} << d;
  std::vector<Coord> out;
  out.reserve(set.size() * static_cast<std::size_t>(n * n));
  for (const auto& c : set.cells())
    for (std::int64_t a = 0; a < n; ++a)
      for (std::int64_t b = 0; b < n; ++b) out.push_back({c.ix * n + a, c.iy * n + b});
  return GridSet(j, std::move(out), set.window());
}

std::size_t covering_count(const GridSet& set, int j) {
  if (j > set.level())
    throw PreconditionError("covering scale 2^-" + std::to_string(j) + " is finer than resolution 2^-" +
                            std::to_string(set.level()) + " (information loss)");
  if (set.empty()) return 0;
  return coarsen(set, j).size();
}

GridSet neighborhood(const GridSet& set, const Rational& radius) {
  if (radius < set.side()) throw PreconditionError("neighborhood radius below one cell side");
  // Offsets (dx, dy) in cell units with gap distance < radius.
  Rational r2 = radius * radius * pow2(2 * set.level());
  std::int64_t reach = static_cast<std::int64_t>(ceil_big(radius * pow2(set.level()))) + 1;
  std::vector<Coord> stencil;
  for (std::int64_t dy = -reach; dy <= reach; ++dy)
    for (std::int64_t dx = -reach; dx <= reach; ++dx) {
      std::int64_t gx = std::max<std::int64_t>(std::abs(dx) - 1, 0);
      std::int64_t gy = std::max<std::int64_t>(std::abs(dy) - 1, 0);
      if (Rational(gx * gx + gy * gy) < r2) stencil.push_back({dx, dy});
    }
  auto [xl, xh] = window_range(set.window().x0, set.window().x1, set.level());
  auto [yl, yh] = window_range(set.window().y0, set.window().y1, set.level());
  std::vector<Coord> out;
  for (const auto& c : set.cells())
    for (const auto& o : stencil) {
      Coord n{c.ix + o.ix, c.iy + o.iy};
      if (n.ix >= xl && n.ix <= xh && n.iy >= yl && n.iy <= yh) out.push_back(n);
    }
  return GridSet(set.level(), std::move(out), set.window());
}

Rational point_cell_distance2(const Point& p, int level, const Coord& c) {
  Rational h = pow2(-level);
  auto gap = [&](const Rational& v, std::int64_t i) -> Rational {
    Rational lo = Rational(i) * h;
    Rational hi = lo + h;
    if (v < lo) return lo - v;
    if (v > hi) return v - hi;
    return Rational(0);
  };
  Rational gx = gap(p.x, c.ix), gy = gap(p.y, c.iy);
  return gx * gx + gy * gy;
}

GridSet ball_cells(const Point& center, const Rational& radius, int level, const Window& window) {
  if (radius <= 0) throw PreconditionError("ball radius must be positive");
  Rational s = pow2(level);
  auto [wxl, wxh] = window_range(window.x0, window.x1, level);
  auto [wyl, wyh] = window_range(window.y0, window.y1, level);
  std::int64_t xl = std::max(clamp64(floor_big((center.x - radius) * s)), wxl);
  std::int64_t xh = std::min(clamp64(floor_big((center.x + radius) * s)), wxh);
  std::int64_t yl = std::max(clamp64(floor_big((center.y - radius) * s)), wyl);
  std::int64_t yh = std::min(clamp64(floor_big((center.y + radius) * s)), wyh);
  Rational r2 = radius * radius;
  std::vector<Coord> out;
  for (std::int64_t iy = yl; iy <= yh; ++iy)
    for (std::int64_t ix = xl; ix <= xh; ++ix)
      if (point_cell_distance2(center, level, {ix, iy}) < r2) out.push_back({ix, iy});
  return GridSet(level, std::move(out), window);
}

GridSet set_union(const GridSet& a, const GridSet& b) {
  if (a.level() != b.level()) throw PreconditionError("union of sets at different levels");
  std::vector<Coord> out;
  std::set_union(a.cells().begin(), a.cells().end(), b.cells().begin(), b.cells().end(), std::back_inserter(out));
  return GridSet(a.level(), std::move(out), a.window());
}

GridSet set_intersection(const GridSet& a, const GridSet& b) {
  if (a.level() != b.level()) throw PreconditionError("intersection of sets at different levels");
  std::vector<Coord> out;
  std::set_intersection(a.cells().begin(), a.cells().end(), b.cells().begin(), b.cells().end(),
                        std::back_inserter(out));
  return GridSet(a.level(), std::move(out), a.window());
}

bool is_subset(const GridSet& a, const GridSet& b) {
  if (a.level() != b.level()) throw PreconditionError("subset test at different levels");
  return std::includes(b.cells().begin(), b.cells().end(), a.cells().begin(), a.cells().end());
}

Rational cell_distance2(int level, const Coord& a, const Coord& b) {
  std::int64_t gx = std::max<std::int64_t>(std::abs(a.ix - b.ix) - 1, 0);
  std::int64_t gy = std::max<std::int64_t>(std::abs(a.iy - b.iy) - 1, 0);
  return Rational(gx * gx + gy * gy) * pow2(-2 * level);
}

Rational diameter2(const GridSet& set) {
  if (set.empty()) return Rational(0);
  // Convex hull of cell corners (monotone chain), then all hull pairs.
  std::vector<Coord> pts;
  pts.reserve(set.size() * 4);
  for (const auto& c : set.cells())
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) pts.push_back({c.ix + a, c.iy + b});
  std::sort(pts.begin(), pts.end(), [](const Coord& p, const Coord& q) {
    return p.ix != q.ix ? p.ix < q.ix : p.iy < q.iy;
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  auto cross = [](const Coord& o, const Coord& a, const Coord& b) {
    return static_cast<i128>(a.ix - o.ix) * (b.iy - o.iy) - static_cast<i128>(a.iy - o.iy) * (b.ix - o.ix);
  };
  std::vector<Coord> hull;
  if (pts.size() < 3) {
    hull = pts;
  } else {
    std::vector<Coord> h(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
      while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= 0) --k;
      h[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
      while (k >= t && cross(h[k - 2], h[k - 1], pts[i - 1]) <= 0) --k;
      h[k++] = pts[i - 1];
    }
    h.resize(k - 1);
    hull = std::move(h);
  }
  i128 best = 0;
  for (std::size_t i = 0; i < hull.size(); ++i)
    for (std::size_t j = i + 1; j < hull.size(); ++j) {
      i128 dx = hull[i].ix - hull[j].ix, dy = hull[i].iy - hull[j].iy;
      best = std::max(best, dx * dx + dy * dy);
    }
  return Rational(BigInt(static_cast<std::int64_t>(best))) * pow2(-2 * set.level());
}

// ---- serialization ----

void write_text(std::ostream& os, const GridSet& set) {
  os << "level " << set.level() << "\n";
  if (!(set.window() == Window{})) {
    const auto& w = set.window();
    os << "window " << to_string(w.x0) << " " << to_string(w.y0) << " " << to_string(w.x1) << " "
       << to_string(w.y1) << "\n";
  }
  for (const auto& c : set.cells()) os << c.ix << " " << c.iy << "\n";
}

GridSet read_text(std::istream& is) {
  std::string line;
  int level = 0;
  bool have_level = false;
  Window window{};
  std::vector<Coord> cells;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    if (!have_level) {
      std::string kw;
      ls >> kw >> level;
      if (kw != "level" || ls.fail()) throw ParseError("expected 'level k' header, got '" + line + "'");
      have_level = true;
      continue;
    }
    if (line.rfind("window", 0) == 0) {
      std::string kw, a, b, c, d;
      ls >> kw >> a >> b >> c >> d;
      if (ls.fail()) throw ParseError("bad window line '" + line + "'");
      window = {parse_rational(a), parse_rational(b), parse_rational(c), parse_rational(d)};
      continue;
    }
    Coord c;
    ls >> c.ix >> c.iy;
    if (ls.fail()) throw ParseError("bad cell line '" + line + "'");
    std::string rest;
    if (ls >> rest) throw ParseError("trailing data on cell line '" + line + "'");
    cells.push_back(c);
  }
  if (!have_level) throw ParseError("missing 'level k' header");
  return GridSet(level, std::move(cells), window);
}

namespace {

constexpr char kMagic[] = "FLGS1";

void put_varint(std::string& out, std::uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<char>((v & 0x7f) | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<char>(v));
}
void put_signed(std::string& out, std::int64_t v) {
  put_varint(out, (static_cast<std::uint64_t>(v) << 1) ^ static_cast<std::uint64_t>(v >> 63));
}
void put_str(std::string& out, const std::string& s) {
  put_varint(out, s.size());
  out += s;
}

struct Reader {
  const std::string& s;
  std::size_t pos = 0;
  std::uint64_t varint() {
    std::uint64_t v = 0;
    int shift = 0;
    while (true) {
      if (pos >= s.size() || shift > 63) throw ParseError("truncated binary grid set");
      auto b = static_cast<unsigned char>(s[pos++]);
      v |= static_cast<std::uint64_t>(b & 0x7f) << shift;
      if (!(b & 0x80)) return v;
      shift += 7;
    }
  }
  std::int64_t signed_() {
    std::uint64_t u = varint();
    return static_cast<std::int64_t>((u >> 1) ^ (~(u & 1) + 1));
  }
  std::string str() {
    auto n = varint();
    if (pos + n > s.size()) throw ParseError("truncated binary grid set");
    std::string r = s.substr(pos, n);
    pos += n;
    return r;
  }
};

}  // namespace

std::string to_binary(const GridSet& set) {
  std::string out(kMagic, sizeof(kMagic) - 1);
  put_signed(out, set.level());
  const auto& w = set.window();
  for (const auto* r : {&w.x0, &w.y0, &w.x1, &w.y1}) put_str(out, to_string(*r));
  // Rows in ascending iy; each row is a list of (start, length) runs.
  const auto& cells = set.cells();
  std::vector<std::pair<std::int64_t, std::vector<std::pair<std::int64_t, std::int64_t>>>> rows;
  for (const auto& c : cells) {
    if (rows.empty() || rows.back().first != c.iy) rows.push_back({c.iy, {}});
    auto& runs = rows.back().second;
    if (!runs.empty() && runs.back().first + runs.back().second == c.ix)
      ++runs.back().second;
    else
      runs.push_back({c.ix, 1});
  }
  put_varint(out, rows.size());
  for (const auto& [iy, runs] : rows) {
    put_signed(out, iy);
    put_varint(out, runs.size());
    for (const auto& [start, len] : runs) {
      put_signed(out, start);
      put_varint(out, static_cast<std::uint64_t>(len));
    }
  }
  return out;
}

GridSet from_binary(const std::string& bytes) {
  if (bytes.compare(0, sizeof(kMagic) - 1, kMagic) != 0) throw ParseError("bad binary grid set magic");
  Reader r{bytes, sizeof(kMagic) - 1};
  int level = static_cast<int>(r.signed_());
  Window w;
  w.x0 = parse_rational(r.str());
  w.y0 = parse_rational(r.str());
  w.x1 = parse_rational(r.str());
  w.y1 = parse_rational(r.str());
  std::vector<Coord> cells;
  auto nrows = r.varint();
  for (std::uint64_t i = 0; i < nrows; ++i) {
    auto iy = r.signed_();
    auto nruns = r.varint();
    for (std::uint64_t k = 0; k < nruns; ++k) {
      auto start = r.signed_();
      auto len = r.varint();
      if (len > (1u << 30)) throw ParseError("implausible run length");
      for (std::uint64_t t = 0; t < len; ++t) cells.push_back({start + static_cast<std::int64_t>(t), iy});
    }
  }
  if (r.pos != bytes.size()) throw ParseError("trailing bytes in binary grid set");
  return GridSet(level, std::move(cells), w);
}

}  // namespace fraclab
