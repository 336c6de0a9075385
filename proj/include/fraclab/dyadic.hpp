#pragma once

#include "fraclab/rational.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace fraclab {

/// Cell [ix 2^-k, (ix+1) 2^-k) x [iy 2^-k, (iy+1) 2^-k). Levels below zero
/// (cells wider than 1) are allowed so that inflated scales such as 4 or 16
/// can be represented.
struct DyadicCell {
  int level = 0;
  std::int64_t ix = 0;
  std::int64_t iy = 0;

  DyadicCell parent() const { return {level - 1, ix >> 1, iy >> 1}; }
  DyadicCell ancestor(int j) const;
  bool operator==(const DyadicCell&) const = default;
};

struct Coord {
  std::int64_t ix = 0;
  std::int64_t iy = 0;
  auto operator<=>(const Coord& o) const {
    if (iy != o.iy) return iy <=> o.iy;
    return ix <=> o.ix;
  }
  bool operator==(const Coord&) const = default;
};

struct Point {
  Rational x{0};
  Rational y{0};
  bool operator==(const Point&) const = default;
};

struct Window {
  Rational x0{-4}, y0{-4}, x1{4}, y1{4};
  static Window unit() { return {Rational(0), Rational(0), Rational(1), Rational(1)}; }
  bool contains(const Point& p) const { return p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1; }
  bool operator==(const Window&) const = default;
};

/// Cells of one level, sorted row-major and duplicate-free.
class GridSet {
 public:
  GridSet() = default;
  GridSet(int level, std::vector<Coord> cells, Window window = {});

  int level() const { return level_; }
  const std::vector<Coord>& cells() const { return cells_; }
  const Window& window() const { return window_; }
  std::size_t size() const { return cells_.size(); }
  bool empty() const { return cells_.empty(); }
  bool contains(const Coord& c) const;
  /// Index of c in cells(), or -1.
  std::ptrdiff_t index_of(const Coord& c) const;
  Rational side() const { return pow2(-level_); }
  Point center(const Coord& c) const;

  bool operator==(const GridSet&) const = default;

 private:
  int level_ = 0;
  std::vector<Coord> cells_;
  Window window_{};
};

/// Ancestors at level j <= set.level, deduplicated.
GridSet coarsen(const GridSet& set, int j);
/// Same point set expressed at level j (coarsens or subdivides).
GridSet at_level(const GridSet& set, int j);
/// |A|_r for r = 2^-j; throws when j is finer than the resolution.
std::size_t covering_count(const GridSet& set, int j);
/// Cells of the same level at distance < radius from some input cell, clipped to the window.
GridSet neighborhood(const GridSet& set, const Rational& radius);
/// Level-k cells meeting the open ball B(center, radius), clipped to the window.
GridSet ball_cells(const Point& center, const Rational& radius, int level, const Window& window = {});

GridSet set_union(const GridSet& a, const GridSet& b);
GridSet set_intersection(const GridSet& a, const GridSet& b);
bool is_subset(const GridSet& a, const GridSet& b);

/// Squared distance between the closures of two cells of one level.
Rational cell_distance2(int level, const Coord& a, const Coord& b);
/// Squared distance from a point to the closure of a cell.
Rational point_cell_distance2(const Point& p, int level, const Coord& c);
/// Max squared distance over pairs of cell corners.
Rational diameter2(const GridSet& set);

/// [i 2^-k, (i+1) 2^-k) in [0,1).
struct DyadicInterval {
  int level = 0;
  std::int64_t index = 0;
  Rational left() const { return dyadic(index, level); }
  Rational length() const { return pow2(-level); }
  DyadicInterval parent() const { return {level - 1, index >> 1}; }
  DyadicInterval ancestor(int j) const { return {j, index >> (level - j)}; }
  auto operator<=>(const DyadicInterval&) const = default;
};

/// Delta = 2^-m, delta = Delta^N.
struct ScaleLadder {
  int m = 1;
  int N = 1;
  int level(int j) const { return m * j; }
  int delta_level() const { return m * N; }
  Rational scale(int j) const { return pow2(-m * j); }
};

void write_text(std::ostream& os, const GridSet& set);
GridSet read_text(std::istream& is);
std::string to_binary(const GridSet& set);
GridSet from_binary(const std::string& bytes);

}  // namespace fraclab
