#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fraclab/dyadic.hpp"
#include "fraclab/errors.hpp"

#include <random>
#include <set>
#include <sstream>

using namespace fraclab;

namespace {

// Squared gap between [a, a + h) and the point v, in units of h.
Rational gap2_1d(const Rational& v, const Rational& a, const Rational& h) {
  if (v < a) return (a - v) * (a - v);
  if (v > a + h) return (v - a - h) * (v - a - h);
  return 0;
}

GridSet random_set(std::mt19937_64& rng, int level, std::int64_t span, std::size_t n) {
  std::uniform_int_distribution<std::int64_t> d(-span, span - 1);
  std::vector<Coord> cells;
  for (std::size_t i = 0; i < n; ++i) cells.push_back({d(rng), d(rng)});
  return GridSet(level, cells);
}

}  // namespace

TEST_CASE("rational helpers") {
  CHECK(parse_rational("3/4") == Rational(3, 4));
  CHECK(parse_rational("0.25") == Rational(1, 4));
  CHECK(parse_rational("2^-3") == Rational(1, 8));
  CHECK(parse_rational("-5/10") == Rational(-1, 2));
  CHECK(to_string(Rational(6, 4)) == "3/2");
  CHECK(to_string(Rational(7)) == "7");
  CHECK(dyadic(3, 2) == Rational(3, 4));
  CHECK(dyadic(3, -2) == Rational(12));
  CHECK(dyadic_level_of(Rational(1, 16)) == 4);
  CHECK_THROWS_AS(dyadic_level_of(Rational(3, 16)), PreconditionError);
  CHECK_THROWS_AS(parse_rational("abc"), ParseError);
  CHECK(floor_big(Rational(-3, 2)) == -2);
  CHECK(floor_div(-3, 2) == -2);
}

TEST_CASE("exact scaled values are canonical") {
  auto a = ExactScaled::make(Rational(1), Rational(3, 2));
  auto b = ExactScaled::make(Rational(2), Rational(1, 2));
  CHECK(a == b);
  CHECK(a.exp2 == Rational(1, 2));
  CHECK(a.to_double() == doctest::Approx(2.0 * std::sqrt(2.0)));
}

TEST_CASE("covering counts") {
  GridSet unit(3, {{0, 0}, {1, 0}, {7, 7}, {6, 7}});
  CHECK(covering_count(unit, 3) == 4);
  CHECK(covering_count(unit, 2) == 2);
  CHECK(covering_count(unit, 0) == 1);
  CHECK(covering_count(unit, -1) == 1);
  CHECK_THROWS_AS(covering_count(unit, 4), PreconditionError);

  std::vector<Coord> full;
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) full.push_back({x, y});
  GridSet square(3, full);
  for (int j = 0; j <= 3; ++j) CHECK(covering_count(square, j) == std::size_t(1) << (2 * j));
  CHECK(at_level(square, 4).size() == 256);
  CHECK(at_level(at_level(square, 5), 3) == square);
}

TEST_CASE("neighborhood matches a per-cell distance oracle") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 6; ++trial) {
    GridSet set = random_set(rng, 2, 6, 5);
    Rational radius = Rational(1 + trial % 3, 4) + Rational(trial % 2, 8);
    GridSet got = neighborhood(set, radius);
    std::vector<Coord> expected;
    Rational h = set.side();
    for (std::int64_t y = -16; y < 16; ++y)
      for (std::int64_t x = -16; x < 16; ++x) {
        bool near = false;
        for (const auto& c : set.cells()) {
          std::int64_t gx = std::max<std::int64_t>(std::abs(x - c.ix) - 1, 0);
          std::int64_t gy = std::max<std::int64_t>(std::abs(y - c.iy) - 1, 0);
          if (Rational(gx * gx + gy * gy) * h * h < radius * radius) near = true;
        }
        if (near) expected.push_back({x, y});
      }
    CHECK(got == GridSet(2, expected));
  }
}

TEST_CASE("ball cells match a per-cell distance oracle") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> d(-24, 24);
  for (int trial = 0; trial < 20; ++trial) {
    Point c{Rational(d(rng), 8), Rational(d(rng), 8)};
    Rational r(1 + trial % 5, 3);
    int level = 2 + trial % 2;
    GridSet got = ball_cells(c, r, level);
    Rational h = pow2(-level);
    std::int64_t span = std::int64_t(4) << level;
    std::vector<Coord> expected;
    for (std::int64_t y = -span; y < span; ++y)
      for (std::int64_t x = -span; x < span; ++x) {
        Rational g = gap2_1d(c.x, Rational(x) * h, h) + gap2_1d(c.y, Rational(y) * h, h);
        if (g < r * r) expected.push_back({x, y});
      }
    CHECK(got == GridSet(level, expected));
  }
}

TEST_CASE("set operations match std::set") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    GridSet a = random_set(rng, 3, 4, 12), b = random_set(rng, 3, 4, 12);
    std::set<Coord> sa(a.cells().begin(), a.cells().end()), sb(b.cells().begin(), b.cells().end());
    std::set<Coord> u = sa, in;
    u.insert(sb.begin(), sb.end());
    for (const auto& c : sa)
      if (sb.count(c)) in.insert(c);
    CHECK(set_union(a, b) == GridSet(3, {u.begin(), u.end()}));
    CHECK(set_intersection(a, b) == GridSet(3, {in.begin(), in.end()}));
    CHECK(is_subset(set_intersection(a, b), a));
    CHECK(is_subset(a, set_union(a, b)));
    for (const auto& c : a.cells()) CHECK(a.index_of(c) >= 0);
  }
}

TEST_CASE("window rejects cells outside") {
  CHECK_THROWS_AS(GridSet(0, {{5, 0}}), PreconditionError);
  CHECK_NOTHROW(GridSet(0, {{3, -4}}));
}

TEST_CASE("text and binary roundtrip") {
  std::mt19937_64 rng(5);
  GridSet s = random_set(rng, 4, 40, 30);
  std::stringstream ss;
  write_text(ss, s);
  CHECK(read_text(ss) == s);
  CHECK(from_binary(to_binary(s)) == s);
  std::string bytes = to_binary(s);
  bytes.resize(bytes.size() - 3);
  CHECK_THROWS_AS(from_binary(bytes), ParseError);
  std::stringstream bad("level x\n");
  CHECK_THROWS_AS(read_text(bad), ParseError);
}

TEST_CASE("distances") {
  CHECK(cell_distance2(0, {0, 0}, {2, 0}) == 1);
  CHECK(cell_distance2(0, {0, 0}, {1, 1}) == 0);
  CHECK(point_cell_distance2({Rational(-1), Rational(0)}, 0, {0, 0}) == 1);
  CHECK(diameter2(GridSet(1, {{0, 0}, {1, 1}})) == 2);
}
