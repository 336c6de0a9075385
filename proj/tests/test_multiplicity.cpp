#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fraclab/errors.hpp"
#include "fraclab/fractal_gen.hpp"
#include "fraclab/multiplicity.hpp"

#include <random>

using namespace fraclab;

namespace {

// Cells of K at level lo meeting the line x + t y = x0 + t y0 inside the open
// ball B((x0, y0), R); t >= 0. Along the line, |z - x|^2 = (1 + t^2)(y - y0)^2.
long mult_oracle(const GridSet& K, const Rational& t, const Point& x, int lo, const Rational& R) {
  GridSet cells = at_level(K, lo);
  Rational h = pow2(-lo), c = x.x + t * x.y;
  long n = 0;
  for (const auto& cell : cells.cells()) {
    Rational a = Rational(cell.ix) * h, b = Rational(cell.iy) * h;
    if (c < a + t * b || c >= a + h + t * (b + h)) continue;
    Rational ylo = b, yhi = b + h;
    if (t != 0) {
      ylo = std::max<Rational>(ylo, (c - a - h) / t);
      yhi = std::min<Rational>(yhi, (c - a) / t);
    }
    Rational y = x.y < ylo ? ylo : (x.y > yhi ? yhi : x.y);
    if ((1 + t * t) * (y - x.y) * (y - x.y) < R * R) ++n;
  }
  return n;
}

PlanarInstance four_corner(int depth) {
  return generate_planar(parse_digit_system("b=4;D=(0,0),(0,3),(3,0),(3,3);n=" + std::to_string(depth)));
}

}  // namespace

TEST_CASE("full row of a horizontal segment") {
  std::vector<Coord> row;
  for (int i = 0; i < 16; ++i) row.push_back({i, 0});
  GridSet K(4, row);
  auto vertical = Direction::from_vector(Rational(0), Rational(1));
  CHECK(multiplicity_at(K, vertical, {Rational(1, 2), Rational(0)}, ScalePairQuery::dyadic(4, 0)) == 16);
  CHECK(multiplicity_at(K, vertical, {Rational(1, 2), Rational(0)}, ScalePairQuery::dyadic(2, 0)) == 4);
  // Fiber along x = const meets one cell.
  CHECK(multiplicity_at(K, Direction::from_slope(Rational(0)), {Rational(1, 2), Rational(0)},
                        ScalePairQuery::dyadic(4, 0)) == 1);
  // Radius below a cell diagonal around an isolated cell.
  GridSet lone(4, {{3, 3}});
  CHECK(multiplicity_at(lone, Direction::from_slope(Rational(1, 3)), {Rational(7, 32), Rational(7, 32)},
                        ScalePairQuery{4, Rational(1, 32)}) == 1);
}

TEST_CASE("multiplicity matches an independent rational oracle") {
  auto inst = four_corner(3);
  std::mt19937_64 rng(29);
  std::uniform_int_distribution<std::int64_t> coord(0, 127);
  for (int trial = 0; trial < 300; ++trial) {
    Rational t(trial % 9, 8);
    if (trial % 7 == 3) t = Rational(2, 3);
    Point x{Rational(coord(rng), 128), Rational(coord(rng), 128)};
    int lo = 3 + trial % 4;
    Rational R = pow2(-(trial % 4)) * (trial % 3 == 0 ? Rational(3, 4) : Rational(1));
    auto got = multiplicity_at(inst.set, Direction::from_slope(t), x, ScalePairQuery{lo, R});
    CHECK(got == mult_oracle(inst.set, t, x, lo, R));
  }
}

TEST_CASE("indexed and exhaustive fiber counts agree") {
  auto skew = generate_planar(parse_digit_system("b=4;D=(0,1),(1,3),(2,0),(3,2);n=3"));
  for (int s = 0; s <= 8; ++s) {
    auto dir = Direction::from_slope(Rational(s, 8));
    for (int lo : {4, 6}) {
      FiberCounter fc(skew.set, dir, lo, 7);
      for (std::int64_t Y = 0; Y < 128; Y += 5)
        for (std::int64_t X = 0; X < 128; X += 3)
          for (auto R : {Rational(1, 4), Rational(1)}) CHECK(fc.count(X, Y, R) == fc.count_exhaustive(X, Y, R));
    }
  }
}

TEST_CASE("field values and high-multiplicity sets") {
  auto inst = four_corner(3);
  auto dir = Direction::from_slope(Rational(1, 4));
  auto q = ScalePairQuery::dyadic(6, 0);
  auto field = multiplicity_field(inst.set, dir, q);
  REQUIRE(field.values.size() == inst.set.size());
  for (std::size_t i = 0; i < field.values.size(); ++i) {
    CHECK(field.values[i] >= 1);
    CHECK(field.values[i] == multiplicity_at(inst.set, dir, inst.set.center(inst.set.cells()[i]), q));
  }
  CHECK(high_mult_set(inst.set, dir, 1, q) == inst.set);
  auto h2 = high_mult_set(inst.set, dir, 2, q), h4 = high_mult_set(inst.set, dir, 4, q);
  CHECK(is_subset(h4, h2));
  CHECK_THROWS_AS(high_mult_set(inst.set, dir, 0.5, q), PreconditionError);
  CHECK(dyadic_ceil_level(Rational(3, 64)) == 4);
  CHECK(dyadic_ceil_level(Rational(1, 64)) == 6);
  CHECK(dyadic_ceil_level(Rational(50, 16)) == -2);
}

TEST_CASE("cells in ball") {
  GridSet s(1, {{0, 0}, {1, 1}, {2, 0}, {-2, -1}});
  CHECK(cells_in_ball(s, Rational(1)) == GridSet(1, {{0, 0}, {-2, -1}}));
}

TEST_CASE("iota integrand") {
  auto inst = four_corner(3);
  auto nu = generate_arc_measure(parse_arc_kind("uniform"), 4);
  auto zero = iota_integrand(inst.measure, nu, 0.0, 6, 4);
  CHECK(zero.value == zero.upper_bound);
  CHECK(zero.upper_bound == inst.measure.restrict_to(cells_in_ball(inst.set, Rational(1))).weight_sum());
  CHECK(iota_integrand(inst.measure, nu, 1.5, 6, 4).value == 0);

  // Oracle: threshold 2^{6 sigma} at cell centres in B(1), directions at interval midpoints.
  GridSet ball = cells_in_ball(inst.set, Rational(1));
  auto oracle = [&](long threshold) {
    Rational total = 0;
    for (std::int64_t a = 0; a < 16; ++a) {
      Rational t(2 * a + 1, 32), m = 0;
      for (const auto& c : ball.cells())
        if (mult_oracle(inst.set, t, inst.set.center(c), 6, Rational(1)) >= threshold)
          m += inst.measure.weights()[std::size_t(inst.set.index_of(c))];
      total += Rational(1, 16) * m;
    }
    return total;
  };
  auto half = iota_integrand(inst.measure, nu, 0.5, 6, 4);
  CHECK(half.value == iota_integrand(inst.measure, nu, 0.5, 6, 4, true).value);
  CHECK(half.value == oracle(8));
  auto quarter = iota_integrand(inst.measure, nu, 0.25, 6, 4);
  CHECK(quarter.value == oracle(3));  // 2^{1.5} rounds up to 3
  CHECK(quarter.value > 0);
  CHECK(quarter.value <= quarter.upper_bound);

  double prev = 2;
  for (double s : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    double v = iota_integrand(inst.measure, nu, s, 6, 4).value_double;
    CHECK(v <= prev);
    prev = v;
  }
  CHECK_THROWS_AS(iota_integrand(inst.measure, nu, 0.5, 7, 4), PreconditionError);
}

TEST_CASE("low multiplicity profile") {
  auto seg = generate_planar(parse_digit_system("b=2;D=(0,0),(1,0);n=6"));
  auto along = Direction::from_vector(Rational(0), Rational(1));
  ScaleLadder ladder{1, 4};
  auto prof = low_mult_profile(seg.measure, along, ladder, 0.5, 0.5, Rational(1));
  std::size_t interior = 0;
  for (std::size_t i = 0; i < seg.set.size(); ++i) {
    CHECK(prof.density[i] >= 0.0);
    CHECK(prof.density[i] <= 1.0);
    const auto& c = seg.set.cells()[i];
    if (c.ix >= 8 && c.ix < 56) {
      ++interior;
      CHECK(prof.density[i] == doctest::Approx(1.0));
      CHECK_FALSE(prof.low_set.contains(c));
    }
  }
  CHECK(interior == 48);

  // Unreachable thresholds: nothing is bad.
  auto across = Direction::from_slope(Rational(0));
  auto none = low_mult_profile(seg.measure, across, ladder, 2.0, 0.0, Rational(1));
  CHECK(none.low_set == seg.set);
  CHECK(none.mass_outside == 0);
  for (const auto& b : none.bad) CHECK(b.empty());
}

TEST_CASE("hereditary refinement on a single tube") {
  std::vector<Coord> row;
  for (int i = 0; i < 16; ++i) row.push_back({i, 0});
  auto mu = GridMeasure::uniform(GridSet(4, row));
  auto along = Direction::from_vector(Rational(0), Rational(1));
  auto hr = hereditary_refine(mu, mu.support(), along, 16, Rational(1), Rational(1), Rational(1, 4));
  CHECK(hr.G == mu.support());
  CHECK(hr.M_prime == doctest::Approx(4.0));
  CHECK(hr.holds_mass);
  CHECK(hr.holds_multiplicity);
  CHECK(hr.heavy_tubes == 1);
  CHECK(hr.light_tubes == 0);

  auto empty = hereditary_refine(mu, GridSet(4, {}), along, 16, Rational(0), Rational(1), Rational(1, 4));
  CHECK(empty.G.empty());
  // F outside the high-multiplicity set is rejected.
  CHECK_THROWS_AS(hereditary_refine(mu, mu.support(), along, 32, Rational(1), Rational(1), Rational(1, 4)),
                  HypothesisError);
}

TEST_CASE("multiplicity decomposition") {
  auto inst = four_corner(3);
  DecompositionParams p;
  p.M = 2, p.N = 2, p.delta_level = 6, p.Delta_level = 6;
  auto rep = check_mult_decomposition(inst.measure, inst.set, Direction::from_slope(Rational(1, 3)), p);
  CHECK(rep.holds);
  CHECK(rep.slack >= 0);
  p.M = 1000, p.N = 1000;
  auto empty = check_mult_decomposition(inst.measure, inst.set, Direction::from_slope(Rational(1, 3)), p);
  CHECK(empty.lhs == 0);
  CHECK(empty.holds);
}

TEST_CASE("fiber entropy bound") {
  ScaleLadder ladder{2, 2};
  auto one = check_fiber_entropy_bound(GridSet(4, {{3, 5}}), Direction::from_slope(Rational(1, 2)), ladder,
                                       {0, 1, 2}, 0.5, 1.0);
  CHECK(one.lhs == 1);
  CHECK(one.holds);

  // Product with a point factor: fibers of the horizontal projection see every cell of A.
  std::vector<Coord> cells;
  for (std::int64_t a : {0, 1, 4, 9, 12}) cells.push_back({a, 7});
  auto prod = check_fiber_entropy_bound(GridSet(4, cells), Direction::from_vector(Rational(0), Rational(1)), ladder,
                                        {0, 1, 2}, 1.0, 1.0);
  CHECK(prod.lhs >= 1);
  CHECK(prod.lhs <= 5);
  CHECK(prod.C_min >= 1.0);
}
