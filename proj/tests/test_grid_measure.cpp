#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fraclab/errors.hpp"
#include "fraclab/fractal_gen.hpp"
#include "fraclab/grid_measure.hpp"

#include <cmath>
#include <sstream>

using namespace fraclab;

namespace {

GridMeasure system_measure(const std::string& spec) { return generate_planar(parse_digit_system(spec)).measure; }

// Sup over half-lattice centres and radii of 2^i cells of mu(B)/r^s, by direct summation.
double frostman_oracle(const GridMeasure& mu, double s) {
  const auto& cells = mu.support().cells();
  const int k = mu.level();
  std::int64_t xl = cells[0].ix, xh = xl, yl = cells[0].iy, yh = yl;
  for (const auto& c : cells)
    xl = std::min(xl, c.ix), xh = std::max(xh, c.ix), yl = std::min(yl, c.iy), yh = std::max(yh, c.iy);
  double diam = std::hypot(double(xh - xl + 1), double(yh - yl + 1));
  double best = 0;
  for (int i = 0; std::ldexp(1.0, i) < 2 * diam || i == 0; ++i) {
    double r = std::ldexp(1.0, i);  // cell units
    for (std::int64_t Y = 2 * yl; Y <= 2 * (yh + 1); ++Y)
      for (std::int64_t X = 2 * xl; X <= 2 * (xh + 1); ++X) {
        double cx = X / 2.0, cy = Y / 2.0, m = 0;
        for (std::size_t t = 0; t < cells.size(); ++t) {
          double gx = std::max({double(cells[t].ix) - cx, cx - double(cells[t].ix + 1), 0.0});
          double gy = std::max({double(cells[t].iy) - cy, cy - double(cells[t].iy + 1), 0.0});
          if (gx * gx + gy * gy < r * r) m += to_double(mu.weights()[t]);
        }
        best = std::max(best, m / std::pow(std::ldexp(1.0, i - k), s));
      }
  }
  return best;
}

GridSet full_square(int k) {
  std::vector<Coord> cells;
  for (std::int64_t y = 0; y < (1 << k); ++y)
    for (std::int64_t x = 0; x < (1 << k); ++x) cells.push_back({x, y});
  return GridSet(k, cells);
}

}  // namespace

TEST_CASE("frostman scan on the uniform grid matches brute force") {
  auto mu = GridMeasure::uniform(full_square(3));
  auto rep = check_frostman(mu, Rational(2), Rational(64));
  CHECK(rep.verdict);
  CHECK(rep.C_best >= 1.0);
  CHECK(rep.C_best <= 64.0);
  CHECK(rep.C_best == doctest::Approx(frostman_oracle(mu, 2.0)).epsilon(1e-12));
  CHECK_FALSE(check_frostman(mu, Rational(2), Rational(rep.C_best / 2)).verdict);
}

TEST_CASE("frostman scan on a Cantor product matches brute force") {
  auto mu = system_measure("b=4;D=(0,0),(0,3),(3,0),(3,3);n=2");
  auto rep = check_frostman(mu, Rational(1), Rational(100));
  CHECK(rep.C_best == doctest::Approx(frostman_oracle(mu, 1.0)).epsilon(1e-12));
}

TEST_CASE("a point mass is not Frostman of positive dimension") {
  auto mu = GridMeasure::uniform(GridSet(6, {{3, 3}}));
  auto rep = check_frostman(mu, Rational(1), Rational(2));
  CHECK_FALSE(rep.verdict);
  CHECK(rep.C_best >= 64.0);
}

TEST_CASE("Cantor dust on a line is Ahlfors regular of dimension 1/2") {
  auto mu = system_measure("b=4;D=(0,0),(3,0);n=5");
  CHECK(check_frostman(mu, Rational(1, 2), Rational(8)).verdict);
  auto rep = check_ahlfors(mu, Rational(1, 2), Rational(8));
  CHECK(rep.verdict);
  REQUIRE(rep.min_ratio.has_value());
  CHECK_FALSE(check_ahlfors(mu, Rational(1), Rational(8)).verdict);
}

TEST_CASE("upper regularity") {
  auto seg = parse_digit_system("b=2;D=(0,0),(1,0);n=5");
  auto segment = generate_planar(seg).set;
  auto rs = check_upper_regular(segment, Rational(1), Rational(4));
  CHECK(rs.verdict);
  CHECK(rs.C_best <= 4.0);
  auto square = full_square(4);
  auto rq = check_upper_regular(square, Rational(1), Rational(4));
  CHECK_FALSE(rq.verdict);
  CHECK(rq.witness.kind == "upper");
  CHECK(rq.witness.R > rq.witness.r);
  CHECK(check_upper_regular(GridSet(5, {{1, 1}}), Rational(1), Rational(1)).verdict);
}

TEST_CASE("ahlfors lower bound detects vanishing mass") {
  auto seg = system_measure("b=2;D=(0,0),(1,0);n=5");
  CHECK(check_ahlfors(seg, Rational(1), Rational(4)).verdict);
  std::vector<Rational> w = seg.weights();
  for (std::size_t i = w.size() / 2; i < w.size(); ++i) w[i] = w[i] / (1 << 20);
  GridMeasure skew(seg.support(), w);
  auto rep = check_ahlfors(skew, Rational(1), Rational(4));
  CHECK_FALSE(rep.verdict);
  CHECK(rep.witness.kind == "lower");
}

TEST_CASE("renormalisation") {
  auto mu = system_measure("b=4;D=(0,0),(0,3),(3,0),(3,3);n=3");
  auto same = renormalize(mu, Ball{{Rational(0), Rational(0)}, Rational(1)}, Rational(1));
  CHECK(same == mu);

  Ball B{{Rational(3, 4), Rational(3, 4)}, Rational(1, 4)};
  auto nu = renormalize(mu, B, Rational(1));
  CHECK(nu.level() == mu.level() - 2);
  CHECK(nu.mass() == ExactScaled::make(Rational(4), Rational(0)));
  auto a = check_frostman(mu, Rational(1), Rational(16));
  auto b = check_frostman(nu, Rational(1), Rational(16));
  CHECK(a.verdict == b.verdict);
  CHECK(a.C_best == doctest::Approx(b.C_best).epsilon(1e-12));

  // Irrational factor: s = 1/2 and r0 = 1/8 give 2^{3/2}.
  auto cantor = system_measure("b=4;D=(0,0),(3,0);n=3");
  auto half = renormalize(cantor, Ball{{Rational(0), Rational(0)}, Rational(1, 8)}, Rational(1, 2));
  CHECK(half.exp2() == Rational(1, 2));
  CHECK(half.mass().to_double() == doctest::Approx(2.0 * std::sqrt(2.0)));
  CHECK(check_ahlfors(cantor, Rational(1, 2), Rational(8)).verdict ==
        check_ahlfors(half, Rational(1, 2), Rational(8)).verdict);

  CHECK_THROWS_AS(renormalize(mu, Ball{{Rational(1, 3), Rational(0)}, Rational(1, 4)}, Rational(1)),
                  PreconditionError);
  CHECK_THROWS_AS(renormalize(mu, Ball{{Rational(0), Rational(0)}, Rational(1, 3)}, Rational(1)),
                  PreconditionError);
}

TEST_CASE("scaled comparisons") {
  auto v = ExactScaled::make(Rational(1), Rational(1, 2));  // sqrt 2
  CHECK(scaled_le(v, Rational(3, 2)));
  CHECK_FALSE(scaled_le(v, Rational(7, 5)));
  CHECK(scaled_ge(v, Rational(7, 5)));
  CHECK(scaled_le(ExactScaled::make(Rational(2), Rational(0)), Rational(2)));
  CHECK(scaled_ge(ExactScaled::make(Rational(2), Rational(0)), Rational(2)));
}

TEST_CASE("david cubes") {
  auto mu = system_measure("b=4;D=(0,0),(0,3),(3,0),(3,3);n=3");
  auto fam = canonical_dyadic_family(mu, 0, 6);
  auto rep = verify_david_cubes(mu, fam, Rational(4), Rational(1));
  CHECK(rep.all());

  // Swap one cell between two level-4 cubes lying in different level-2 cubes.
  auto bad = fam;
  auto& cubes = bad.cubes[4];
  REQUIRE(cubes.size() >= 2);
  REQUIRE(cubes[0].size() >= 2);
  const auto& coarse = fam.cubes[2];
  auto owner = [&](std::size_t t) {
    for (std::size_t q = 0; q < coarse.size(); ++q)
      for (auto u : coarse[q])
        if (u == t) return q;
    return coarse.size();
  };
  std::size_t other = 1;
  while (owner(cubes[other].front()) == owner(cubes[0].front())) ++other;
  std::swap(cubes[0].back(), cubes[other].back());
  auto r2 = verify_david_cubes(mu, bad, Rational(4), Rational(1));
  CHECK_FALSE(r2.q1);
  REQUIRE(r2.q1_witness.has_value());

  auto overlap = fam;
  overlap.cubes[1][0].push_back(overlap.cubes[1][1].front());
  CHECK_THROWS_AS(verify_david_cubes(mu, overlap, Rational(4), Rational(1)), PreconditionError);
}

TEST_CASE("measure io") {
  auto mu = system_measure("b=4;D=(0,1),(1,3),(2,0),(3,2);n=2");
  std::vector<Rational> w = mu.weights();
  w[0] = w[0] * 3;
  GridMeasure m2(mu.support(), w, Rational(1, 3));
  std::stringstream ss;
  write_measure(ss, m2);
  CHECK(read_measure(ss) == m2);

  std::stringstream cut;
  write_text(cut, mu.support());
  CHECK_THROWS_AS(read_measure(cut), ParseError);
  std::stringstream corrupt;
  write_measure(corrupt, mu);
  std::string text = corrupt.str();
  text += "9 9 x 1\n";
  std::stringstream cs(text);
  CHECK_THROWS_AS(read_measure(cs), ParseError);
}

TEST_CASE("restriction and normalisation") {
  auto mu = GridMeasure::uniform(full_square(2));
  GridSet half(2, {{0, 0}, {1, 0}, {2, 0}, {3, 0}});
  CHECK(mu.mass_of(half) == ExactScaled::make(Rational(1, 4), Rational(0)));
  auto r = mu.restrict_to(half);
  CHECK(r.size() == 4);
  CHECK(r.normalized().mass() == ExactScaled::make(Rational(1), Rational(0)));
  CHECK_THROWS(GridMeasure(half, {Rational(1)}));
}
