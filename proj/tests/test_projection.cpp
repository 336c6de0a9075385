#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fraclab/errors.hpp"
#include "fraclab/fractal_gen.hpp"
#include "fraclab/projection.hpp"

#include <random>
#include <set>

using namespace fraclab;

namespace {

GridSet product(int level, const std::vector<std::int64_t>& A, const std::vector<std::int64_t>& B) {
  std::vector<Coord> cells;
  for (auto a : A)
    for (auto b : B) cells.push_back({a, b});
  return GridSet(level, cells);
}

// Dyadic intervals of level j meeting [x + t y, x + h + t (y + h)) for some cell, t >= 0.
std::size_t cover_oracle(const GridSet& F, const Rational& t, int j) {
  std::set<BigInt> hit;
  Rational h = F.side(), w = pow2(-j);
  for (const auto& c : F.cells()) {
    Rational lo = Rational(c.ix) * h + t * Rational(c.iy) * h;
    Rational hi = lo + h + t * h;
    BigInt first = floor_big(lo / w);
    BigInt last = -floor_big(-hi / w) - 1;  // ceil(hi / w) - 1
    for (BigInt i = first; i <= last; ++i) hit.insert(i);
  }
  return hit.size();
}

// Lower bound by sampling each cell on a 16x finer lattice.
std::size_t sampled_cover(const GridSet& F, const Rational& t, int j) {
  std::set<BigInt> hit;
  Rational h = F.side() / 16, w = pow2(-j);
  for (const auto& c : F.cells())
    for (int v = 0; v < 16; ++v)
      for (int u = 0; u < 16; ++u) {
        Rational x = Rational(16 * c.ix + u) * h, y = Rational(16 * c.iy + v) * h;
        hit.insert(floor_big((x + t * y) / w));
      }
  return hit.size();
}

std::size_t subset_min(const std::vector<Rational>& tube_mass, const Rational& m) {
  std::size_t n = tube_mass.size(), best = n + 1;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    Rational s = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1) s += tube_mass[i];
    if (s >= m) best = std::min<std::size_t>(best, std::size_t(__builtin_popcount(mask)));
  }
  return best;
}

}  // namespace

TEST_CASE("product sets") {
  std::vector<std::int64_t> A{0, 1, 5, 9, 12}, B{2, 3, 7};
  auto F = product(4, A, B);
  CHECK(project_cover(F, Direction::from_slope(Rational(0)), 4) == A.size());
  CHECK(project_cover(F, Direction::from_vector(Rational(0), Rational(1)), 4) == B.size());
  std::set<std::int64_t> sums;
  for (auto a : A)
    for (auto b : B) sums.insert(a + b), sums.insert(a + b + 1);
  CHECK(project_cover(F, Direction::from_slope(Rational(1)), 4) == sums.size());
}

TEST_CASE("projection cover matches exact and sampled oracles") {
  std::mt19937_64 rng(19);
  std::uniform_int_distribution<std::int64_t> d(0, 31);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Coord> cells;
    for (int i = 0; i < 12; ++i) cells.push_back({d(rng), d(rng)});
    GridSet F(5, cells);
    Rational t(trial % 9, 8);
    if (trial % 5 == 4) t = Rational(1, 3);
    for (int j : {2, 3, 5}) {
      auto got = project_cover(F, Direction::from_slope(t), j);
      CHECK(got == cover_oracle(F, t, j));
      CHECK(sampled_cover(F, t, j) <= got);
    }
    // Doubling the functional doubles the image: same count one level finer.
    CHECK(project_cover(F, Direction::from_vector(Rational(2), 2 * t), 3) == cover_oracle(F, t, 4));
  }
  CHECK_THROWS_AS(project_cover(GridSet(2, {{0, 0}}), Direction::from_slope(Rational(1)), 3), PreconditionError);
  CHECK_THROWS_AS(project_cover(GridSet(2, {{0, 0}}), Direction::from_angle_index(1, 7), 2), PreconditionError);
}

TEST_CASE("tube decomposition") {
  std::vector<Coord> cells;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) cells.push_back({x, y});
  auto mu = GridMeasure::uniform(GridSet(2, cells));
  auto td = tube_decompose(mu, Direction::from_slope(Rational(0)), 2);
  REQUIRE(td.tubes.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(td.tubes[i].index == std::int64_t(i));
    CHECK(td.tubes[i].cells.size() == 4);
    CHECK(td.tubes[i].mass == Rational(1, 4));
  }
  auto diag = tube_decompose(mu, Direction::from_slope(Rational(1)), 2);
  CHECK(diag.tubes.size() == 7);
  CHECK(diag.tubes[3].cells.size() == 4);
  auto wide = tube_decompose(mu, Direction::from_slope(Rational(0)), 1);
  CHECK(wide.tubes.size() == 2);
}

TEST_CASE("greedy cover examples") {
  std::vector<Coord> cells;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) cells.push_back({x, y});
  auto mu = GridMeasure::uniform(GridSet(2, cells));
  auto dir = Direction::from_slope(Rational(0));
  auto r = greedy_min_cover(mu, dir, 2, Rational(3, 5));
  CHECK(r.count == 3);
  CHECK(r.mass == Rational(3, 4));
  CHECK(r.tubes == std::vector<std::int64_t>{0, 1, 2});
  CHECK(greedy_min_cover(mu, dir, 2, Rational(0)).count == 0);
  CHECK(greedy_min_cover(mu, dir, 2, Rational(1)).count == 4);
  CHECK_THROWS_AS(greedy_min_cover(mu, dir, 2, Rational(11, 10)), PreconditionError);
}

TEST_CASE("greedy cover equals exhaustive subset minimum") {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<std::int64_t> d(0, 15);
  std::uniform_int_distribution<int> wd(1, 9);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<Coord> cells;
    std::size_t n = 1 + trial % 14;
    for (std::size_t i = 0; i < n; ++i) cells.push_back({d(rng), d(rng)});
    GridSet F(4, cells);
    std::vector<Rational> w;
    for (std::size_t i = 0; i < F.size(); ++i) w.push_back(Rational(wd(rng), 7));
    GridMeasure mu(F, w);
    Rational total = mu.weight_sum();
    for (int s = 0; s <= 8; ++s) {
      auto dir = Direction::from_slope(Rational(s, 8));
      auto td = tube_decompose(mu, dir, 3);
      std::vector<Rational> tm;
      for (const auto& t : td.tubes) tm.push_back(t.mass);
      REQUIRE(tm.size() <= 14);
      for (auto frac : {Rational(1, 5), Rational(1, 2), Rational(4, 5)}) {
        auto got = greedy_min_cover(mu, dir, 3, frac * total);
        CHECK(got.count == subset_min(tm, frac * total));
        CHECK(got.mass >= frac * total);
      }
    }
  }
}

TEST_CASE("direction forms") {
  auto s = Direction::from_slope(Rational(1, 2));
  CHECK(s.exact());
  CHECK(s.label() == "slope=1/2");
  auto f = int_functional(Direction::from_vector(Rational(2, 3), Rational(1, 3)));
  CHECK(f.A == 2);
  CHECK(f.B == 1);
  auto a = Direction::from_angle_index(1, 8);
  CHECK_FALSE(a.exact());
  CHECK(a.unit().first == doctest::Approx(std::sqrt(0.5)));
}
