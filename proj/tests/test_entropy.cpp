#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fraclab/entropy.hpp"
#include "fraclab/errors.hpp"
#include "fraclab/fractal_gen.hpp"

#include <cmath>
#include <map>
#include <random>

using namespace fraclab;

namespace {

GridSet full_square(int k) {
  std::vector<Coord> cells;
  for (std::int64_t y = 0; y < (1 << k); ++y)
    for (std::int64_t x = 0; x < (1 << k); ++x) cells.push_back({x, y});
  return GridSet(k, cells);
}

GridMeasure random_measure(std::mt19937_64& rng, int k, std::size_t n) {
  std::uniform_int_distribution<std::int64_t> c(0, (1 << k) - 1);
  std::uniform_int_distribution<int> w(1, 20);
  std::vector<Coord> cells;
  for (std::size_t i = 0; i < n; ++i) cells.push_back({c(rng), c(rng)});
  GridSet s(k, cells);
  std::vector<Rational> ws;
  for (std::size_t i = 0; i < s.size(); ++i) ws.push_back(Rational(w(rng)));
  return GridMeasure(s, ws).normalized();
}

// Direct evaluation of the entropy of the level-j parts in long double.
long double entropy_oracle(const GridMeasure& mu, int j) {
  std::map<Coord, long double> parts;
  int d = mu.level() - j;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const auto& c = mu.support().cells()[i];
    parts[{c.ix >> d, c.iy >> d}] += to_long_double(mu.weights()[i]);
  }
  long double h = 0;
  for (const auto& [q, p] : parts) h -= p * std::log2(p);
  return h;
}

}  // namespace

TEST_CASE("entropy examples") {
  CHECK(entropy(GridMeasure::uniform(full_square(1)), 1) == doctest::Approx(2.0));
  CHECK(entropy(GridMeasure::uniform(GridSet(3, {{2, 5}})), 3) == 0.0);
  CHECK(entropy_of({Rational(1, 2), Rational(1, 4), Rational(1, 4)}) == doctest::Approx(1.5));
  CHECK_THROWS(entropy_of({Rational(1, 2), Rational(1, 4)}));
  auto u = generate_arc_measure(parse_arc_kind("uniform"), 6);
  CHECK(entropy(u, 4) == doctest::Approx(4.0));
  CHECK(conditional_entropy(u, 6, 2) == doctest::Approx(4.0));
}

TEST_CASE("entropy agrees with direct evaluation and obeys the chain rule") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    auto mu = random_measure(rng, 6, 40);
    for (int j = 0; j <= 6; ++j) CHECK(entropy(mu, j) == doctest::Approx(double(entropy_oracle(mu, j))).epsilon(1e-13));
    for (int coarse = 0; coarse < 6; ++coarse)
      for (int fine = coarse + 1; fine <= 6; ++fine)
        CHECK(std::abs(conditional_entropy(mu, fine, coarse) - (entropy(mu, fine) - entropy(mu, coarse))) <= 1e-12);
    auto prof = entropy_profile(mu, PartitionLadder{{0, 2, 4, 6}});
    CHECK(prof.chain_rule_error <= 1e-12);
    CHECK(prof.parts.back() == mu.size());
  }
}

TEST_CASE("kl divergence") {
  std::mt19937_64 rng(43);
  auto mu = GridMeasure::uniform(full_square(4));
  CHECK(kl_divergence(mu, mu, 4) == doctest::Approx(0.0));
  for (int trial = 0; trial < 20; ++trial) {
    auto nu = random_measure(rng, 4, 30);
    for (int j = 0; j <= 4; ++j) CHECK(kl_divergence(nu, mu, j) >= -1e-12);
    for (int coarse = 0; coarse < 4; ++coarse)
      CHECK(std::abs(kl_divergence(nu, mu, 4) -
                     (kl_divergence(nu, mu, coarse) + kl_conditional(nu, mu, 4, coarse))) <= 1e-12);
    // Partial sums over a random sub-collection of level-3 parts.
    std::vector<Coord> pick;
    for (const auto& c : nu.support().cells())
      if (rng() & 1) pick.push_back({c.ix >> 1, c.iy >> 1});
    auto rep = kl_partial_sum(nu, mu, GridSet(3, pick));
    CHECK(rep.holds);
    CHECK(rep.sum >= rep.bound - 1e-12);
    CHECK(rep.sum >= -1.0);
  }
  // Absolute continuity failure names the atom.
  auto point = GridMeasure::uniform(GridSet(4, {{0, 0}}));
  auto elsewhere = GridMeasure::uniform(GridSet(4, {{1, 0}}));
  CHECK_THROWS_AS(kl_divergence(elsewhere, point, 4), PreconditionError);
}

TEST_CASE("good scales") {
  auto sq = generate_planar(parse_digit_system("b=2;D=(0,0),(0,1),(1,0),(1,1);n=6"));
  auto full = good_scales(sq.set, ScaleLadder{1, 6}, 2.0, 0.01, 1.0);
  CHECK(full.good.size() == 6);
  CHECK(full.holds);

  auto cc = generate_planar(parse_digit_system("b=4;D=(0,0),(0,3),(3,0),(3,3);n=4"));
  auto r = good_scales(cc.set, ScaleLadder{2, 4}, 1.0, 0.04, 1.0);
  CHECK(r.holds);
  CHECK(double(r.good.size()) >= 0.6 * 4);
  CHECK_FALSE(r.in_regime);

  // Collapse one level: digits repeat the same choice at the third step.
  std::vector<Coord> cells;
  for (const auto& c : cc.set.cells()) {
    std::int64_t mask = ~(std::int64_t(3) << 2);
    Coord z{(c.ix & mask) | ((c.ix >> 6 & 3) << 2), (c.iy & mask) | ((c.iy >> 6 & 3) << 2)};
    cells.push_back(z);
  }
  GridSet collapsed(8, cells);
  CHECK(collapsed.size() == 64);
  auto rc = good_scales(collapsed, ScaleLadder{2, 4}, 0.75, 0.04, 1.0);
  CHECK(rc.conditional[2] == doctest::Approx(0.0));
  CHECK(std::find(rc.good.begin(), rc.good.end(), 2) == rc.good.end());
  CHECK(rc.holds == (double(rc.good.size()) >= rc.required - 1e-12));
  CHECK_THROWS_AS(good_scales(collapsed, ScaleLadder{2, 4}, 1.0, 0.04, 1.0), HypothesisError);
}

TEST_CASE("good cubes") {
  auto u = GridMeasure::uniform(full_square(3));
  auto r = good_cubes(u, 3, Rational(2), Rational(1, 8), Rational(4), Rational(1));
  CHECK(r.cubes.size() == 64);
  CHECK(r.mass == 1);
  CHECK(r.holds);

  // One heavy cell carrying a quarter of the mass is excluded.
  std::vector<Rational> w(64, Rational(3, 4 * 63));
  w[0] = Rational(1, 4);
  GridMeasure heavy(full_square(3), w);
  auto rh = good_cubes(heavy, 3, Rational(2), Rational(1, 2), Rational(2), Rational(1));
  CHECK(rh.cubes.size() == 63);
  CHECK(rh.mass == Rational(3, 4));

  CHECK_THROWS_AS(good_cubes(GridMeasure::uniform(GridSet(3, {{0, 0}})), 3, Rational(1), Rational(1, 8), Rational(4),
                             Rational(1)),
                  HypothesisError);
}

TEST_CASE("partition pigeonhole") {
  auto mu = GridMeasure::uniform(full_square(6));
  PartitionLadder ladder{{0, 1, 2, 3, 4, 5}};
  std::vector<std::vector<char>> all(6, std::vector<char>(mu.size(), 1));
  auto r = partition_pigeonhole(mu, ladder, all, Rational(1, 2));
  CHECK(r.F == mu.support());
  CHECK(r.good_levels.size() == 6);
  CHECK(r.holds);

  auto none = all;
  for (std::size_t j = 1; j < 6; ++j) std::fill(none[j].begin(), none[j].end(), 0);
  CHECK_THROWS_AS(partition_pigeonhole(mu, ladder, none, Rational(1, 2)), HypothesisError);

  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<char>> h(6, std::vector<char>(mu.size(), 0));
    for (std::size_t i = 0; i < mu.size(); ++i) {
      std::vector<int> order{0, 1, 2, 3, 4, 5};
      std::shuffle(order.begin(), order.end(), rng);
      int take = 3 + int(rng() % 4);
      for (int t = 0; t < take; ++t) h[std::size_t(order[std::size_t(t)])][i] = 1;
    }
    auto rep = partition_pigeonhole(mu, ladder, h, Rational(1, 2));
    CHECK(rep.holds);
    CHECK(rep.mass_F >= Rational(1, 64));
    for (const auto& c : rep.F.cells())
      CHECK(Rational(rep.heavy_count[std::size_t(mu.support().index_of(c))]) * 64 >= 6);
  }
}
