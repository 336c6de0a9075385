#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fraclab/errors.hpp"
#include "fraclab/fractal_gen.hpp"

#include <set>
#include <sstream>

using namespace fraclab;

TEST_CASE("four-corner system") {
  auto sys = parse_digit_system("b=4;D=(0,0),(0,3),(3,0),(3,3);n=3");
  CHECK(sys.level() == 6);
  CHECK(sys.dimension() == doctest::Approx(1.0));
  REQUIRE(sys.exact_dimension().has_value());
  CHECK(*sys.exact_dimension() == Rational(1));
  auto inst = generate_planar(sys);
  CHECK(inst.set.level() == 6);
  CHECK(inst.set.size() == 64);
  CHECK(inst.measure.mass() == ExactScaled::make(Rational(1), Rational(0)));
  for (const auto& c : inst.set.cells()) {
    // Every base-4 digit of each coordinate is 0 or 3.
    for (std::int64_t v : {c.ix, c.iy})
      for (int t = 0; t < 3; ++t) {
        auto d = (v >> (2 * t)) & 3;
        CHECK((d == 0 || d == 3));
      }
  }
  CHECK(parse_digit_system(sys.spec()).spec() == sys.spec());
}

TEST_CASE("full digit set fills the square") {
  std::string spec = "b=2;D=(0,0),(0,1),(1,0),(1,1);n=4";
  auto inst = generate_planar(parse_digit_system(spec));
  CHECK(inst.set.size() == 256);
  CHECK(*parse_digit_system(spec).exact_dimension() == Rational(2));
  CHECK(covering_count(inst.set, 2) == 16);
}

TEST_CASE("single digit gives a point") {
  auto sys = parse_digit_system("b=4;D=(0,0);n=3");
  auto inst = generate_planar(sys);
  CHECK(inst.set.size() == 1);
  CHECK(inst.set.cells()[0] == Coord{0, 0});
  CHECK(*sys.exact_dimension() == Rational(0));
}

TEST_CASE("non power-of-two digit count") {
  auto sys = parse_digit_system("b=4;D=(0,0),(1,2),(3,1);n=2");
  CHECK_FALSE(sys.exact_dimension().has_value());
  CHECK(sys.dimension() == doctest::Approx(std::log(3.0) / std::log(4.0)));
  CHECK(generate_planar(sys).set.size() == 9);
}

TEST_CASE("digit system grammar errors") {
  CHECK_THROWS_AS(parse_digit_system("b=4"), ParseError);
  CHECK_THROWS_AS(parse_digit_system("b=4;D=(0,4)"), ParseError);
  CHECK_THROWS_AS(parse_digit_system("b=4;D=(0,0),(0,0)"), ParseError);
  CHECK_THROWS_AS(parse_digit_system("b=4;D=(0,0);q=1"), ParseError);
  CHECK_THROWS_AS(parse_digit_system("b=4;D=(0,0);n=0"), ParseError);
  CHECK_THROWS(parse_digit_system("b=3;D=(0,0)"));
}

TEST_CASE("arc measures") {
  auto u = generate_arc_measure(parse_arc_kind("uniform"), 5);
  CHECK(u.index.size() == 32);
  CHECK(u.mass() == 1);
  CHECK(u.masses_at(2).size() == 4);
  CHECK(u.masses_at(2)[1].second == Rational(1, 4));

  auto c = generate_arc_measure(parse_arc_kind("cantor:b=4;D=0,3"), 4);
  CHECK(c.index == std::vector<std::int64_t>{0, 3, 12, 15});
  CHECK(c.mass() == 1);
  CHECK_THROWS_AS(generate_arc_measure(parse_arc_kind("cantor:b=4;D=0,3"), 3), PreconditionError);

  auto s = generate_arc_measure(parse_arc_kind("single:5"), 4);
  CHECK(s.index == std::vector<std::int64_t>{5});
  CHECK_THROWS_AS(generate_arc_measure(parse_arc_kind("single:16"), 4), PreconditionError);
  CHECK_THROWS_AS(parse_arc_kind("circle"), ParseError);
}

TEST_CASE("arc Frostman scans") {
  auto u = generate_arc_measure(parse_arc_kind("uniform"), 8);
  CHECK(check_arc_frostman(u, Rational(1), Rational(4)).verdict);
  auto c = generate_arc_measure(parse_arc_kind("cantor:b=4;D=0,3"), 8);
  CHECK(check_arc_frostman(c, Rational(1, 2), Rational(8)).verdict);
  CHECK_FALSE(check_arc_frostman(c, Rational(1), Rational(8)).verdict);
  auto s = generate_arc_measure(parse_arc_kind("single:3"), 8);
  CHECK_FALSE(check_arc_frostman(s, Rational(1, 2), Rational(8)).verdict);
}

TEST_CASE("directions from an arc measure") {
  auto c = generate_arc_measure(parse_arc_kind("cantor:b=4;D=0,3"), 4);
  auto dirs = directions_from(c, 2);
  REQUIRE(dirs.size() == 2);
  CHECK(dirs[0].dir.slope() == Rational(1, 8));
  CHECK(dirs[1].dir.slope() == Rational(7, 8));
  CHECK(dirs[0].mass == Rational(1, 2));
  CHECK(dirs[1].arc.index == 3);
  auto all = directions_from(c, 4);
  CHECK(all.size() == 4);
  Rational total = 0;
  for (const auto& d : all) total += d.mass;
  CHECK(total == 1);
  CHECK_THROWS_AS(directions_from(c, 5), PreconditionError);
}

TEST_CASE("arc io") {
  auto c = generate_arc_measure(parse_arc_kind("cantor:b=4;D=0,3"), 6);
  std::stringstream ss;
  write_arc(ss, c);
  auto r = read_arc(ss);
  CHECK(r.level == c.level);
  CHECK(r.index == c.index);
  CHECK(r.weight == c.weight);
  std::stringstream bad("arc 3\n9 1 2\n");
  CHECK_THROWS(read_arc(bad));
}
