#pragma once

#include "fraclab/dyadic.hpp"
#include "fraclab/grid_measure.hpp"
#include "fraclab/rational.hpp"

#include <string>
#include <utility>
#include <vector>

namespace fraclab {

/// Linear functional pi(x, y) = a x + b y. The slope form is (1, theta);
/// fibers depend only on the ratio a : b.
class Direction {
 public:
  enum class Form { Slope, Vector, Angle };

  static Direction from_slope(const Rational& theta);
  static Direction from_vector(const Rational& a, const Rational& b);
  /// Unit vector at angle 2 pi i / n; floating only, exact operations reject it.
  static Direction from_angle_index(long i, long n);

  const Rational& a() const { return a_; }
  const Rational& b() const { return b_; }
  Form form() const { return form_; }
  bool exact() const { return form_ != Form::Angle; }
  /// Slope theta when in slope form.
  const Rational& slope() const { return b_; }
  /// (cos, sin) of the functional's normalised vector.
  std::pair<double, double> unit() const;
  long angle_index() const { return angle_index_; }
  std::string label() const;

 private:
  Rational a_{1}, b_{0};
  Form form_ = Form::Slope;
  double c_ = 1.0, s_ = 0.0;
  long angle_index_ = -1;
};

/// Lipschitz constant of theta -> arctan(theta) and of its inverse on [0,1].
inline constexpr double kSlopeAngleBiLipschitz = 2.0;

/// Integer form of a direction: pi = (A X + B Y) / D for lattice coordinates.
struct IntFunctional {
  std::int64_t A = 1, B = 0, D = 1;
};
IntFunctional int_functional(const Direction& dir);

/// Number of dyadic 2^-j intervals meeting pi(F); cells map to their exact
/// (half-open aware) image intervals.
std::size_t project_cover(const GridSet& F, const Direction& dir, int j);

struct Tube {
  std::int64_t index = 0;  // tube = pi^{-1}[index w, (index+1) w)
  std::vector<std::size_t> cells;
  Rational mass{0};
};

struct TubeDecomposition {
  Direction dir;
  int width_level = 0;  // w = 2^-width_level
  std::vector<Tube> tubes;  // ascending index
};

/// Cells grouped by the tube containing the image of their lower-left corner.
TubeDecomposition tube_decompose(const GridMeasure& mu, const Direction& dir, int width_level);

struct CoverResult {
  std::size_t count = 0;
  std::vector<std::int64_t> tubes;  // witness, heaviest first
  Rational mass{0};
};

/// Fewest tubes whose mass reaches m (heaviest first, ties by lowest index).
CoverResult greedy_min_cover(const GridMeasure& mu, const Direction& dir, int width_level, const Rational& m);

}  // namespace fraclab
