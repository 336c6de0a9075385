#pragma once

#include "fraclab/dyadic.hpp"
#include "fraclab/rational.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fraclab {

/// Finite measure on the cells of a GridSet. The mass of cell i is
/// weights[i] * 2^{exp2}; exp2 stays in [0,1) and is nonzero only after a
/// renormalisation with an exponent that makes the factor irrational.
class GridMeasure {
 public:
  GridMeasure() = default;
  GridMeasure(GridSet support, std::vector<Rational> weights, Rational exp2 = Rational(0));
  static GridMeasure uniform(const GridSet& support);

  const GridSet& support() const { return support_; }
  const std::vector<Rational>& weights() const { return weights_; }
  const Rational& exp2() const { return exp2_; }
  int level() const { return support_.level(); }
  std::size_t size() const { return support_.size(); }
  bool empty() const { return support_.empty(); }

  ExactScaled mass() const;
  ExactScaled cell_mass(std::size_t i) const { return ExactScaled::make(weights_[i], exp2_); }
  /// Sum of weights (mass without the 2^{exp2} factor).
  Rational weight_sum() const;
  double mass_double() const { return mass().to_double(); }

  /// Mass of the cells of E (E at the measure's level).
  ExactScaled mass_of(const GridSet& e) const;
  /// Restriction to the cells of E.
  GridMeasure restrict_to(const GridSet& e) const;
  /// Divides by total mass; result has mass exactly 1 and exp2 = 0.
  GridMeasure normalized() const;

  /// Common-denominator integer numerators: weights[i] = num[i] / den.
  struct IntegerView {
    std::vector<i128> num;
    i128 den = 1;
  };
  IntegerView integer_view() const;

  bool operator==(const GridMeasure&) const = default;

 private:
  GridSet support_;
  std::vector<Rational> weights_;
  Rational exp2_{0};
};

struct Ball {
  Point center;
  Rational radius{1};
};

/// Exact test of c * 2^{e} <= bound (c, bound >= 0).
bool scaled_le(const ExactScaled& v, const Rational& bound);
bool scaled_ge(const ExactScaled& v, const Rational& bound);

struct RegularityWitness {
  Point center;
  Rational r{0};
  Rational R{0};  // upper-regular checks only
  std::string kind;  // "upper" or "lower"
};

struct RegularityReport {
  Rational s{0};
  double C_best = 0.0;
  ExactScaled max_ratio;                 // sup of mass/r^s (or count/(R/r)^s)
  std::optional<ExactScaled> min_ratio;  // inf of mass/r^s on the support (Ahlfors only)
  RegularityWitness witness;             // extremal triple for C_best
  Rational C{0};
  bool verdict = false;
  std::size_t tested = 0;
};

RegularityReport check_frostman(const GridMeasure& mu, const Rational& s, const Rational& C);
RegularityReport check_upper_regular(const GridSet& K, const Rational& s, const Rational& C);
RegularityReport check_ahlfors(const GridMeasure& mu, const Rational& s, const Rational& C);

/// mu^B = r0^{-s} T_B mu with T_B(x) = (x - x0)/r0. The window is mapped along.
GridMeasure renormalize(const GridMeasure& mu, const Ball& B, const Rational& s);

/// Per-level partition family of the support: cubes[l] lists cubes at level
/// levels[l]; each cube is a sorted list of support-cell indices.
struct CubeFamily {
  std::vector<int> levels;
  std::vector<std::vector<std::vector<std::size_t>>> cubes;
};

/// Dyadic cells of levels lo..hi grouped over the support.
CubeFamily canonical_dyadic_family(const GridMeasure& mu, int lo, int hi);

struct CubeViolation {
  int level = 0;
  std::size_t cube = 0;
  int other_level = 0;
  std::size_t other_cube = 0;
  std::string detail;
};

struct DavidReport {
  bool q1 = true, q2 = true, q3 = true;
  std::optional<CubeViolation> q1_witness, q2_witness, q3_witness;
  bool all() const { return q1 && q2 && q3; }
};

/// Throws PreconditionError naming the violating pair if a level is not a partition.
DavidReport verify_david_cubes(const GridMeasure& mu, const CubeFamily& family, const Rational& A,
                               const Rational& s);

void write_measure(std::ostream& os, const GridMeasure& mu);
GridMeasure read_measure(std::istream& is);

}  // namespace fraclab
