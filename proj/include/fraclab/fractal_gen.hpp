#pragma once

#include "fraclab/dyadic.hpp"
#include "fraclab/grid_measure.hpp"
#include "fraclab/projection.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fraclab {

struct DigitSystem {
  int base = 4;                                  // power of two
  std::vector<std::pair<int, int>> digits;       // planar digits
  int depth = 1;

  int bits() const;                              // log2(base)
  int level() const { return depth * bits(); }
  double dimension() const;                      // log|D| / log b
  /// Exact dimension when |D| and b are both powers of two.
  std::optional<Rational> exact_dimension() const;
  std::string spec() const;
};

/// Grammar: `b=4;D=(0,0),(3,3),...;n=3` (n optional, default 1).
DigitSystem parse_digit_system(const std::string& spec);

struct PlanarInstance {
  GridSet set;
  GridMeasure measure;
};

PlanarInstance generate_planar(const DigitSystem& sys);

/// Measure on dyadic intervals of one level of [0,1) viewed as the circle.
struct ArcMeasure {
  int level = 0;
  std::vector<std::int64_t> index;  // ascending
  std::vector<Rational> weight;     // positive

  Rational mass() const;
  double mass_double() const { return to_double(mass()); }
  /// Masses of the intervals of level j <= level (ascending index, positive only).
  std::vector<std::pair<std::int64_t, Rational>> masses_at(int j) const;
};

struct ArcKind {
  enum class Type { Uniform, Cantor, SingleArc } type = Type::Uniform;
  int base = 2;                 // cantor
  std::vector<int> digits;      // cantor
  std::int64_t arc_index = 0;   // single-arc
};

/// Grammar: `uniform`, `cantor:b=4;D=0,3`, `single:i`.
ArcKind parse_arc_kind(const std::string& spec);
ArcMeasure generate_arc_measure(const ArcKind& kind, int level);

/// Frostman scan of nu(B(x,r)) / r^tau over half-lattice centres and dyadic
/// radii from one interval length up to 1/2, with circular distance.
RegularityReport check_arc_frostman(const ArcMeasure& nu, const Rational& tau, const Rational& C);

struct WeightedDirection {
  Direction dir;
  Rational mass{0};
  DyadicInterval arc;
};

/// One slope per 2^-spacing_level interval meeting spt nu: the interval's
/// midpoint, carrying its nu-mass.
std::vector<WeightedDirection> directions_from(const ArcMeasure& nu, int spacing_level);

void write_arc(std::ostream& os, const ArcMeasure& nu);
ArcMeasure read_arc(std::istream& is);

}  // namespace fraclab
