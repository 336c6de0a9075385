#pragma once

#include "fraclab/dyadic.hpp"
#include "fraclab/fractal_gen.hpp"
#include "fraclab/grid_measure.hpp"
#include "fraclab/projection.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fraclab {

/// Lower scale 2^-lo_level (cell size of K_{delta'}) and ball radius hi.
struct ScalePairQuery {
  int lo_level = 0;
  Rational hi{1};

  static ScalePairQuery dyadic(int lo_level, int hi_level) { return {lo_level, pow2(-hi_level)}; }
  Rational lo() const { return pow2(-lo_level); }
};

/// Level of the smallest dyadic scale >= v (non-dyadic lower scales such as
/// 3 delta or 50 Delta are rounded up to the next power of two).
int dyadic_ceil_level(const Rational& v);

/// Counts cells of K_{delta'} met by the fiber line through a sample point
/// inside the open ball. Samples are lattice points X / 2^sample_level.
class FiberCounter {
 public:
  FiberCounter(const GridSet& K, const Direction& dir, int lo_level, int sample_level);

  /// Indexed count (cells whose projection hull contains the fiber).
  long count(std::int64_t X, std::int64_t Y, const Rational& radius) const;
  /// Same quantity by scanning every cell.
  long count_exhaustive(std::int64_t X, std::int64_t Y, const Rational& radius) const;

  int lattice_level() const { return L_; }

 private:
  struct Cell {
    i128 X0, Y0;
    i128 hull_lo;
  };
  bool meets(const Cell& c, i128 Xc, i128 Yc, i128 p, i128 q) const;
  std::pair<i128, i128> radius2(const Rational& radius) const;

  std::int64_t A_ = 1, B_ = 0;
  int L_ = 0, shift_ = 0;
  i128 H_ = 1, hull_width_ = 0;
  std::vector<Cell> cells_;  // ascending hull_lo
};

/// 𝔪_{K,θ}(x | [δ', Δ']) at an exact point.
long multiplicity_at(const GridSet& K, const Direction& dir, const Point& x, const ScalePairQuery& q);

struct MultiplicityField {
  Direction dir;
  ScalePairQuery query;
  GridSet domain;            // sample cells; values at their centres
  std::vector<long> values;  // parallel to domain.cells()
};

MultiplicityField multiplicity_field(const GridSet& K, const Direction& dir, const ScalePairQuery& q,
                                     const std::optional<GridSet>& domain = std::nullopt, bool exhaustive = false);

/// Cells of the domain (default: K's cells) whose centres have multiplicity >= threshold.
GridSet high_mult_set(const GridSet& K, const Direction& dir, double threshold, const ScalePairQuery& q,
                      const std::optional<GridSet>& domain = std::nullopt);

/// Cells whose centre lies in the open ball B(0, radius).
GridSet cells_in_ball(const GridSet& set, const Rational& radius);

struct IotaTerm {
  Direction dir;
  Rational nu_mass{0};
  Rational mu_mass{0};  // mu(B(1) ∩ H)
};

struct IotaResult {
  Rational value{0};
  double value_double = 0.0;
  Rational upper_bound{0};  // mu(B(1)) nu(S^1)
  std::vector<IotaTerm> terms;
};

/// Σ over directions of ν-mass × μ(B(1) ∩ H_θ(spt μ, δ^{-σ}, [δ,1])).
IotaResult iota_integrand(const GridMeasure& mu, const ArcMeasure& nu, double sigma, int delta_level,
                          int spacing_level, bool exhaustive = false);

struct LowMultiplicityProfile {
  Direction dir;
  ScaleLadder ladder;
  double lambda = 0, sigma0 = 0;
  Rational A{1};
  std::vector<std::vector<int>> bad;  // per support cell, bad scale indices j in 1..N
  std::vector<double> density;
  GridSet low_set;                    // L_θ
  Rational mass_outside{0};           // mu(B(1) \ L_θ)
};

LowMultiplicityProfile low_mult_profile(const GridMeasure& mu, const Direction& dir, const ScaleLadder& ladder,
                                        double sigma0, double lambda, const Rational& A);

struct HereditaryResult {
  GridSet G;
  double M_prime = 0;
  Rational mass_F{0}, mass_G{0};
  long min_multiplicity = 0;  // min over G of 𝔪_{G,θ}(x | [4δ, 4])
  bool holds_mass = false;
  bool holds_multiplicity = false;
  std::size_t heavy_tubes = 0, light_tubes = 0;
  std::optional<double> c_max;  // search mode: largest admissible c
};

HereditaryResult hereditary_refine(const GridMeasure& mu, const GridSet& F, const Direction& dir, double M,
                                   const Rational& kappa, const Rational& C_reg, const Rational& c,
                                   bool search = false);

struct DecompositionParams {
  Rational A{1};
  Rational kappa{1, 4};
  double M = 1, N = 1;
  int delta_level = 0, Delta_level = 0;
  Rational c{1, 64};
  Rational C_reg{1};
  Rational inflation{3};
};

struct DecompositionReport {
  Rational lhs{0}, term_main{0}, term_tail{0}, rhs{0}, slack{0};
  bool holds = false;
  std::optional<Rational> c_max;  // nullopt = every c works
};

DecompositionReport check_mult_decomposition(const GridMeasure& mu, const GridSet& K, const Direction& dir,
                                             const DecompositionParams& p, bool search = false);

struct FiberEntropyReport {
  long lhs = 0;
  double rhs = 0;
  double C = 8;
  double C_min = 1;
  bool holds = false;
  double max_bad_weight = 0;  // max_x Σ_{j∈B(x)} (a_{j+1} - a_j) / N
};

FiberEntropyReport check_fiber_entropy_bound(const GridSet& F, const Direction& dir, const ScaleLadder& ladder,
                                             const std::vector<int>& partition, double sigma, double eta,
                                             double C = 8);

}  // namespace fraclab
