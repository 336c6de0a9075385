#pragma once

#include "fraclab/dyadic.hpp"
#include "fraclab/fractal_gen.hpp"
#include "fraclab/grid_measure.hpp"

#include <optional>
#include <vector>

namespace fraclab {

/// Nested dyadic partitions, coarsest first (levels strictly increasing).
struct PartitionLadder {
  std::vector<int> levels;

  static PartitionLadder from(const ScaleLadder& ladder);  // levels m*j, j = 0..N
  void validate(int resolution) const;
};

/// Masses of the parts of level j (positive parts, row-major order of the parts).
std::vector<Rational> part_masses(const GridMeasure& mu, int level);
std::vector<Rational> part_masses(const ArcMeasure& nu, int level);

/// Σ p log2(1/p) with compensated summation; masses must sum to 1.
double entropy_of(const std::vector<Rational>& masses);

double entropy(const GridMeasure& mu, int level);
double entropy(const ArcMeasure& nu, int level);
/// Σ_Q μ(Q) H(μ_Q, fine) over coarse parts Q, evaluated from the definition.
double conditional_entropy(const GridMeasure& mu, int fine, int coarse);
double conditional_entropy(const ArcMeasure& nu, int fine, int coarse);

struct EntropyProfile {
  PartitionLadder ladder;
  std::vector<double> entropy;      // H(μ, D_j) per level
  std::vector<double> conditional;  // H(μ, D_{j+1} | D_j) per step
  std::vector<std::size_t> parts;   // positive parts per level
  double conditional_sum = 0;
  double chain_rule_error = 0;      // |Σ conditional - (H_N - H_0)|
};

EntropyProfile entropy_profile(const GridMeasure& mu, const PartitionLadder& ladder);

/// Σ_E ν(E) log2(ν(E)/μ(E)) over the parts of one level.
double kl_divergence(const GridMeasure& nu, const GridMeasure& mu, int level);
/// Σ_F ν(F) KL(ν_F | μ_F, fine) over coarse parts F, evaluated from the definition.
double kl_conditional(const GridMeasure& nu, const GridMeasure& mu, int fine, int coarse);

struct PartialSumReport {
  double sum = 0;    // Σ_{E∈G} ν(E) log ν(E)/μ(E)
  double bound = 0;  // ν(G) log ν(G)/μ(G)
  bool holds = false;
};

/// Sub-collection given by parts of one level (cells at that level).
PartialSumReport kl_partial_sum(const GridMeasure& nu, const GridMeasure& mu, const GridSet& parts);

struct GoodScalesReport {
  std::vector<double> conditional;  // H(μ̄, D_{Δ^{j+1}} | D_{Δ^j}), j = 0..N-1
  std::vector<int> good;
  double threshold = 0;             // (s - √ε) log 1/Δ
  double required = 0;              // (1 - 2√ε) N
  bool in_regime = false;           // log2(1/Δ) >= C/ε
  bool holds = false;
  double shortfall = 0;
};

/// Uniform measure on the cells of K (at level m N); hypothesis |K|_δ >= δ^{-s+ε}.
GoodScalesReport good_scales(const GridSet& K, const ScaleLadder& ladder, double s, double eps, double C);

struct GoodCubesReport {
  Rational c{0};
  std::vector<Coord> cubes;  // at level m
  Rational mass{0};
  Rational required{0};      // 1 - 3/H
  bool in_regime = false;    // log2(1/c) <= ε log2(1/Δ)
  bool holds = false;
  std::optional<ExactScaled> c_max;  // largest c with mass >= 1 - 3/H
};

/// c defaults to ε/(16 C s). Hypotheses H(μ, D_Δ) >= (s-ε) log 1/Δ and |spt μ|_Δ <= C Δ^{-s}.
GoodCubesReport good_cubes(const GridMeasure& mu, int Delta_level, const Rational& s, const Rational& eps,
                           const Rational& H, const Rational& C, std::optional<Rational> c = std::nullopt);

struct PigeonholeReport {
  std::vector<int> good_levels;        // Σ_Q μ(H(Q)) >= d/2
  std::vector<std::size_t> heavy;      // heavy parts per ladder level
  std::vector<int> heavy_count;        // per support cell
  GridSet F;
  Rational mass_F{0};
  Rational required{0};                // d^2 / 16
  bool holds = false;
};

/// in_H[j][i] marks support cell i as lying in H(Q_j(x)) for the level-j part Q_j(x).
PigeonholeReport partition_pigeonhole(const GridMeasure& mu, const PartitionLadder& ladder,
                                      const std::vector<std::vector<char>>& in_H, const Rational& d);

}  // namespace fraclab
