#pragma once

#include "fraclab/dyadic.hpp"
#include "fraclab/fractal_gen.hpp"
#include "fraclab/projection.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fraclab {

// ---- Uniform sets -----------------------------------------------------------

/// Points of δ·ℤ ∩ [0,1) given by their integer index at level m N.
struct UniformSet1D {
  ScaleLadder ladder;
  std::vector<std::int64_t> points;  // ascending, unique
  std::vector<std::int64_t> R;       // branching numbers when uniform
};

struct BranchingReport {
  bool uniform = false;
  std::vector<std::int64_t> R;  // R_j for the levels verified so far
  int violation_level = -1;     // first level j with unequal child counts
  std::int64_t violation_interval = 0;
  std::int64_t expected = 0, found = 0;
};

/// Points must lie in [0, 2^{mN}); duplicates are removed.
BranchingReport branching_numbers(const ScaleLadder& ladder, std::vector<std::int64_t> points);

struct UniformizeResult {
  UniformSet1D set;
  double size_ratio = 0;  // |out| / |in|
};

/// Largest-class pruning from the finest level upwards; output is nonempty and uniform.
UniformizeResult uniformize(const ScaleLadder& ladder, std::vector<std::int64_t> points);

// ---- Interval decomposition ------------------------------------------------

struct IntervalAuditStep {
  int step = 0;
  std::size_t transient = 0, good = 0, bad = 0, short_ = 0;
  Rational transient_length{0};
  Rational bound{0};  // (1 - γ)^n
};

struct IntervalDecomposition {
  Rational C{1}, gamma{1, 2}, eps{0};
  int n_steps = 0;  // n(C, γ)
  int rho_level = 0;  // ρ = 2^{-rho_level}
  std::vector<DyadicInterval> G, B, S, T;
  std::vector<IntervalAuditStep> audit;
  Rational measure_G{0};
  bool holds_measure = false;   // |G| >= 1 - 1/C
  bool holds_density = false;   // |E ∩ I| < 8Cε|I| on every dyadic I ⊆ J, |I| >= γ|J|
  bool holds_length = false;    // |J| >= ρ
  bool holds_audit = false;     // |T_n| <= (1-γ)^n
  std::size_t density_checks = 0;
  Rational worst_density{0};    // max |E ∩ I| / |I| over checked pairs
};

/// Smallest n with (1-γ)^n <= 1/(4C).
int interval_steps(const Rational& C, const Rational& gamma);

/// E is a finite union of dyadic intervals of [0,1); |E| <= eps is required.
IntervalDecomposition interval_decomposition(const std::vector<DyadicInterval>& E, const Rational& C,
                                             const Rational& gamma, const Rational& eps);

// ---- Branching scales of Frostman arc measures -----------------------------

struct TauRationals {
  int n = 1;
  std::vector<Rational> Q0;  // ½ d^{-j}, j = 0..n
};

TauRationals tau_rationals(const Rational& d, const Rational& tau);

struct ScaleFinderCertificate {
  int delta_level = 0;
  Rational d{2}, tau{1}, eta{0};
  TauRationals numbers;
  std::vector<Rational> exponents;  // k p_j for δ_j = δ^{p_j}, p_j = ½ d^{1-j}
  std::vector<int> levels;          // rounded dyadic levels
  std::vector<Rational> rounding;   // levels[j] - exponents[j]
  Rational frostman_C{0};           // constant used in the Frostman scan (<= δ^{-η})
  std::vector<double> conditional;  // H(ν, D_{δ_j} | D_{δ_{j+1}})
  int j = 0;
  Rational p{0};                    // δ_{j+1} = δ^p
  double tau_bar = 0;
  std::vector<std::int64_t> top;    // 𝒢_{j+1}, intervals at levels[j+1]
  Rational mass_top{0};
  std::vector<std::int64_t> G;      // intervals at levels[j]
  Rational mass_G{0};
  Rational mass_bound{0};           // τ² / (150 n²)
  bool holds_mass = false;
  bool holds_ratio = false;         // ν(J∩G) <= δ^{τ/(20n)} ν(I∩G)
  std::size_t pairs_checked = 0;
  double worst_ratio_log2 = 0;      // max log2(ν(J∩G)/ν(I∩G))
};

ScaleFinderCertificate branching_scale_finder(const ArcMeasure& nu, int delta_level, const Rational& d,
                                              const Rational& tau, const Rational& eta);

/// Re-checks both conclusions from G alone; returns (mass ok, ratio ok).
std::pair<bool, bool> verify_scale_certificate(const ArcMeasure& nu, const ScaleFinderCertificate& cert);

// ---- δ-measures ----------------------------------------------------------

/// Probability on {i δ : 0 <= i < extent}, δ = 2^{-level}; weights num[i] / den.
class DeltaMeasure {
 public:
  DeltaMeasure() = default;
  DeltaMeasure(int level, std::vector<std::int64_t> atoms, std::vector<Rational> weights);
  static DeltaMeasure uniform(int level, std::vector<std::int64_t> atoms);

  int level() const { return level_; }
  std::int64_t extent() const { return extent_; }
  const std::vector<std::int64_t>& atoms() const { return atoms_; }
  Rational weight(std::size_t i) const { return Rational(from_i128(num_[i]), from_i128(den_)); }
  Rational mass() const;
  Rational l2_squared() const;
  double l2() const;

  friend DeltaMeasure convolve(const DeltaMeasure& a, const DeltaMeasure& b);

 private:
  int level_ = 0;
  std::int64_t extent_ = 1;
  std::vector<std::int64_t> atoms_;
  std::vector<i128> num_;
  i128 den_ = 1;
};

/// Supported on δ·ℤ ∩ [0,2).
DeltaMeasure convolve(const DeltaMeasure& a, const DeltaMeasure& b);
double l2_norm(const DeltaMeasure& eta);

struct InverseHypothesisReport {
  double conv_norm = 0, eta1_norm = 0;
  double kappa_star = 0;  // smallest κ for which the hypothesis holds
  bool holds = false;
};

/// ‖η₁ ∗ η₂‖ >= δ^κ ‖η₁‖.
InverseHypothesisReport inverse_hypothesis_gap(const DeltaMeasure& eta1, const DeltaMeasure& eta2,
                                               const Rational& kappa);

struct StructureReport {
  BranchingReport A, B;
  std::vector<int> S;          // {j : R¹_j >= 2^{(1-ρ)m}}
  bool inclusion = false;      // {j : R²_j > 1} ⊂ S
  double lhs = 0;              // m |S|
  double rhs_plus = 0;         // log ‖η₂‖^{-2} + ρ log2 δ
  double rhs_minus = 0;        // log ‖η₂‖^{-2} - ρ log(1/δ)
  bool holds_plus = false, holds_minus = false;
};

/// Checks the structural output format for candidate sets A ⊂ spt η₁, B ⊂ spt η₂.
StructureReport check_inverse_structure(const DeltaMeasure& eta2, const ScaleLadder& ladder,
                                        const std::vector<std::int64_t>& A, const std::vector<std::int64_t>& B,
                                        double rho);

struct ProductBound {
  double log2_product = 0;  // log2 ∏ R_n
  double log2_bound = 0;    // (1-ρ) m |S| + Σ_{n∉S} log2 R_n
  bool holds = false;
};

ProductBound branching_product_bound(const std::vector<std::int64_t>& R, const std::vector<int>& S, int m,
                                     double rho);

// ---- Projection branching lower bound --------------------------------------

struct WitnessLevel {
  int j = 0;
  Coord cube;               // maximizing Q at level m j
  std::size_t count = 0;    // |π(K ∩ Q)|_{Δ^{j+1}}
  bool good = false;
};

struct LowerBoundWitness {
  std::vector<WitnessLevel> levels;
  std::vector<int> G;
  double bound_log2 = 0;     // log2 Δ^{σ - s + 100ε}
  double required = 0;       // (1 - 10ε) N
  double measured_eps = 0;   // max_x bad-scale fraction
  bool in_regime = false;    // log2(1/Δ) >= 2C/ε²
  std::string regime_condition;
  bool holds = false;
};

/// Hypotheses |K|_δ >= δ^{-s+ε²/2} and the bad-scale count bound are verified first.
LowerBoundWitness branching_lower_bound_witness(const GridSet& K, const Direction& dir, const ScaleLadder& ladder,
                                                double s, double sigma, double eps, double C);

/// max over support cells of |{j : 𝔪(x | [10Δ^{j+1}, 10Δ^j]) > Δ^{-σ}}| / N.
double bad_scale_density(const GridSet& K, const Direction& dir, const ScaleLadder& ladder, double sigma);

}  // namespace fraclab
