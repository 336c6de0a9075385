#pragma once

#include "fraclab/dyadic.hpp"
#include "fraclab/fractal_gen.hpp"
#include "fraclab/grid_measure.hpp"
#include "fraclab/projection.hpp"
#include "fraclab/rational.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace fraclab {

inline constexpr int kConfigSchema = 1;
/// Resolution at which the suite certifies Ahlfors constants.
inline constexpr int kRegularityLevel = 6;

struct PlanarSpec {
  std::string id;
  std::string spec;  // digit-system grammar; depth is chosen by the probes
};

struct ArcSpec {
  std::string id;
  std::string spec;  // arc grammar
};

struct ExperimentConfig {
  int schema = kConfigSchema;
  std::vector<PlanarSpec> planar;
  std::vector<ArcSpec> arcs;
  int m = 2;
  int N_min = 2, N_max = 5;
  std::vector<Rational> sigma;       // absolute exponents
  std::vector<Rational> sigma_frac;  // exponents as fractions of the instance dimension
  std::vector<Rational> sigma0{Rational(1, 2)};
  std::vector<Rational> lambda{Rational(1, 4)};
  std::vector<Rational> tau{Rational(1, 2), Rational(1)};
  std::vector<Rational> eps{Rational(1, 16), Rational(1, 64)};
  std::vector<Rational> kappa{Rational(3, 10)};
  std::vector<Rational> s_lower{Rational(1, 2)};
  std::string out_dir = "fraclab-out";
  std::uint64_t seed = 1;
  std::vector<std::string> probes{"A", "B", "lemmas"};
  std::optional<int> direction_spacing;  // level of the direction grid; default ceil(mN_max / 2)
  int samples = 200;                     // randomized samples per suite block
};

/// Line grammar: `key = value`, `[section]` headers, `#` comments. Lists are
/// comma separated; `planar` and `arc` may repeat and take `id: spec`.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::string& path);
std::string to_text(const ExperimentConfig& cfg);

std::vector<PlanarSpec> default_planar_corpus();
std::vector<ArcSpec> default_arc_corpus();
ExperimentConfig default_config();

struct ResultRow {
  std::string probe;
  std::string instance;
  std::vector<std::pair<std::string, std::string>> params;
  std::string quantity;
  std::string value;
  std::string kind;    // rational | real | integer | bool | text
  std::string status;  // ok | fail | warn | info
  std::string certificate;
  double wall_ms = 0;
};

/// FNV-1a over inputs, operation, parameters and value; wall time excluded.
std::string certificate_hash(const std::string& input_hash, const ResultRow& row);
std::string fnv1a_hex(const std::string& bytes);

void write_csv(std::ostream& os, const std::vector<ResultRow>& rows);
void write_jsonl(std::ostream& os, const std::vector<ResultRow>& rows);

/// Instance generated at the smallest depth whose level reaches min_level.
struct CorpusInstance {
  PlanarSpec spec;
  DigitSystem system;
  PlanarInstance data;
  Rational s{0};
  Rational C{1};  // certified Ahlfors constant
  std::string input_hash;
};

CorpusInstance build_instance(const PlanarSpec& spec, int min_level, bool certify = true);
/// Smallest C on a 1/64 grid with check_ahlfors(mu, s, C) passing.
Rational certify_ahlfors(const GridMeasure& mu, const Rational& s);

/// T(z) = (z - z0) 2^j applied to the cells (z0 on the set's lattice).
GridSet rescale_set(const GridSet& K, const Point& z0, int j);
Point rescale_point(const Point& x, const Point& z0, int j);

struct IdentityTally {
  std::size_t samples = 0, failures = 0;
  std::string witness;  // first failure
  std::size_t secondary_failures = 0;  // monotonicity: cell trade against 2C - 1 instead of C
  std::array<std::size_t, 3> part_failures{};  // monotonicity: (i), (ii), (iii)
};

/// m_{K,θ}(x | [r,R]) = m_{T K,θ}(T x | [r/r0, R/r0]) for T(z) = (z - z0)/r0 at random
/// dyadic r0, x, z0 on the lower-scale lattice and directions; every eighth sample also compares whole fields.
IdentityTally check_rescaling_identity(const CorpusInstance& inst, std::size_t samples, std::mt19937_64& rng);
/// (mu^B)^{B'} == mu^{B''} for random lattice balls.
IdentityTally check_renormalize_chain(const CorpusInstance& inst, std::size_t samples, std::mt19937_64& rng);
/// Threshold, ball and cell-size monotonicity of H-sets over three scale pairs and C in {2, 4}.
IdentityTally check_monotonicity_inclusions(const CorpusInstance& inst, const std::vector<Direction>& dirs);
/// mu^B passes check_ahlfors at the instance's (s, C) for random lattice balls.
IdentityTally check_renormalized_regularity(const CorpusInstance& inst, std::size_t balls, std::mt19937_64& rng);
std::vector<Direction> lemma_directions();

struct LemmaFuzzTally {
  std::size_t runs = 0, failures = 0, density_checks = 0;
  std::string witness;
};
/// Random E with |E| <= eps over eps in {2^-4, 2^-6}, C in {2, 4}, gamma in {1/4, 1/8}.
LemmaFuzzTally fuzz_interval_decomposition(std::size_t count, std::mt19937_64& rng);

std::vector<ResultRow> run_theorem_A_probe(const ExperimentConfig& cfg);
std::vector<ResultRow> run_theorem_B_probe(const ExperimentConfig& cfg);

struct SuiteResult {
  std::vector<ResultRow> rows;
  std::size_t failures = 0, warnings = 0;
  std::vector<std::string> witnesses;  // one line per failing row
};
SuiteResult run_lemma_suite(const ExperimentConfig& cfg);

/// Runs the configured probes and writes results.csv and results.jsonl into
/// out_dir. Returns 0 on success, 1 on a contract violation.
int run_experiment(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log);

}  // namespace fraclab
