#include "fraclab/lab.hpp"

#include "fraclab/branching.hpp"
#include "fraclab/entropy.hpp"
#include "fraclab/errors.hpp"
#include "fraclab/multiplicity.hpp"
#include "fraclab/projection.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

namespace fraclab {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(v);
  while (std::getline(is, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::string fmt_real(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string fmt_rationals(const std::vector<Rational>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + to_string(v[i]);
  return out;
}

int parse_int_value(const std::string& v, int line) {
  try {
    std::size_t used = 0;
    long x = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<int>(x);
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line) + ": expected an integer, got '" + v + "'");
  }
}

std::vector<Rational> parse_rational_list(const std::string& v, int line) {
  std::vector<Rational> out;
  for (auto& t : split_list(v)) {
    try {
      out.push_back(parse_rational(t));
    } catch (const Error& e) {
      throw ParseError("line " + std::to_string(line) + ": bad number '" + t + "'");
    }
  }
  if (out.empty()) throw ParseError("line " + std::to_string(line) + ": empty list");
  return out;
}

// `id: spec` or bare `spec` (id = spec).
bool is_arc_spec(const std::string& s) {
  return s == "uniform" || s.rfind("cantor:", 0) == 0 || s.rfind("single:", 0) == 0;
}

// `id: spec`, or a bare spec that doubles as its id. Arc specs may contain a colon themselves.
std::pair<std::string, std::string> split_id(const std::string& v, bool arc) {
  auto colon = v.find(':');
  if (colon != std::string::npos) {
    std::string head = trim(v.substr(0, colon)), rest = trim(v.substr(colon + 1));
    bool rest_is_spec = arc ? is_arc_spec(rest) : rest.find("b=") != std::string::npos;
    if (rest_is_spec && head.find_first_of("=;(") == std::string::npos) return {head, rest};
  }
  return {v, v};
}

using Clock = std::chrono::steady_clock;
double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct RowBuilder {
  std::string probe, instance, input_hash;
  std::vector<std::pair<std::string, std::string>> params;

  ResultRow make(const std::string& quantity, const std::string& value, const std::string& kind,
                 const std::string& status, double wall_ms) const {
    ResultRow r{probe, instance, params, quantity, value, kind, status, "", wall_ms};
    r.certificate = certificate_hash(input_hash, r);
    return r;
  }
  ResultRow rational(const std::string& q, const Rational& v, const std::string& st = "info", double t = 0) const {
    return make(q, to_string(v), "rational", st, t);
  }
  ResultRow real(const std::string& q, double v, const std::string& st = "info", double t = 0) const {
    return make(q, fmt_real(v), "real", st, t);
  }
  ResultRow integer(const std::string& q, long long v, const std::string& st = "info", double t = 0) const {
    return make(q, std::to_string(v), "integer", st, t);
  }
  ResultRow boolean(const std::string& q, bool v, const std::string& st, double t = 0) const {
    return make(q, v ? "true" : "false", "bool", st, t);
  }
  ResultRow text(const std::string& q, const std::string& v, const std::string& st, double t = 0) const {
    return make(q, v, "text", st, t);
  }
};

int arc_level_at_least(const ArcKind& kind, int target) {
  for (int l = std::max(1, target); l <= target + 8; ++l) {
    try {
      generate_arc_measure(kind, l);
      return l;
    } catch (const PreconditionError&) {
    }
  }
  throw PreconditionError("no admissible arc level near " + std::to_string(target));
}

// Directions a x + b y: slopes k/8 and their transposes, sixteen in total.
std::vector<Direction> sixteen_directions() {
  std::vector<Direction> out;
  for (int k = 0; k < 8; ++k) out.push_back(Direction::from_slope(Rational(k, 8)));
  for (int k = 0; k < 8; ++k) out.push_back(Direction::from_vector(Rational(k, 8), Rational(1)));
  return out;
}

std::int64_t lattice_index(const Rational& v, int level) {
  Rational x = v * pow2(level);
  if (boost::multiprecision::denominator(x) != 1)
    throw PreconditionError("point is not on the level-" + std::to_string(level) + " lattice");
  return to_int64_checked(boost::multiprecision::numerator(x));
}

}  // namespace

// ---- configuration ---------------------------------------------------------

std::vector<PlanarSpec> default_planar_corpus() {
  return {{"four_corner", "b=4;D=(0,0),(0,3),(3,0),(3,3)"},
          {"skew", "b=4;D=(0,1),(1,3),(2,0),(3,2)"},
          {"cantor_line", "b=4;D=(0,0),(3,0)"},
          {"segment", "b=2;D=(0,0),(1,0)"}};
}

std::vector<ArcSpec> default_arc_corpus() { return {{"uniform", "uniform"}, {"cantor", "cantor:b=4;D=0,3"}}; }

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  cfg.planar = default_planar_corpus();
  cfg.arcs = default_arc_corpus();
  cfg.sigma_frac = {Rational(1, 2)};
  return cfg;
}

ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig cfg;
  cfg.sigma.clear();
  cfg.sigma_frac.clear();
  bool have_schema = false, have_sigma = false;
  std::string section, raw;
  int line_no = 0;
  auto fail = [&](const std::string& msg) { throw ParseError("line " + std::to_string(line_no) + ": " + msg); };
  while (std::getline(is, raw)) {
    ++line_no;
    auto hash = raw.find('#');
    std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      static const char* known[] = {"corpus", "ladder", "grid", "output", "run"};
      if (std::find(std::begin(known), std::end(known), section) == std::end(known))
        fail("unknown section [" + section + "]");
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
    if (val.empty()) fail("empty value for '" + key + "'");
    if (section.empty()) {
      if (key != "schema") fail("unknown top-level key '" + key + "'");
      cfg.schema = parse_int_value(val, line_no);
      if (cfg.schema != kConfigSchema)
        fail("unsupported schema " + val + " (expected " + std::to_string(kConfigSchema) + ")");
      have_schema = true;
    } else if (section == "corpus") {
      auto [id, spec] = split_id(val, key == "arc");
      try {
        if (key == "planar") {
          parse_digit_system(spec);
          cfg.planar.push_back({id, spec});
        } else if (key == "arc") {
          parse_arc_kind(spec);
          cfg.arcs.push_back({id, spec});
        } else {
          fail("unknown key '" + key + "' in [corpus]");
        }
      } catch (const ParseError&) {
        throw;
      } catch (const Error& e) {
        fail(e.what());
      }
    } else if (section == "ladder") {
      if (key == "m") {
        cfg.m = parse_int_value(val, line_no);
      } else if (key == "N") {
        auto dots = val.find("..");
        if (dots == std::string::npos) {
          cfg.N_min = cfg.N_max = parse_int_value(val, line_no);
        } else {
          cfg.N_min = parse_int_value(trim(val.substr(0, dots)), line_no);
          cfg.N_max = parse_int_value(trim(val.substr(dots + 2)), line_no);
        }
      } else {
        fail("unknown key '" + key + "' in [ladder]");
      }
    } else if (section == "grid") {
      auto list = parse_rational_list(val, line_no);
      if (key == "sigma") cfg.sigma = list, have_sigma = true;
      else if (key == "sigma_frac") cfg.sigma_frac = list, have_sigma = true;
      else if (key == "sigma0") cfg.sigma0 = list;
      else if (key == "lambda") cfg.lambda = list;
      else if (key == "tau") cfg.tau = list;
      else if (key == "eps") cfg.eps = list;
      else if (key == "kappa") cfg.kappa = list;
      else if (key == "s_lower") cfg.s_lower = list;
      else fail("unknown key '" + key + "' in [grid]");
      for (auto& v : list)
        if (v < 0) fail("negative value in '" + key + "'");
    } else if (section == "output") {
      if (key != "dir") fail("unknown key '" + key + "' in [output]");
      cfg.out_dir = val;
    } else if (section == "run") {
      if (key == "seed") {
        try {
          cfg.seed = std::stoull(val);
        } catch (const std::exception&) {
          fail("bad seed '" + val + "'");
        }
      } else if (key == "probes") {
        cfg.probes = split_list(val);
        for (auto& p : cfg.probes)
          if (p != "A" && p != "B" && p != "lemmas") fail("unknown probe '" + p + "'");
      } else if (key == "direction_spacing") {
        cfg.direction_spacing = parse_int_value(val, line_no);
      } else if (key == "samples") {
        cfg.samples = parse_int_value(val, line_no);
      } else {
        fail("unknown key '" + key + "' in [run]");
      }
    }
  }
  if (!have_schema) throw ParseError("missing 'schema = " + std::to_string(kConfigSchema) + "'");
  if (cfg.m < 1) throw ParseError("ladder m must be >= 1");
  if (cfg.N_min < 1 || cfg.N_max < cfg.N_min) throw ParseError("ladder N range must satisfy 1 <= a <= b");
  if (cfg.m * cfg.N_max > 24) throw ParseError("ladder too deep: m * N must be <= 24");
  if (cfg.direction_spacing && (*cfg.direction_spacing < 1 || *cfg.direction_spacing > 20))
    throw ParseError("direction_spacing must lie in 1..20");
  if (cfg.samples < 1) throw ParseError("samples must be >= 1");
  if (cfg.planar.empty()) cfg.planar = default_planar_corpus();
  if (cfg.arcs.empty()) cfg.arcs = default_arc_corpus();
  if (!have_sigma) cfg.sigma_frac = {Rational(1, 2)};
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config '" + path + "'");
  return parse_config(in);
}

std::string to_text(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "schema = " << cfg.schema << "\n\n[corpus]\n";
  for (auto& p : cfg.planar) os << "planar = " << p.id << ": " << p.spec << "\n";
  for (auto& a : cfg.arcs) os << "arc = " << a.id << ": " << a.spec << "\n";
  os << "\n[ladder]\nm = " << cfg.m << "\nN = " << cfg.N_min << ".." << cfg.N_max << "\n\n[grid]\n";
  if (!cfg.sigma.empty()) os << "sigma = " << fmt_rationals(cfg.sigma) << "\n";
  if (!cfg.sigma_frac.empty()) os << "sigma_frac = " << fmt_rationals(cfg.sigma_frac) << "\n";
  os << "sigma0 = " << fmt_rationals(cfg.sigma0) << "\nlambda = " << fmt_rationals(cfg.lambda)
     << "\ntau = " << fmt_rationals(cfg.tau) << "\neps = " << fmt_rationals(cfg.eps)
     << "\nkappa = " << fmt_rationals(cfg.kappa) << "\ns_lower = " << fmt_rationals(cfg.s_lower) << "\n\n[output]\ndir = "
     << cfg.out_dir << "\n\n[run]\nseed = " << cfg.seed << "\nprobes = ";
  for (std::size_t i = 0; i < cfg.probes.size(); ++i) os << (i ? ", " : "") << cfg.probes[i];
  os << "\nsamples = " << cfg.samples << "\n";
  if (cfg.direction_spacing) os << "direction_spacing = " << *cfg.direction_spacing << "\n";
  return os.str();
}

// ---- rows and serialisation ---------------------------------------------------

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string certificate_hash(const std::string& input_hash, const ResultRow& row) {
  std::string buf = input_hash + '\x1f' + row.probe + '\x1f' + row.instance + '\x1f' + row.quantity + '\x1f';
  for (auto& [k, v] : row.params) buf += k + '=' + v + '\x1e';
  buf += '\x1f' + row.value + '\x1f' + row.kind;
  return fnv1a_hex(buf);
}

namespace {
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += (c == '"') ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}
}  // namespace

void write_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << "probe,instance,params,quantity,value,kind,status,certificate,wall_ms\n";
  for (auto& r : rows) {
    std::string params;
    for (std::size_t i = 0; i < r.params.size(); ++i) params += (i ? ";" : "") + r.params[i].first + "=" + r.params[i].second;
    os << csv_field(r.probe) << ',' << csv_field(r.instance) << ',' << csv_field(params) << ',' << csv_field(r.quantity)
       << ',' << csv_field(r.value) << ',' << r.kind << ',' << r.status << ',' << r.certificate << ','
       << std::fixed << std::setprecision(3) << r.wall_ms << std::defaultfloat << '\n';
  }
}

void write_jsonl(std::ostream& os, const std::vector<ResultRow>& rows) {
  for (auto& r : rows) {
    nlohmann::ordered_json j;
    j["probe"] = r.probe;
    j["instance"] = r.instance;
    nlohmann::ordered_json p = nlohmann::ordered_json::object();
    for (auto& [k, v] : r.params) p[k] = v;
    j["params"] = p;
    j["quantity"] = r.quantity;
    if (r.kind == "real") j["value"] = std::stod(r.value);
    else if (r.kind == "integer") j["value"] = std::stoll(r.value);
    else if (r.kind == "bool") j["value"] = (r.value == "true");
    else j["value"] = r.value;  // rationals stay "p/q" strings
    j["kind"] = r.kind;
    j["status"] = r.status;
    j["certificate"] = r.certificate;
    j["wall_ms"] = r.wall_ms;
    os << j.dump() << '\n';
  }
}

// ---- corpus --------------------------------------------------------------

Rational certify_ahlfors(const GridMeasure& mu, const Rational& s) {
  auto first = check_ahlfors(mu, s, Rational(1));
  if (first.verdict) return Rational(1);
  // C_best is a rounded double; the exact verdict decides between neighbouring grid points.
  Rational C(static_cast<long long>(std::ceil(first.C_best * 64.0)), 64);
  for (int i = 0; i < 4; ++i, C += Rational(1, 64))
    if (check_ahlfors(mu, s, C).verdict) return C;
  throw HypothesisError("no Ahlfors constant found near " + fmt_real(first.C_best));
}

CorpusInstance build_instance(const PlanarSpec& spec, int min_level, bool certify) {
  CorpusInstance inst;
  inst.spec = spec;
  inst.system = parse_digit_system(spec.spec);
  int bits = inst.system.bits();
  inst.system.depth = std::max(1, (min_level + bits - 1) / bits);
  inst.data = generate_planar(inst.system);
  if (auto e = inst.system.exact_dimension()) {
    inst.s = *e;
  } else {
    inst.s = Rational(static_cast<long long>(std::llround(inst.system.dimension() * (1 << 20))), 1 << 20);
  }
  if (certify) inst.C = certify_ahlfors(inst.data.measure, inst.s);
  inst.input_hash = fnv1a_hex(to_binary(inst.data.set) + '\x1f' + inst.system.spec());
  return inst;
}

GridSet rescale_set(const GridSet& K, const Point& z0, int j) {
  const int L = K.level();
  std::int64_t zx = lattice_index(z0.x, L), zy = lattice_index(z0.y, L);
  std::vector<Coord> cells;
  cells.reserve(K.size());
  for (const auto& c : K.cells()) cells.push_back({c.ix - zx, c.iy - zy});
  const Window& w = K.window();
  Rational f = pow2(j);
  Window tw{(w.x0 - z0.x) * f, (w.y0 - z0.y) * f, (w.x1 - z0.x) * f, (w.y1 - z0.y) * f};
  return GridSet(L - j, std::move(cells), tw);
}

Point rescale_point(const Point& x, const Point& z0, int j) {
  Rational f = pow2(j);
  return {(x.x - z0.x) * f, (x.y - z0.y) * f};
}

// ---- identity blocks -------------------------------------------------------

IdentityTally check_rescaling_identity(const CorpusInstance& inst, std::size_t samples, std::mt19937_64& rng) {
  IdentityTally t;
  const GridSet& K = inst.data.set;
  const int L = K.level();
  auto dirs = sixteen_directions();
  std::uniform_int_distribution<int> pick_dir(0, static_cast<int>(dirs.size()) - 1);
  std::uniform_int_distribution<int> pick_j(-2, 3), pick_gap(0, 4), pick_lo(std::max(0, L - 4), L);
  std::uniform_int_distribution<std::int64_t> pick_z(-(std::int64_t{1} << L), std::int64_t{1} << L);
  std::uniform_int_distribution<std::int64_t> pick_x(-(std::int64_t{1} << (L + 1)), 3 * (std::int64_t{1} << (L + 1)));
  for (std::size_t n = 0; n < samples; ++n) {
    const Direction& dir = dirs[static_cast<std::size_t>(pick_dir(rng))];
    int j = pick_j(rng), lo = pick_lo(rng), hi = lo - pick_gap(rng);
    // K_δ' is built from dyadic cells, so translations must respect the δ'-lattice.
    Point z0{dyadic(pick_z(rng) >> (L - lo), lo), dyadic(pick_z(rng) >> (L - lo), lo)};
    Point x{dyadic(pick_x(rng), L + 2), dyadic(pick_x(rng), L + 2)};
    ScalePairQuery q{lo, pow2(-hi)};
    ScalePairQuery tq{lo - j, pow2(-hi) * pow2(j)};
    GridSet TK = rescale_set(K, z0, j);
    long a = multiplicity_at(K, dir, x, q);
    long b = multiplicity_at(TK, dir, rescale_point(x, z0, j), tq);
    ++t.samples;
    if (a != b) {
      if (t.failures++ == 0)
        t.witness = inst.spec.id + " dir " + dir.label() + " x=(" + to_string(x.x) + "," + to_string(x.y) + ") z0=(" +
                    to_string(z0.x) + "," + to_string(z0.y) + ") j=" + std::to_string(j) + ": " + std::to_string(a) +
                    " vs " + std::to_string(b);
    }
    // Every eighth sample also compares the materialised fields cell by cell.
    if (n % 8 == 0) {
      auto f1 = multiplicity_field(K, dir, q);
      GridSet TD = rescale_set(K, z0, j);
      auto f2 = multiplicity_field(TK, dir, tq, TD);
      ++t.samples;
      if (f1.values != f2.values) {
        if (t.failures++ == 0) t.witness = inst.spec.id + " dir " + dir.label() + ": materialised fields differ";
      }
    }
  }
  return t;
}

IdentityTally check_renormalize_chain(const CorpusInstance& inst, std::size_t samples, std::mt19937_64& rng) {
  IdentityTally t;
  const GridMeasure& mu = inst.data.measure;
  const int L = mu.level();
  std::uniform_int_distribution<int> pick_j1(0, L / 2);
  for (std::size_t n = 0; n < samples; ++n) {
    int j1 = pick_j1(rng);
    int L1 = L - j1;
    std::uniform_int_distribution<int> pick_j2(0, L1 / 2);
    int j2 = pick_j2(rng);
    std::uniform_int_distribution<std::int64_t> c1(0, std::int64_t{1} << L), c2(-(std::int64_t{1} << L1),
                                                                                 std::int64_t{1} << L1);
    Ball B{{dyadic(c1(rng), L), dyadic(c1(rng), L)}, pow2(-j1)};
    Ball Bp{{dyadic(c2(rng), L1), dyadic(c2(rng), L1)}, pow2(-j2)};
    Ball Bpp{{B.center.x + B.radius * Bp.center.x, B.center.y + B.radius * Bp.center.y}, B.radius * Bp.radius};
    auto lhs = renormalize(renormalize(mu, B, inst.s), Bp, inst.s);
    auto rhs = renormalize(mu, Bpp, inst.s);
    ++t.samples;
    if (!(lhs == rhs)) {
      if (t.failures++ == 0)
        t.witness = inst.spec.id + " j1=" + std::to_string(j1) + " j2=" + std::to_string(j2) + ": measures differ";
    }
  }
  return t;
}

IdentityTally check_monotonicity_inclusions(const CorpusInstance& inst, const std::vector<Direction>& dirs) {
  IdentityTally t;
  const GridSet& K = inst.data.set;
  const int L = K.level();
  // (delta level, Delta level) pairs; C = 2^c for c = 1, 2.
  const std::vector<std::pair<int, int>> pairs{{L, L - 4}, {L - 1, L - 4}, {L, L - 6}};
  auto note = [&](std::size_t part, const std::string& what) {
    ++t.part_failures[part];
    if (t.failures++ == 0) t.witness = inst.spec.id + ": " + what;
  };
  for (const auto& dir : dirs)
    for (auto [lo, hi] : pairs) {
      ScalePairQuery q{lo, pow2(-hi)};
      auto base = multiplicity_field(K, dir, q);
      long vmax = *std::max_element(base.values.begin(), base.values.end());
      // (i): thresholds N >= M give nested materialised sets.
      std::vector<GridSet> Hs;
      for (long M = 1; M <= vmax + 1; M = M < 4 ? M + 1 : 2 * M) Hs.push_back(high_mult_set(K, dir, double(M), q));
      for (std::size_t a = 1; a < Hs.size(); ++a) {
        ++t.samples;
        if (!is_subset(Hs[a], Hs[a - 1])) note(0, "(i) fails for " + dir.label());
      }
      for (int c = 1; c <= 2; ++c) {
        long C = 1L << c;
        // (ii): enlarging the ball never lowers the count.
        auto wide = multiplicity_field(K, dir, ScalePairQuery{lo, pow2(-hi) * C});
        // (iii): coarser cells with threshold M / C; needs C delta <= Delta.
        std::optional<MultiplicityField> coarse;
        if (lo - c >= hi) coarse = multiplicity_field(K, dir, ScalePairQuery{lo - c, pow2(-hi)});
        for (std::size_t i = 0; i < base.values.size(); ++i) {
          long v = base.values[i];
          if (v < 1) continue;
          ++t.samples;
          if (wide.values[i] < v)
            note(1, "(ii) fails for " + dir.label() + " at cell " + std::to_string(i) + " C=" + std::to_string(C));
          if (coarse) {
            ++t.samples;
            if ((2 * C - 1) * coarse->values[i] < v) ++t.secondary_failures;
            if (C * coarse->values[i] < v)
              note(2, "(iii) fails for " + dir.label() + " lo=" + std::to_string(lo) + " hi=" + std::to_string(hi) +
                   " C=" + std::to_string(C) + " cell " + std::to_string(i) + ": " + std::to_string(v) + " vs " +
                   std::to_string(coarse->values[i]));
          }
        }
      }
    }
  return t;
}

IdentityTally check_renormalized_regularity(const CorpusInstance& inst, std::size_t balls, std::mt19937_64& rng) {
  IdentityTally t;
  const int L = inst.data.set.level();
  std::uniform_int_distribution<int> pick_j(0, L / 2);
  std::uniform_int_distribution<std::int64_t> pick_c(0, std::int64_t{1} << L);
  for (std::size_t n = 0; n < balls; ++n) {
    Ball B{{dyadic(pick_c(rng), L), dyadic(pick_c(rng), L)}, pow2(-pick_j(rng))};
    ++t.samples;
    if (!check_ahlfors(renormalize(inst.data.measure, B, inst.s), inst.s, inst.C).verdict && t.failures++ == 0)
      t.witness = inst.spec.id + " ball centre (" + to_string(B.center.x) + "," + to_string(B.center.y) +
                  ") r=" + to_string(B.radius);
  }
  return t;
}

std::vector<Direction> lemma_directions() { return sixteen_directions(); }

// ---- probes ----------------------------------------------------------------

namespace {

int spacing_for(const ExperimentConfig& cfg) {
  return cfg.direction_spacing.value_or((cfg.m * cfg.N_max + 1) / 2);
}

std::vector<std::pair<std::string, Rational>> sigma_grid(const ExperimentConfig& cfg, const Rational& s) {
  std::vector<std::pair<std::string, Rational>> out;
  for (auto& v : cfg.sigma) out.push_back({to_string(v), v});
  for (auto& f : cfg.sigma_frac) out.push_back({to_string(f) + "*s", f * s});
  return out;
}

}  // namespace

std::vector<ResultRow> run_theorem_A_probe(const ExperimentConfig& cfg) {
  std::vector<ResultRow> rows;
  const int spacing = spacing_for(cfg);
  for (const auto& ps : cfg.planar) {
    auto inst = build_instance(ps, cfg.m * cfg.N_max, false);
    for (const auto& as : cfg.arcs) {
      ArcKind kind = parse_arc_kind(as.spec);
      ArcMeasure nu = generate_arc_measure(kind, arc_level_at_least(kind, spacing));
      for (auto& [label, sigma] : sigma_grid(cfg, inst.s)) {
        std::vector<Rational> trend;
        for (int N = cfg.N_min; N <= cfg.N_max; ++N) {
          RowBuilder rb{"theorem_A", ps.id + "|" + as.id, inst.input_hash + as.spec,
                        {{"m", std::to_string(cfg.m)},
                         {"N", std::to_string(N)},
                         {"sigma", to_string(sigma)},
                         {"sigma_spec", label},
                         {"spacing", std::to_string(spacing)},
                         {"level", std::to_string(inst.data.set.level())}}};
          auto t0 = Clock::now();
          auto direct = iota_integrand(inst.data.measure, nu, to_double(sigma), cfg.m * N, spacing, false);
          double t_direct = ms_since(t0);
          t0 = Clock::now();
          auto brute = iota_integrand(inst.data.measure, nu, to_double(sigma), cfg.m * N, spacing, true);
          double t_brute = ms_since(t0);
          rows.push_back(rb.rational("iota", direct.value, "info", t_direct));
          rows.push_back(rb.rational("iota_bruteforce", brute.value, "info", t_brute));
          rows.push_back(rb.rational("iota_upper", direct.upper_bound));
          bool agree = direct.value == brute.value;
          rows.push_back(rb.boolean("dual_path_agree", agree, agree ? "ok" : "fail"));
          trend.push_back(direct.value);
        }
        bool mono = true;
        for (std::size_t i = 1; i < trend.size(); ++i) mono = mono && trend[i] <= trend[i - 1];
        RowBuilder rb{"theorem_A", ps.id + "|" + as.id, inst.input_hash + as.spec,
                      {{"m", std::to_string(cfg.m)},
                       {"N", std::to_string(cfg.N_min) + ".." + std::to_string(cfg.N_max)},
                       {"sigma", to_string(sigma)}}};
        rows.push_back(rb.boolean("iota_nonincreasing", mono, mono ? "ok" : "warn"));
      }
    }
  }
  return rows;
}

std::vector<ResultRow> run_theorem_B_probe(const ExperimentConfig& cfg) {
  std::vector<ResultRow> rows;
  const int spacing = spacing_for(cfg);
  constexpr int kThresholdBits = 40;
  for (const auto& ps : cfg.planar) {
    auto inst = build_instance(ps, cfg.m * cfg.N_max, false);
    GridSet in_ball = cells_in_ball(inst.data.set, Rational(1));
    GridMeasure mu = inst.data.measure.restrict_to(in_ball);
    for (const auto& as : cfg.arcs) {
      ArcKind kind = parse_arc_kind(as.spec);
      ArcMeasure nu = generate_arc_measure(kind, arc_level_at_least(kind, spacing));
      auto dirs = directions_from(nu, spacing);
      for (int N = cfg.N_min; N <= cfg.N_max; ++N) {
        const int k = cfg.m * N;
        for (const auto& kappa : cfg.kappa) {
          // δ^κ = 2^{-kκ} rounded down to a multiple of 2^-40, so a reported pass is never optimistic.
          double e = to_double(kappa) * k;
          Rational threshold(static_cast<long long>(std::floor(std::exp2(kThresholdBits - e))),
                             std::int64_t{1} << kThresholdBits);
          bool vacuous = threshold == 0;
          std::vector<std::size_t> counts;
          auto t0 = Clock::now();
          for (const auto& wd : dirs) {
            auto cover = vacuous ? CoverResult{} : greedy_min_cover(mu, wd.dir, k, threshold);
            counts.push_back(cover.count);
          }
          double wall = ms_since(t0);
          for (std::size_t i = 0; i < dirs.size(); ++i) {
            RowBuilder rb{"theorem_B", ps.id + "|" + as.id, inst.input_hash + as.spec,
                          {{"m", std::to_string(cfg.m)},
                           {"N", std::to_string(N)},
                           {"kappa", to_string(kappa)},
                           {"theta", dirs[i].dir.label()},
                           {"threshold", to_string(threshold)}}};
            rows.push_back(rb.integer("min_projection_count", static_cast<long long>(counts[i]), vacuous ? "warn" : "info",
                                      i == 0 ? wall : 0));
          }
          for (const auto& sl : cfg.s_lower) {
            // count >= δ^{-s̲} = 2^{k p/q}  <=>  count^q >= 2^{k p}.
            auto num = boost::multiprecision::numerator(sl), den = boost::multiprecision::denominator(sl);
            unsigned q = static_cast<unsigned>(den);
            BigInt target = BigInt(1) << static_cast<unsigned>(BigInt(k) * num);
            std::size_t passing = 0;
            for (auto c : counts)
              if (boost::multiprecision::pow(BigInt(c), q) >= target) ++passing;
            RowBuilder rb{"theorem_B", ps.id + "|" + as.id, inst.input_hash + as.spec,
                          {{"m", std::to_string(cfg.m)},
                           {"N", std::to_string(N)},
                           {"kappa", to_string(kappa)},
                           {"s_lower", to_string(sl)},
                           {"directions", std::to_string(dirs.size())}}};
            rows.push_back(rb.integer("passing_directions", static_cast<long long>(passing)));
            rows.push_back(rb.boolean("some_direction_passes", passing > 0, vacuous ? "warn" : "info"));
            if (vacuous) rows.push_back(rb.boolean("vacuous", true, "warn"));
          }
        }
      }
    }
  }
  return rows;
}

// ---- lemma suite -----------------------------------------------------------

namespace {

struct Suite {
  SuiteResult res;
  void add(ResultRow row) {
    if (row.status == "fail") {
      ++res.failures;
      res.witnesses.push_back(row.instance + " " + row.quantity + ": " + row.value);
    } else if (row.status == "warn") {
      ++res.warnings;
    }
    res.rows.push_back(std::move(row));
  }
  void tally(const RowBuilder& rb, const std::string& q, const IdentityTally& t, double wall) {
    add(rb.integer(q + "_samples", static_cast<long long>(t.samples), "info", wall));
    ResultRow r = rb.integer(q + "_failures", static_cast<long long>(t.failures), t.failures ? "fail" : "ok");
    if (t.failures) {
      ++res.failures;
      res.witnesses.push_back(rb.instance + " " + q + ": " + t.witness);
      res.rows.push_back(std::move(r));
    } else {
      res.rows.push_back(std::move(r));
    }
  }
  void warn_error(const RowBuilder& rb, const std::string& q, const std::exception& e) {
    add(rb.text(q, e.what(), "warn"));
  }
};

std::vector<DyadicInterval> random_small_set(std::mt19937_64& rng, const Rational& eps) {
  std::uniform_int_distribution<int> pick_level(4, 12), pick_mode(0, 2);
  int level = pick_level(rng);
  std::int64_t n = std::int64_t{1} << level;
  Rational budget = eps * n;  // intervals of this level allowed
  std::int64_t max_count = static_cast<std::int64_t>(floor_big(budget));
  std::vector<DyadicInterval> E;
  if (max_count == 0) return E;
  std::uniform_int_distribution<std::int64_t> pick_count(1, max_count), pick_idx(0, n - 1);
  std::int64_t count = pick_count(rng);
  std::vector<std::int64_t> idx;
  if (pick_mode(rng) == 0) {
    // Clustered: a run starting at a random position.
    std::int64_t start = pick_idx(rng);
    for (std::int64_t i = 0; i < count; ++i) idx.push_back((start + i) % n);
  } else {
    for (std::int64_t i = 0; i < count; ++i) idx.push_back(pick_idx(rng));
  }
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  for (auto i : idx) E.push_back({level, i});
  return E;
}

DeltaMeasure random_delta_measure(std::mt19937_64& rng, int level) {
  std::int64_t n = std::int64_t{1} << level;
  std::uniform_int_distribution<int> pick_size(1, 48), pick_w(1, 16);
  std::uniform_int_distribution<std::int64_t> pick_atom(0, n - 1);
  int size = pick_size(rng);
  std::vector<std::int64_t> atoms;
  for (int i = 0; i < size; ++i) atoms.push_back(pick_atom(rng));
  std::sort(atoms.begin(), atoms.end());
  atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
  std::vector<long> w;
  long total = 0;
  for (std::size_t i = 0; i < atoms.size(); ++i) w.push_back(pick_w(rng)), total += w.back();
  std::vector<Rational> weights;
  for (auto x : w) weights.push_back(Rational(x, total));
  return DeltaMeasure(level, atoms, weights);
}

}  // namespace

LemmaFuzzTally fuzz_interval_decomposition(std::size_t count, std::mt19937_64& rng) {
  LemmaFuzzTally t;
  const Rational eps_grid[] = {Rational(1, 16), Rational(1, 64)};
  const Rational C_grid[] = {Rational(2), Rational(4)};
  const Rational gamma_grid[] = {Rational(1, 4), Rational(1, 8)};
  for (std::size_t n = 0; n < count; ++n) {
    const Rational& eps = eps_grid[n % 2];
    const Rational& C = C_grid[(n / 2) % 2];
    const Rational& gamma = gamma_grid[(n / 4) % 2];
    auto E = random_small_set(rng, eps);
    auto dec = interval_decomposition(E, C, gamma, eps);
    ++t.runs;
    t.density_checks += dec.density_checks;
    bool ok = dec.holds_measure && dec.holds_density && dec.holds_length && dec.holds_audit;
    if (!ok && t.failures++ == 0) {
      std::ostringstream os;
      os << "eps=" << to_string(eps) << " C=" << to_string(C) << " gamma=" << to_string(gamma) << " |E|=" << E.size()
         << " measure=" << dec.holds_measure << " density=" << dec.holds_density << " length=" << dec.holds_length
         << " audit=" << dec.holds_audit;
      t.witness = os.str();
    }
  }
  return t;
}

SuiteResult run_lemma_suite(const ExperimentConfig& cfg) {
  Suite suite;
  std::mt19937_64 rng(cfg.seed);
  const int suite_level = std::min(cfg.m * cfg.N_max, 8);
  const ScaleLadder ladder{cfg.m, std::max(1, suite_level / cfg.m)};
  const auto dirs = lemma_directions();
  const std::size_t samples = static_cast<std::size_t>(cfg.samples);

  for (const auto& ps : cfg.planar) {
    auto t0 = Clock::now();
    CorpusInstance inst;
    RowBuilder rb{"lemmas", ps.id, "", {{"level", std::to_string(suite_level)}}};
    CorpusInstance reg;
    try {
      reg = build_instance(ps, kRegularityLevel, true);
    } catch (const HypothesisError& e) {
      suite.warn_error(rb, "ahlfors_certificate", e);
      continue;
    }
    RowBuilder rbr{"lemmas", ps.id, reg.input_hash,
                   {{"level", std::to_string(reg.data.set.level())}, {"s", to_string(reg.s)}}};
    suite.add(rbr.rational("ahlfors_C", reg.C, "info", ms_since(t0)));
    inst = build_instance(ps, suite_level, false);
    inst.C = reg.C;
    rb.input_hash = inst.input_hash;
    rb.params = {{"level", std::to_string(inst.data.set.level())}, {"s", to_string(inst.s)}};

    t0 = Clock::now();
    suite.tally(rb, "rescaling_identity", check_rescaling_identity(inst, samples, rng), ms_since(t0));
    t0 = Clock::now();
    suite.tally(rb, "renormalize_chain", check_renormalize_chain(inst, samples, rng), ms_since(t0));
    t0 = Clock::now();
    {
      auto mono = check_monotonicity_inclusions(inst, dirs);
      suite.tally(rb, "monotonicity_inclusions", mono, ms_since(t0));
      suite.add(rb.integer("cell_trade_2C-1_failures", static_cast<long long>(mono.secondary_failures)));
    }

    t0 = Clock::now();
    suite.tally(rbr, "renormalized_regularity", check_renormalized_regularity(reg, std::min<std::size_t>(samples, 50), rng),
                ms_since(t0));

    // Entropy identities.
    t0 = Clock::now();
    {
      const GridMeasure& mu = inst.data.measure;
      auto prof = entropy_profile(mu, PartitionLadder::from(ladder));
      bool ok = prof.chain_rule_error <= 1e-12;
      suite.add(rb.real("entropy_chain_rule_error", prof.chain_rule_error, ok ? "ok" : "fail", ms_since(t0)));
      std::uniform_int_distribution<int> pick_w(1, 8);
      std::vector<Rational> w;
      for (std::size_t i = 0; i < mu.size(); ++i) w.push_back(Rational(pick_w(rng)));
      GridMeasure nu = GridMeasure(mu.support(), w).normalized();
      double tele = kl_divergence(nu, mu, ladder.level(0));
      for (int j = 0; j < ladder.N; ++j) tele += kl_conditional(nu, mu, ladder.level(j + 1), ladder.level(j));
      double direct = kl_divergence(nu, mu, ladder.delta_level());
      double err = std::fabs(direct - tele);
      suite.add(rb.real("kl_telescoping_error", err, err <= 1e-12 ? "ok" : "fail"));
      suite.add(rb.real("kl_divergence", direct, direct >= 0 ? "ok" : "fail"));
      std::uniform_int_distribution<int> coin(0, 1);
      IdentityTally partial;
      for (int j = 1; j <= ladder.N; ++j) {
        GridSet parts = coarsen(mu.support(), ladder.level(j));
        std::vector<Coord> pick;
        for (auto& c : parts.cells())
          if (coin(rng)) pick.push_back(c);
        if (pick.empty()) continue;
        auto rep = kl_partial_sum(nu, mu, GridSet(parts.level(), pick, parts.window()));
        ++partial.samples;
        if (!rep.holds && partial.failures++ == 0) partial.witness = "level " + std::to_string(ladder.level(j));
      }
      suite.tally(rb, "kl_partial_sum", partial, 0);
    }

    // Good scales and good cubes (regime-dependent).
    for (const auto& eps : cfg.eps) {
      RowBuilder rbe = rb;
      rbe.params.push_back({"eps", to_string(eps)});
      try {
        auto gs = good_scales(inst.data.set, ladder, to_double(inst.s), to_double(eps), 1.0);
        std::string st = gs.holds ? "ok" : (gs.in_regime ? "fail" : "warn");
        suite.add(rbe.boolean("good_scales", gs.holds, st));
      } catch (const HypothesisError& e) {
        suite.warn_error(rbe, "good_scales", e);
      }
      try {
        auto gc = good_cubes(inst.data.measure, cfg.m, inst.s, eps, Rational(16), inst.C);
        std::string st = gc.holds ? "ok" : (gc.in_regime ? "fail" : "warn");
        suite.add(rbe.boolean("good_cubes", gc.holds, st));
      } catch (const HypothesisError& e) {
        suite.warn_error(rbe, "good_cubes", e);
      }
    }

    // Constant-dependent multiplicity lemmas: searched constants are reported, not asserted.
    const Direction probe_dir = Direction::from_slope(Rational(1, 3));
    for (const auto& sigma0 : cfg.sigma0) {
      RowBuilder rbs = rb;
      rbs.params.push_back({"sigma0", to_string(sigma0)});
      rbs.params.push_back({"theta", probe_dir.label()});
      const int k = inst.data.set.level();
      double M = std::max(1.0, std::exp2(to_double(sigma0) * k));
      try {
        DecompositionParams p;
        p.M = M, p.N = M, p.delta_level = k, p.Delta_level = std::max(0, k - cfg.m), p.C_reg = inst.C;
        auto rep = check_mult_decomposition(inst.data.measure, inst.data.set, probe_dir, p, true);
        suite.add(rbs.real("decomposition_slack", to_double(rep.slack), rep.holds ? "ok" : "warn"));
        suite.add(rep.c_max ? rbs.rational("decomposition_c_max", *rep.c_max) : rbs.text("decomposition_c_max", "unbounded", "info"));
      } catch (const Error& e) {
        suite.warn_error(rbs, "decomposition", e);
      }
      try {
        GridSet F = set_intersection(high_mult_set(inst.data.set, probe_dir, M, ScalePairQuery{k, Rational(1)}),
                                     cells_in_ball(inst.data.set, Rational(1)));
        auto kappa = inst.data.measure.restrict_to(F).weight_sum();
        if (F.empty()) throw HypothesisError("hereditary_refine: high-multiplicity set is empty");
        auto hr = hereditary_refine(inst.data.measure, F, probe_dir, M, kappa, inst.C, Rational(1, 64), true);
        bool ok = hr.holds_mass && hr.holds_multiplicity;
        suite.add(rbs.boolean("hereditary_refine", ok, ok ? "ok" : "warn"));
        if (hr.c_max) suite.add(rbs.real("hereditary_c_max", *hr.c_max));
      } catch (const Error& e) {
        suite.warn_error(rbs, "hereditary_refine", e);
      }
      try {
        std::vector<int> partition;
        for (int j = 0; j <= ladder.N; ++j) partition.push_back(j);
        auto fe = check_fiber_entropy_bound(cells_in_ball(inst.data.set, Rational(1)), probe_dir, ladder, partition,
                                            to_double(sigma0), 1.0);
        suite.add(rbs.real("fiber_entropy_C_min", fe.C_min, fe.holds ? "ok" : "warn"));
      } catch (const Error& e) {
        suite.warn_error(rbs, "fiber_entropy", e);
      }
    }

    // Projection branching lower bound: report-only outside its regime.
    for (const auto& eps : cfg.eps) {
      RowBuilder rbw = rb;
      Rational sigma = inst.s / 2;
      rbw.params.push_back({"eps", to_string(eps)});
      rbw.params.push_back({"sigma", to_string(sigma)});
      try {
        auto w = branching_lower_bound_witness(inst.data.set, probe_dir, ladder, to_double(inst.s), to_double(sigma),
                                               to_double(eps), 1.0);
        suite.add(rbw.integer("witness_good_levels", static_cast<long long>(w.G.size())));
        std::string st = w.holds ? "ok" : (w.in_regime ? "fail" : "warn");
        suite.add(rbw.boolean("witness_bound", w.holds, st));
        if (!w.in_regime) suite.add(rbw.text("witness_regime", w.regime_condition, "info"));
      } catch (const HypothesisError& e) {
        suite.warn_error(rbw, "witness_bound", e);
      }
    }
  }

  // Interval decomposition fuzz.
  {
    auto t0 = Clock::now();
    RowBuilder rb{"lemmas", "interval_fuzz", "fuzz", {{"seed", std::to_string(cfg.seed)}}};
    auto t = fuzz_interval_decomposition(std::max<std::size_t>(samples, 1), rng);
    suite.tally(rb, "interval_decomposition", IdentityTally{t.runs, t.failures, t.witness}, ms_since(t0));
  }

  // Branching-scale finder on every arc measure.
  for (const auto& as : cfg.arcs) {
    ArcKind kind = parse_arc_kind(as.spec);
    for (int k : {8, 12}) {
      int level = arc_level_at_least(kind, k);
      if (level != k) continue;
      ArcMeasure nu = generate_arc_measure(kind, level);
      for (const auto& tau : cfg.tau) {
        Rational eta = tau * 15 / 32;  // just below the admissible tau (d - 1) / 2 with d = 2
        RowBuilder rb{"lemmas", as.id, fnv1a_hex(as.spec),
                      {{"delta_level", std::to_string(k)}, {"tau", to_string(tau)}, {"eta", to_string(eta)}}};
        auto t0 = Clock::now();
        try {
          auto cert = branching_scale_finder(nu, k, Rational(2), tau, eta);
          auto [mass_ok, ratio_ok] = verify_scale_certificate(nu, cert);
          bool ok = cert.holds_mass && cert.holds_ratio && mass_ok && ratio_ok;
          suite.add(rb.rational("scale_finder_mass_G", cert.mass_G, ok ? "ok" : "fail", ms_since(t0)));
          suite.add(rb.rational("scale_finder_p", cert.p));
        } catch (const HypothesisError& e) {
          suite.warn_error(rb, "scale_finder", e);
        }
      }
    }
  }

  // δ-measure algebra and uniformisation.
  {
    auto t0 = Clock::now();
    RowBuilder rb{"lemmas", "delta_measures", "fuzz", {{"level", "10"}}};
    IdentityTally t;
    for (std::size_t n = 0; n < samples; ++n) {
      auto a = random_delta_measure(rng, 10), b = random_delta_measure(rng, 10);
      auto c = convolve(a, b);
      ++t.samples;
      bool ok = c.mass() == 1 && c.l2_squared() <= std::min(a.l2_squared(), b.l2_squared());
      if (!ok && t.failures++ == 0) t.witness = "pair " + std::to_string(n);
    }
    suite.tally(rb, "convolution", t, ms_since(t0));

    t0 = Clock::now();
    IdentityTally u;
    ScaleLadder ul{cfg.m, std::max(1, std::min(cfg.N_max, 10 / cfg.m))};
    std::uniform_int_distribution<std::int64_t> pick(0, (std::int64_t{1} << ul.delta_level()) - 1);
    std::uniform_int_distribution<int> pick_size(1, 200);
    for (std::size_t n = 0; n < samples; ++n) {
      std::vector<std::int64_t> pts;
      int size = pick_size(rng);
      for (int i = 0; i < size; ++i) pts.push_back(pick(rng));
      auto out = uniformize(ul, pts);
      ++u.samples;
      if (!branching_numbers(ul, out.set.points).uniform && u.failures++ == 0) u.witness = "set " + std::to_string(n);
    }
    suite.tally(rb, "uniformize", u, ms_since(t0));
  }
  return std::move(suite.res);
}

int run_experiment(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log) {
  std::filesystem::create_directories(out_dir);
  std::vector<ResultRow> rows;
  bool violation = false;
  for (const auto& probe : cfg.probes) {
    auto t0 = Clock::now();
    if (probe == "A") {
      auto r = run_theorem_A_probe(cfg);
      for (auto& x : r) violation = violation || x.status == "fail";
      rows.insert(rows.end(), r.begin(), r.end());
    } else if (probe == "B") {
      auto r = run_theorem_B_probe(cfg);
      rows.insert(rows.end(), r.begin(), r.end());
    } else if (probe == "lemmas") {
      auto s = run_lemma_suite(cfg);
      violation = violation || s.failures > 0;
      log << "lemma suite: " << s.rows.size() << " rows, " << s.failures << " failures, " << s.warnings
          << " warnings\n";
      for (auto& w : s.witnesses) log << "  violation: " << w << "\n";
      rows.insert(rows.end(), s.rows.begin(), s.rows.end());
    }
    log << "probe " << probe << " done in " << std::fixed << std::setprecision(1) << ms_since(t0) / 1000.0
        << std::defaultfloat << " s\n";
  }
  {
    std::ofstream csv(std::filesystem::path(out_dir) / "results.csv");
    write_csv(csv, rows);
    std::ofstream jl(std::filesystem::path(out_dir) / "results.jsonl");
    write_jsonl(jl, rows);
    std::ofstream c(std::filesystem::path(out_dir) / "config.txt");
    c << to_text(cfg);
  }
  log << rows.size() << " rows written to " << out_dir << "\n";
  return violation ? 1 : 0;
}

}  // namespace fraclab
