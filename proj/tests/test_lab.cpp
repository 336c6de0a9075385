#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fraclab/errors.hpp"
#include "fraclab/lab.hpp"
#include "fraclab/multiplicity.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fraclab;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

std::string param(const ResultRow& r, const std::string& key) {
  for (const auto& [k, v] : r.params)
    if (k == key) return v;
  return {};
}

std::size_t subset_min(const std::vector<Rational>& mass, const Rational& m) {
  std::size_t n = mass.size(), best = n + 1;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    Rational s = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1) s += mass[i];
    if (s >= m) best = std::min<std::size_t>(best, std::size_t(__builtin_popcount(mask)));
  }
  return best;
}

ExperimentConfig small_config() {
  ExperimentConfig cfg = default_config();
  cfg.planar = {{"four_corner", "b=4;D=(0,0),(0,3),(3,0),(3,3)"}};
  cfg.arcs = {{"uniform", "uniform"}};
  cfg.N_min = 2;
  cfg.N_max = 3;
  return cfg;
}

}  // namespace

TEST_CASE("config parsing") {
  auto cfg = parse("schema = 1\n[ladder]\nm = 3\nN = 2..4\n[grid]\nkappa = 1/4, 0.5\n[run]\nprobes = A, B\n");
  CHECK(cfg.m == 3);
  CHECK(cfg.N_min == 2);
  CHECK(cfg.N_max == 4);
  CHECK(cfg.kappa == std::vector<Rational>{Rational(1, 4), Rational(1, 2)});
  CHECK(cfg.probes == std::vector<std::string>{"A", "B"});
  CHECK(cfg.planar.size() == default_planar_corpus().size());
  CHECK(cfg.sigma_frac == std::vector<Rational>{Rational(1, 2)});

  CHECK_THROWS_AS(parse("[ladder]\nm = 2\n"), ParseError);
  CHECK_THROWS_AS(parse("schema = 2\n"), ParseError);
  CHECK_THROWS_AS(parse("schema = 1\n[ladders]\n"), ParseError);
  CHECK_THROWS_AS(parse("schema = 1\n[ladder]\nq = 1\n"), ParseError);
  CHECK_THROWS_AS(parse("schema = 1\n[ladder]\nm = 5\nN = 2..5\n"), ParseError);
  CHECK_THROWS_AS(parse("schema = 1\n[grid]\ntau = one\n"), ParseError);
  CHECK_THROWS_AS(parse("schema = 1\n[corpus]\nplanar = x: b=4;D=(9,9)\n"), ParseError);
  CHECK_THROWS_AS(parse("schema = 1\n[run]\nprobes = C\n"), ParseError);
  CHECK_THROWS_AS(load_config("/nonexistent/fraclab.cfg"), ParseError);
}

TEST_CASE("config text roundtrip") {
  auto cfg = default_config();
  cfg.direction_spacing = 5;
  cfg.sigma = {Rational(1, 3)};
  auto back = parse(to_text(cfg));
  CHECK(to_text(back) == to_text(cfg));
  CHECK(back.direction_spacing == 5);
  REQUIRE(back.arcs.size() == 2);
  CHECK(back.arcs[1].id == "cantor");
  CHECK(back.arcs[1].spec == "cantor:b=4;D=0,3");
  auto bare = parse("schema = 1\n[corpus]\narc = cantor:b=4;D=0,3\narc = u: uniform\n");
  CHECK(bare.arcs[0].id == bare.arcs[0].spec);
  CHECK(bare.arcs[1].id == "u");
}

TEST_CASE("csv and jsonl keep rationals exact") {
  ResultRow r{"lemmas", "inst,1", {{"C", "2"}, {"eps", "1/16"}}, "mass", "3/4", "rational", "ok", "", 1.5};
  r.certificate = certificate_hash("abc", r);
  ResultRow i{"lemmas", "inst", {}, "count", "12", "integer", "info", "", 0};
  std::ostringstream csv, jl;
  write_csv(csv, {r, i});
  write_jsonl(jl, {r, i});
  std::istringstream lines(csv.str());
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  CHECK(header == "probe,instance,params,quantity,value,kind,status,certificate,wall_ms");
  CHECK(first.find("\"inst,1\"") != std::string::npos);
  CHECK(first.find(",3/4,rational,") != std::string::npos);
  CHECK(first.find("C=2;eps=1/16") != std::string::npos);

  std::istringstream js(jl.str());
  std::string line;
  std::getline(js, line);
  auto j = nlohmann::json::parse(line);
  CHECK(j["value"] == "3/4");
  CHECK(j["params"]["eps"] == "1/16");
  CHECK(j["certificate"] == r.certificate);
  std::getline(js, line);
  CHECK(nlohmann::json::parse(line)["value"] == 12);

  // Wall time does not enter the certificate.
  ResultRow r2 = r;
  r2.wall_ms = 99;
  CHECK(certificate_hash("abc", r2) == r.certificate);
  r2.value = "1/2";
  CHECK(certificate_hash("abc", r2) != r.certificate);
}

TEST_CASE("probes are deterministic") {
  auto cfg = small_config();
  auto a = run_theorem_A_probe(cfg), b = run_theorem_A_probe(cfg);
  REQUIRE(a.size() == b.size());
  REQUIRE_FALSE(a.empty());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].value == b[i].value);
    CHECK(a[i].params == b[i].params);
    CHECK(a[i].certificate == b[i].certificate);
    CHECK(a[i].status != "fail");
  }
  auto c = run_theorem_B_probe(cfg), d = run_theorem_B_probe(cfg);
  REQUIRE(c.size() == d.size());
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i].certificate == d[i].certificate);
}

TEST_CASE("vacuous kappa is flagged") {
  auto cfg = small_config();
  cfg.kappa = {Rational(100)};
  auto rows = run_theorem_B_probe(cfg);
  bool flagged = false;
  for (const auto& r : rows)
    if (r.quantity == "vacuous") {
      flagged = true;
      CHECK(r.status == "warn");
    }
  CHECK(flagged);
}

TEST_CASE("axis-aligned product cover equals the factor count") {
  for (int N : {2, 3, 4}) {
    auto inst = build_instance({"four_corner", "b=4;D=(0,0),(0,3),(3,0),(3,3)"}, 2 * N, false);
    auto c = greedy_min_cover(inst.data.measure, Direction::from_slope(Rational(0)), 2 * N, Rational(1));
    CHECK(c.count == std::size_t(1) << N);
    auto v = greedy_min_cover(inst.data.measure, Direction::from_vector(Rational(0), Rational(1)), 2 * N, Rational(1));
    CHECK(v.count == std::size_t(1) << N);
  }
}

TEST_CASE("four-corner has a passing direction and matches the subset oracle") {
  auto cfg = small_config();
  cfg.N_min = 2;
  cfg.N_max = 4;
  cfg.kappa = {Rational(3, 10)};
  cfg.s_lower = {Rational(1, 2)};
  auto rows = run_theorem_B_probe(cfg);
  bool passes = false;
  for (const auto& r : rows)
    if (r.quantity == "some_direction_passes" && param(r, "N") == "4") passes = r.value == "true";
  CHECK(passes);

  // delta = 2^-4: every reported count is the exhaustive subset minimum.
  auto inst = build_instance(cfg.planar[0], 2 * cfg.N_max, false);
  GridMeasure mu = inst.data.measure.restrict_to(cells_in_ball(inst.data.set, Rational(1)));
  std::size_t checked = 0;
  for (const auto& r : rows) {
    if (r.quantity != "min_projection_count" || param(r, "N") != "2") continue;
    auto theta = parse_rational(param(r, "theta").substr(6));
    auto threshold = parse_rational(param(r, "threshold"));
    auto td = tube_decompose(mu, Direction::from_slope(theta), 4);
    std::vector<Rational> mass;
    for (const auto& t : td.tubes) mass.push_back(t.mass);
    REQUIRE(mass.size() <= 20);
    CHECK(std::stoul(r.value) == subset_min(mass, threshold));
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("run writes result files") {
  auto cfg = small_config();
  cfg.probes = {"A"};
  auto dir = std::filesystem::temp_directory_path() / "fraclab-test-run";
  std::filesystem::remove_all(dir);
  std::ostringstream log;
  CHECK(run_experiment(cfg, dir.string(), log) == 0);
  CHECK(std::filesystem::exists(dir / "results.csv"));
  CHECK(std::filesystem::exists(dir / "results.jsonl"));
  std::ifstream cfgfile(dir / "config.txt");
  std::stringstream text;
  text << cfgfile.rdbuf();
  CHECK(to_text(parse(text.str())) == to_text(cfg));
  std::filesystem::remove_all(dir);
}
