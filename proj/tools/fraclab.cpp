#include "fraclab/branching.hpp"
#include "fraclab/entropy.hpp"
#include "fraclab/errors.hpp"
#include "fraclab/fractal_gen.hpp"
#include "fraclab/grid_measure.hpp"
#include "fraclab/lab.hpp"
#include "fraclab/multiplicity.hpp"
#include "fraclab/projection.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace fraclab;

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return in;
}

// Measure files carry a `weights` section; plain set files get the uniform measure.
GridMeasure load_measure(const std::string& path) {
  auto in = open_in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  std::istringstream is(text);
  if (text.find("\nweights") != std::string::npos) return read_measure(is);
  return GridMeasure::uniform(read_text(is)).normalized();
}

GridSet load_set(const std::string& path) { return load_measure(path).support(); }

ArcMeasure load_arc(const std::string& what, int level) {
  if (std::filesystem::exists(what)) {
    auto in = open_in(what);
    return read_arc(in);
  }
  return generate_arc_measure(parse_arc_kind(what), level);
}

int scale_level(const std::string& text) { return dyadic_level_of(parse_rational(text)); }

Direction parse_direction(const std::string& text) { return Direction::from_slope(parse_rational(text)); }

void print_report(const std::string& name, const RegularityReport& r) {
  std::cout << name << ": " << (r.verdict ? "pass" : "fail") << " C_best=" << r.C_best << " tested=" << r.tested
            << " witness=(" << to_string(r.witness.center.x) << "," << to_string(r.witness.center.y)
            << ") r=" << to_string(r.witness.r) << " " << r.witness.kind << "\n";
}

bool certify(const GridMeasure& mu, const Rational& s, const Rational& C) {
  auto f = check_frostman(mu, s, C);
  auto u = check_upper_regular(mu.support(), s, C);
  auto a = check_ahlfors(mu, s, C);
  print_report("frostman", f);
  print_report("upper_regular", u);
  print_report("ahlfors", a);
  return f.verdict && u.verdict && a.verdict;
}

std::vector<std::int64_t> read_points(std::istream& in, int& level) {
  std::string line;
  bool head = false;
  std::vector<std::int64_t> pts;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    if (!head) {
      std::string kw;
      ls >> kw >> level;
      if (kw != "level" || ls.fail()) throw ParseError("expected 'level k' header");
      head = true;
      continue;
    }
    std::int64_t p;
    ls >> p;
    if (ls.fail()) throw ParseError("bad point line '" + line + "'");
    pts.push_back(p);
  }
  if (!head) throw ParseError("empty point file");
  return pts;
}

std::vector<DyadicInterval> read_intervals(std::istream& in) {
  std::vector<DyadicInterval> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    DyadicInterval I;
    ls >> I.level >> I.index;
    if (ls.fail()) throw ParseError("bad interval line '" + line + "' (expected 'level index')");
    out.push_back(I);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dyadic projection and multiplicity laboratory"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Build a digit-system set and its natural measure");
  std::string g_system, g_out;
  int g_depth = 0;
  std::vector<std::string> g_cert;
  gen->add_option("--system", g_system, "b=4;D=(0,0),(3,3);n=3")->required();
  gen->add_option("--depth", g_depth, "Override the depth n");
  gen->add_option("--out", g_out, "Measure file (stdout if omitted)");
  gen->add_option("--certify", g_cert, "Run the regularity checks at s C")->expected(2);

  auto* cert = app.add_subcommand("certify", "Frostman, upper-regular and Ahlfors checks of a measure file");
  std::string c_in, c_s, c_C;
  cert->add_option("--in", c_in)->required();
  cert->add_option("--s", c_s)->required();
  cert->add_option("--C", c_C)->required();

  auto* proj = app.add_subcommand("project", "Dyadic covering number of a projection");
  std::string p_in, p_scale;
  std::vector<std::string> p_slopes;
  proj->add_option("--in", p_in)->required();
  proj->add_option("--slope", p_slopes, "p/q, repeatable")->required();
  proj->add_option("--scale", p_scale, "2^-k")->required();

  auto* mult = app.add_subcommand("mult", "Multiplicity of fibers");
  std::string m_in, m_slope, m_lo, m_hi, m_field, m_x, m_y;
  mult->add_option("--in", m_in)->required();
  mult->add_option("--slope", m_slope)->required();
  mult->add_option("--lo", m_lo, "2^-a")->required();
  mult->add_option("--hi", m_hi, "2^-b or rational radius")->required();
  mult->add_option("--field", m_field, "CSV of values at cell centres");
  mult->add_option("--x", m_x);
  mult->add_option("--y", m_y);

  auto* iota = app.add_subcommand("iota", "Integral of high-multiplicity mass over directions");
  std::string i_mu, i_nu, i_sigma, i_delta;
  int i_spacing = -1;
  bool i_brute = false;
  iota->add_option("--mu", i_mu)->required();
  iota->add_option("--nu", i_nu, "arc measure file or arc spec")->required();
  iota->add_option("--sigma", i_sigma)->required();
  iota->add_option("--delta", i_delta, "2^-k")->required();
  iota->add_option("--spacing", i_spacing, "direction grid level (default ceil(k/2))");
  iota->add_flag("--bruteforce", i_brute, "Scan every cell per fiber");

  auto* ent = app.add_subcommand("entropy-scan", "Per-level entropy along a scale ladder");
  std::string e_mu, e_base;
  int e_depth = 1;
  ent->add_option("--mu", e_mu)->required();
  ent->add_option("--base", e_base, "2^-m")->required();
  ent->add_option("--depth", e_depth, "N")->required();

  auto* br = app.add_subcommand("branch", "Branching numbers of a 1-D point set");
  std::string b_set, b_base;
  bool b_uniformize = false;
  br->add_option("--set", b_set, "'level k' then one lattice index per line")->required();
  br->add_option("--base", b_base, "2^-m")->required();
  br->add_flag("--uniformize", b_uniformize);

  auto* l2 = app.add_subcommand("lemma2", "Interval decomposition of a small set E");
  std::string l_E, l_C, l_gamma, l_eps;
  l2->add_option("--E", l_E, "lines 'level index'")->required();
  l2->add_option("--C", l_C)->required();
  l2->add_option("--gamma", l_gamma)->required();
  l2->add_option("--eps", l_eps, "defaults to |E|");

  auto* sf = app.add_subcommand("scalefind", "Branching scale of a Frostman arc measure");
  std::string s_nu, s_delta, s_d = "2", s_tau, s_eta;
  sf->add_option("--nu", s_nu, "arc measure file or arc spec")->required();
  sf->add_option("--delta", s_delta, "2^-k")->required();
  sf->add_option("--dfrak", s_d);
  sf->add_option("--tau", s_tau)->required();
  sf->add_option("--eta", s_eta, "defaults to 15/32 tau (d - 1)");

  auto* run = app.add_subcommand("run", "Run an experiment configuration");
  std::string r_config, r_out;
  run->add_option("--config", r_config)->required();
  run->add_option("--out", r_out, "overrides [output] dir");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      DigitSystem sys = parse_digit_system(g_system);
      if (g_depth > 0) sys.depth = g_depth;
      auto inst = generate_planar(sys);
      if (g_out.empty()) {
        write_measure(std::cout, inst.measure);
      } else {
        std::ofstream out(g_out);
        write_measure(out, inst.measure);
        std::cerr << "wrote " << inst.set.size() << " cells at level " << inst.set.level() << " to " << g_out << "\n";
      }
      if (!g_cert.empty()) {
        bool ok = certify(inst.measure, parse_rational(g_cert[0]), parse_rational(g_cert[1]));
        return ok ? 0 : 1;
      }
    } else if (*cert) {
      return certify(load_measure(c_in), parse_rational(c_s), parse_rational(c_C)) ? 0 : 1;
    } else if (*proj) {
      GridSet F = load_set(p_in);
      int j = scale_level(p_scale);
      std::cout << "slope,scale,cover\n";
      for (auto& sl : p_slopes) {
        auto cover = project_cover(F, parse_direction(sl), j);
        std::cout << sl << "," << p_scale << "," << cover << "\n";
      }
    } else if (*mult) {
      GridSet K = load_set(m_in);
      ScalePairQuery q{scale_level(m_lo), parse_rational(m_hi)};
      Direction dir = parse_direction(m_slope);
      if (!m_x.empty() || !m_y.empty()) {
        Point x{parse_rational(m_x.empty() ? "0" : m_x), parse_rational(m_y.empty() ? "0" : m_y)};
        std::cout << multiplicity_at(K, dir, x, q) << "\n";
      }
      if (!m_field.empty() || (m_x.empty() && m_y.empty())) {
        auto field = multiplicity_field(K, dir, q);
        long mx = 0;
        for (auto v : field.values) mx = std::max(mx, v);
        if (!m_field.empty()) {
          std::ofstream out(m_field);
          out << "x,y,multiplicity\n";
          for (std::size_t i = 0; i < field.values.size(); ++i) {
            auto c = K.center(K.cells()[i]);
            out << to_string(c.x) << "," << to_string(c.y) << "," << field.values[i] << "\n";
          }
        }
        std::cout << "cells=" << field.values.size() << " max_multiplicity=" << mx << "\n";
      }
    } else if (*iota) {
      auto mu = load_measure(i_mu);
      int k = scale_level(i_delta);
      int spacing = i_spacing > 0 ? i_spacing : (k + 1) / 2;
      auto nu = load_arc(i_nu, spacing);
      auto r = iota_integrand(mu, nu, to_double(parse_rational(i_sigma)), k, spacing, i_brute);
      std::cout << "iota=" << to_string(r.value) << " (" << r.value_double << ") upper=" << to_string(r.upper_bound)
                << " directions=" << r.terms.size() << "\n";
    } else if (*ent) {
      auto mu = load_measure(e_mu).normalized();
      ScaleLadder ladder{scale_level(e_base), e_depth};
      auto prof = entropy_profile(mu, PartitionLadder::from(ladder));
      std::cout << "j,level,entropy,conditional,parts\n";
      for (std::size_t j = 0; j < prof.entropy.size(); ++j) {
        std::cout << j << "," << prof.ladder.levels[j] << "," << prof.entropy[j] << ",";
        if (j + 1 < prof.entropy.size()) std::cout << prof.conditional[j];
        std::cout << "," << prof.parts[j] << "\n";
      }
      std::cerr << "chain rule error " << prof.chain_rule_error << "\n";
    } else if (*br) {
      auto in = open_in(b_set);
      int level = 0;
      auto pts = read_points(in, level);
      int m = scale_level(b_base);
      if (m < 1 || level % m != 0) throw ParseError("point level must be a multiple of m");
      ScaleLadder ladder{m, level / m};
      if (b_uniformize) {
        auto u = uniformize(ladder, pts);
        std::cerr << "kept " << u.set.points.size() << " of " << pts.size() << " points\n";
        pts = u.set.points;
        std::cout << "level " << level << "\n";
        for (auto p : pts) std::cout << p << "\n";
      }
      auto rep = branching_numbers(ladder, pts);
      std::cerr << (rep.uniform ? "uniform" : "not uniform") << "; R =";
      for (auto r : rep.R) std::cerr << " " << r;
      if (!rep.uniform)
        std::cerr << "; level " << rep.violation_level << " interval " << rep.violation_interval << " has " << rep.found
                  << " children, expected " << rep.expected;
      std::cerr << "\n";
      return rep.uniform ? 0 : 1;
    } else if (*l2) {
      auto in = open_in(l_E);
      auto E = read_intervals(in);
      Rational measure = 0;
      for (auto& I : E) measure += I.length();
      Rational eps = l_eps.empty() ? measure : parse_rational(l_eps);
      auto d = interval_decomposition(E, parse_rational(l_C), parse_rational(l_gamma), eps);
      std::cout << "n=" << d.n_steps << " rho=2^-" << d.rho_level << " |G|=" << to_string(d.measure_G)
                << " G=" << d.G.size() << " B=" << d.B.size() << " S=" << d.S.size() << " T=" << d.T.size()
                << " density_checks=" << d.density_checks << " worst_density=" << to_string(d.worst_density) << "\n";
      std::cout << "measure " << d.holds_measure << " density " << d.holds_density << " length " << d.holds_length
                << " audit " << d.holds_audit << "\n";
      return d.holds_measure && d.holds_density && d.holds_length && d.holds_audit ? 0 : 1;
    } else if (*sf) {
      int k = scale_level(s_delta);
      auto nu = load_arc(s_nu, k);
      Rational d = parse_rational(s_d), tau = parse_rational(s_tau);
      Rational eta = s_eta.empty() ? tau * (d - 1) * 15 / 32 : parse_rational(s_eta);
      auto c = branching_scale_finder(nu, k, d, tau, eta);
      auto [mass_ok, ratio_ok] = verify_scale_certificate(nu, c);
      std::cout << "n=" << c.numbers.n << " j=" << c.j << " p=" << to_string(c.p) << " levels=";
      for (std::size_t i = 0; i < c.levels.size(); ++i) std::cout << (i ? "," : "") << c.levels[i];
      std::cout << " nu(G)=" << to_string(c.mass_G) << " bound=" << to_string(c.mass_bound)
                << " pairs=" << c.pairs_checked << " worst_log2_ratio=" << c.worst_ratio_log2 << "\n";
      std::cout << "mass " << (c.holds_mass && mass_ok) << " ratio " << (c.holds_ratio && ratio_ok) << "\n";
      return c.holds_mass && c.holds_ratio && mass_ok && ratio_ok ? 0 : 1;
    } else if (*run) {
      ExperimentConfig cfg;
      try {
        cfg = load_config(r_config);
      } catch (const ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
      }
      return run_experiment(cfg, r_out.empty() ? cfg.out_dir : r_out, std::cerr);
    }
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const HypothesisError& e) {
    std::cerr << "hypothesis not satisfied: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
