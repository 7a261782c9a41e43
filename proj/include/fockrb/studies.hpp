#pragma once

// Study pipelines behind the command-line tool. Each study reads its
// parameters from a Config and returns a JSON report, named CSV tables and
// an overall verdict.

#include <algorithm>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fockrb/casestudies.hpp"
#include "fockrb/config.hpp"
#include "fockrb/csv.hpp"
#include "fockrb/moments.hpp"
#include "fockrb/rieszlab.hpp"

namespace fockrb {

struct StudyContext {
  unsigned threads = 1;
  std::uint64_t seed = 1;
};

struct CsvTable {
  std::string name;  // file name, e.g. "circulant.csv"
  std::string body;
};

struct StudyResult {
  nlohmann::json report;
  std::vector<CsvTable> tables;
  bool pass = false;
};

struct StudyInfo {
  std::string name;
  std::string parameters;
  std::string runtime;
  std::string summary;
};

namespace detail {

class TableBuilder {
 public:
  explicit TableBuilder(std::vector<std::string> header) : w_(os_) { w_.row(header); }
  void row(const std::vector<double>& v) {
    std::vector<std::string> s;
    for (double x : v) s.push_back(csv::format_double(x));
    w_.row(s);
  }
  void row(const std::vector<std::string>& v) { w_.row(v); }
  CsvTable done(std::string name) { return {std::move(name), os_.str()}; }

 private:
  std::ostringstream os_;
  csv::Writer w_;
};

inline nlohmann::json finite_or_string(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline StudyResult run_circulant(const Config& c, const StudyContext&) {
  const int n_max = c.integer("size.n_max", 64);
  if (n_max < 3) throw ConfigError(c.source(), c.line_of("size.n_max"), "size.n_max must be >= 3");
  const double tol = c.tolerance("tolerance.eig", 1e-10);
  StudyResult r;
  detail::TableBuilder t({"n", "opnorm", "opnorm_exact", "max_eig_error"});
  bool ok = true;
  nlohmann::json rows = nlohmann::json::array();
  for (int n = 1; n <= n_max; ++n) {
    auto a = circulant_analysis(n);
    ok = ok && a.max_eig_error <= tol;
    t.row({std::to_string(n), csv::format_double(a.opnorm), a.opnorm_exact.str(),
           csv::format_double(a.max_eig_error)});
    rows.push_back({{"n", n}, {"opnorm", a.opnorm}, {"opnorm_exact", a.opnorm_exact.str()},
                    {"max_eig_error", a.max_eig_error}});
  }
  const auto n2 = circulant_analysis(2).opnorm_exact, n3 = circulant_analysis(3).opnorm_exact;
  const bool exact = n2 == Rational::make(7, 5) && n3 == Rational::make(11, 8);
  r.report = {{"n_max", n_max},
              {"rows", rows},
              {"opnorm_n2", n2.str()},
              {"opnorm_n3", n3.str()},
              {"checks", {{"dense_matches_formula", ok}, {"exact_small_cases", exact}}}};
  r.tables.push_back(t.done("circulant.csv"));
  r.pass = ok && exact;
  return r;
}

inline StudyResult run_moments(const Config& c, const StudyContext& ctx) {
  Weight w = weight_from_config(c, "log-power", 2.0);
  const int N = c.integer("size.N", 40);
  const double tol = c.tolerance("tolerance.rel_tol", 1e-12);
  auto tab = build_table(w, N, tol, ctx.threads);
  StudyResult r;
  std::ostringstream os;
  write_moments_csv(os, tab);
  r.tables.push_back({"moments.csv", os.str()});
  r.report["weight"] = w.label();
  r.report["N"] = N;
  nlohmann::json checks;
  bool pass = true;
  if (w.family() == Family::power_exponent && w.parameter() == 2.0) {
    double worst = 0.0;
    for (int n = 0; n <= N; ++n) {
      double exact = std::log(kPi) + std::lgamma(n + 1.0);
      worst = std::max(worst, std::fabs(tab.log_m(n) - exact) / std::max(1.0, std::fabs(exact)));
    }
    checks["gaussian_closed_form_max_rel_error"] = worst;
    pass = worst <= 1e-8;
  } else if (!tab.y.empty()) {
    try {
      auto lc = laplace_check(tab, std::min(10, N / 2), N);
      checks["laplace_spread"] = lc.spread;
      checks["laplace_oscillation"] = lc.oscillation;
      pass = lc.spread <= 20.0;
    } catch (const PreconditionError& e) {
      checks["laplace_skipped"] = e.what();
    }
  }
  r.report["checks"] = checks;
  r.pass = pass;
  return r;
}

inline StudyResult run_gram(const Config& c, const StudyContext& ctx) {
  Weight w = weight_from_config(c, "log-power", 2.0);
  PointSet ps;
  const std::string file = c.str("size.points_file", "");
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw ConfigError(c.source(), c.line_of("size.points_file"), "cannot open " + file);
    ps = read_points_csv(in, file);
  } else {
    const int N = c.integer("size.N", 25);
    for (double y : laplace_points(w, N - 1)) ps.add(Point{y, 0.0});
    ps.label = "Laplace points";
  }
  if (ps.size() == 0) throw ConfigError(c.source(), 0, "gram: empty point set");
  std::vector<int> def;
  for (std::size_t k = 5; k < ps.size(); k += 5) def.push_back(static_cast<int>(k));
  def.push_back(static_cast<int>(ps.size()));
  auto sizes_i = c.integers("size.sections", def);
  std::vector<std::size_t> sizes(sizes_i.begin(), sizes_i.end());
  double lr_max = -std::numeric_limits<double>::infinity();
  for (const auto& p : ps.points()) lr_max = std::max(lr_max, p.logr);
  auto tab = detail::table_for_radius(w, lr_max);
  auto G = assemble_kernel_gram(tab, ps, ctx.threads);
  auto rep = nested_sections(G, sizes);
  StudyResult r;
  std::ostringstream e, s;
  write_gram_csv(e, s, G);
  r.tables.push_back({"gram.csv", e.str()});
  r.tables.push_back({"gram_scales.csv", s.str()});
  detail::TableBuilder t({"size", "lambda_min", "lambda_max", "condition"});
  for (std::size_t i = 0; i < rep.section_sizes.size(); ++i)
    t.row({double(rep.section_sizes[i]), rep.section_min[i], rep.section_max[i], rep.section_condition[i]});
  r.tables.push_back(t.done("gram_sections.csv"));
  r.report = {{"weight", w.label()}, {"points", ps.size()}, {"max_truncation", G.max_truncation},
              {"riesz", to_json(rep)}};
  r.pass = rep.interlacing_ok;
  return r;
}

inline StudyResult run_t1_obstruction(const Config& c, const StudyContext& ctx) {
  Weight w = weight_from_config(c, "power", 2.0);
  const double A = c.real("size.A", 8.0);
  const double beta = c.real("size.beta", 1.0);
  const double rho = c.real("size.rho", 1.0);
  const double center = c.real("size.center", 1000.0);
  const auto widths = c.integers("size.widths", {4, 8, 16, 32});
  if (!(beta > 0) || !(rho > 0)) throw ConfigError(c.source(), 0, "size.beta and size.rho must be positive");
  const int Nmax = *std::max_element(widths.begin(), widths.end());
  auto ps = square_lattice({center, 0.0}, beta * rho, (Nmax + 2) * rho);
  auto scan = obstruction_scan(ps, {center, 0.0}, rho, widths, 0.3, ctx.threads);
  auto q = build_Q(w, A, 0.0, 33, 64, static_cast<unsigned>(ctx.seed));
  StudyResult r;
  detail::TableBuilder t({"N", "inf", "argmin_re", "argmin_im", "comparison", "grid_points"});
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& o : scan.rows) {
    t.row({double(o.N), o.inf_value, o.argmin.real(), o.argmin.imag(), o.comparison, double(o.grid_points)});
    rows.push_back({{"N", o.N}, {"inf", o.inf_value}, {"comparison", detail::finite_or_string(o.comparison)}});
  }
  r.tables.push_back(t.done("obstruction.csv"));
  r.report = {{"weight", w.label()},
              {"obstruction", {{"rows", rows},
                               {"slope", scan.fit.slope},
                               {"intercept", scan.fit.intercept},
                               {"r2", scan.fit.r2},
                               {"pass", scan.pass}}},
              {"build_Q", {{"R", q.R},
                           {"rho", q.rho},
                           {"k", q.k},
                           {"blocks", q.P.factors.size()},
                           {"M", q.M()},
                           {"log_M", {q.log_M_ratio, q.log_M_growth, q.log_M_gap, q.log_M_cover}},
                           {"B", q.B},
                           {"min_gap_over_rho", q.min_gap_over_rho},
                           {"zeros_in_2A", q.zeros_in_2A},
                           {"samples", q.samples}}}};
  r.pass = scan.pass && q.zeros_in_2A && q.M() <= 100.0;
  return r;
}

inline StudyResult run_t2_chain(const Config& c, const StudyContext& ctx) {
  Weight w = weight_from_config(c, "square", 2.0);
  const int N = c.integer("size.N", 25);
  const double delta = c.real("size.delta", 0.1);
  const auto sec = c.integers("size.sections", {15, 25});
  const double plateau = c.tolerance("tolerance.plateau", 0.25);
  const double stability = c.tolerance("tolerance.stability", 0.2);
  auto st = t2_chain_stability(w, N, stability, delta, ctx.threads);
  std::vector<std::size_t> sizes(sec.begin(), sec.end());
  auto sections = t2_sections(w, sizes, plateau, ctx.threads);
  StudyResult r;
  detail::TableBuilder t({"n", "y", "log_v", "b", "c", "d", "e", "et1", "et2", "et3", "es2"});
  for (const auto& row : st.base.rows)
    t.row({double(row.n), row.y, row.log_v, row.b, row.c, row.d, row.e, row.et1, row.et2, row.et3, row.es2});
  r.tables.push_back(t.done("t2_chain.csv"));
  detail::TableBuilder s({"size", "lambda_min", "lambda_max", "condition"});
  for (std::size_t i = 0; i < sections.nested.section_sizes.size(); ++i)
    s.row({double(sections.nested.section_sizes[i]), sections.nested.section_min[i],
           sections.nested.section_max[i], sections.nested.section_condition[i]});
  r.tables.push_back(s.done("t2_sections.csv"));
  auto consts = [](const T2ChainReport& x) {
    return nlohmann::json{{"et1", x.et1_max}, {"et2", x.et2_max}, {"et3", x.et3_max}, {"de_max", x.de_max},
                          {"es2_spread", x.es2_spread}, {"pass", x.pass}};
  };
  r.report = {{"weight", w.label()},
              {"N", N},
              {"delta", delta},
              {"constants_N", consts(st.base)},
              {"constants_2N", consts(st.doubled)},
              {"changes", {st.et1_change, st.et2_change, st.et3_change}},
              {"E_vs_ell", {st.base.E_vs_ell_lo, st.base.E_vs_ell_hi}},
              {"sections", {{"sizes", sections.nested.section_sizes},
                            {"condition", sections.nested.section_condition},
                            {"plateau_ratio", sections.plateau_ratio},
                            {"interlacing_ok", sections.nested.interlacing_ok},
                            {"pass", sections.pass}}},
              {"stability_pass", st.pass}};
  r.pass = st.pass && sections.pass;
  return r;
}

inline StudyResult run_t3_suite(const Config& c, const StudyContext&) {
  const int depth = c.integer("size.depth", 5);
  if (depth < 3) throw ConfigError(c.source(), c.line_of("size.depth"), "size.depth must be >= 3");
  auto R = LacunarySequence::squaring(depth);
  Weight w = theorem3_weight(R);
  auto g = t3_product(R, depth);
  auto tab = detail::table_for_radius(w, R.logR.back(), static_cast<int>(g.degree()) + 2);
  auto blocks = block_norm_scan(g, tab, 1, depth);
  std::vector<double> circles;
  for (int n = 1; n <= depth; ++n) circles.push_back(n);
  auto exy = kernel_norm_diagnostics(tab, w, NormMode::exy, circles);
  auto db = debranges_ratio(g, tab, 3, depth);
  double dev = 0.0;
  for (const auto& row : db.rows) dev = std::max(dev, row.real_axis_deviation);
  StudyResult r;
  detail::TableBuilder b({"n", "log_norm_B", "norm_B_times_R"});
  for (std::size_t i = 0; i < blocks.n.size(); ++i)
    b.row({double(blocks.n[i]), blocks.log_norm[i], blocks.norm_times_R[i]});
  r.tables.push_back(b.done("t3_blocks.csv"));
  detail::TableBuilder e({"n", "logr", "ratio"});
  for (std::size_t i = 0; i < exy.at.size(); ++i) e.row({exy.at[i], exy.logr[i], exy.ratio[i]});
  r.tables.push_back(e.done("t3_exy.csv"));
  detail::TableBuilder d({"n", "log_norm_E", "log_norm_f", "Q", "real_axis_deviation"});
  for (const auto& row : db.rows) d.row({double(row.n), row.log_norm_E, row.log_norm_f, row.Q, row.real_axis_deviation});
  r.tables.push_back(d.done("t3_debranges.csv"));
  nlohmann::json Q = nlohmann::json::array();
  for (const auto& row : db.rows) Q.push_back(row.Q);
  r.report = {{"depth", depth},
              {"degree", g.degree()},
              {"block_norms", {{"spread", blocks.spread}, {"hermitian", blocks.hermitian}, {"pass", blocks.pass}}},
              {"exy", {{"spread", exy.spread}, {"trend", exy.trend}, {"pass", exy.pass}}},
              {"debranges", {{"Q", Q}, {"increasing", db.increasing}, {"max_real_axis_deviation", dev}}}};
  r.pass = blocks.pass && exy.pass && db.increasing && dev <= 1e-6;
  return r;
}

inline StudyResult run_convexity(const Config& c, const StudyContext&) {
  const auto t = c.integers("size.t", {2, 8, 60});
  const auto s = c.reals("size.s", {4, 65, 7801});
  const auto windows = c.integers("size.windows", {50, 100, 200});
  const int n_max = *std::max_element(windows.begin(), windows.end()) + 1;
  auto cm = build_counterexample_moments(t, s, n_max);
  std::vector<double> gauss;
  for (int n = 0; n <= n_max; ++n) gauss.push_back(std::log(kPi) + std::lgamma(n + 1.0));
  auto ref = convexity_screen(gauss, windows);
  auto sc = convexity_screen(cm.p, windows);
  StudyResult r;
  detail::TableBuilder tb({"window", "defect_gaussian", "defect_atomic"});
  for (std::size_t i = 0; i < windows.size(); ++i) tb.row({double(windows[i]), ref.defect[i], sc.defect[i]});
  r.tables.push_back(tb.done("convexity.csv"));
  detail::TableBuilder pb({"n", "p", "prediction"});
  for (std::size_t n = 0; n < cm.p.size(); ++n) pb.row({double(n), cm.p[n], cm.prediction[n]});
  r.tables.push_back(pb.done("atomic_moments.csv"));
  r.report = {{"t", t},
              {"s", s},
              {"windows", windows},
              {"max_deviation", cm.max_deviation},
              {"gaussian", {{"defect", ref.defect}, {"verdict", screen_verdict_name(ref.verdict)}}},
              {"atomic", {{"defect", sc.defect},
                          {"growth", detail::finite_or_string(sc.growth)},
                          {"verdict", screen_verdict_name(sc.verdict)}}}};
  r.pass = ref.verdict == ScreenVerdict::monotone_compatible && sc.verdict == ScreenVerdict::incompatible;
  return r;
}

// ---------------------------------------------------------------------------

inline const std::vector<StudyInfo>& study_catalog() {
  static const std::vector<StudyInfo> cat{
      {"t1-obstruction", "A, beta, widths (N-list), rho, center; weight", "seconds",
       "obstruction functional on a square lattice and the polynomial Q on a flat annulus"},
      {"t2-chain", "N, delta, sections; tolerance.plateau, tolerance.stability; weight", "seconds",
       "Laplace-point estimate chain, et1..et3 constants under N -> 2N, Gram condition numbers"},
      {"t3-suite", "depth", "seconds", "block norms, kernel norms on the circles, de Branges ratio"},
      {"circulant", "n_max; tolerance.eig", "sub-second", "exact circulant spectrum and dense cross-check"},
      {"moments", "N; tolerance.rel_tol; weight", "sub-second", "moment table with closed-form or Laplace check"},
      {"gram", "N or points_file, sections; weight", "sub-second",
       "normalized-kernel Gram, nested sections, Riesz bounds"},
      {"convexity", "t, s, windows", "sub-second", "atomic moment sequence and the convexity screen"},
  };
  return cat;
}

inline StudyResult run_study(const std::string& name, const Config& c, const StudyContext& ctx) {
  static const std::map<std::string, std::function<StudyResult(const Config&, const StudyContext&)>> table{
      {"t1-obstruction", run_t1_obstruction}, {"t2-chain", run_t2_chain}, {"t3-suite", run_t3_suite},
      {"circulant", run_circulant},           {"moments", run_moments},   {"gram", run_gram},
      {"convexity", run_convexity}};
  auto it = table.find(name);
  if (it == table.end())
    throw ConfigError(c.source(), c.line_of("study.name"), "unknown study '" + name + "'");
  return it->second(c, ctx);
}

}  // namespace fockrb
