#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "fockrb/config.hpp"
#include "fockrb/studies.hpp"

namespace fs = std::filesystem;
using fockrb::Config;
using fockrb::ConfigError;

namespace {

struct Run {
  int code;
  std::string out;
};

Run run_cli(const std::string& args) {
  std::string cmd = std::string(FOCKRB_CLI_PATH) + " " + args + " 2>&1";
  Run r{-1, ""};
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, p)) r.out += buf;
  int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("fockrb_cli_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string config_path(const std::string& name) { return std::string(FOCKRB_CONFIG_DIR) + "/" + name; }

}  // namespace

TEST(ConfigParse, SectionsKeysAndComments) {
  auto c = Config::parse("# header\n[study]\nname = gram\n\n[size]\nN = 12 \n; note\nsections = 4, 8,12\n");
  EXPECT_EQ(c.str("study.name", ""), "gram");
  EXPECT_EQ(c.integer("size.N", 0), 12);
  EXPECT_EQ(c.integers("size.sections", {}), (std::vector<int>{4, 8, 12}));
  EXPECT_EQ(c.line_of("size.sections"), 8);
  EXPECT_DOUBLE_EQ(c.real("size.missing", 2.5), 2.5);
}

TEST(ConfigParse, ErrorsCarryLineNumbers) {
  auto line_of_error = [](const std::string& text) {
    try {
      Config::parse(text, "x.ini");
    } catch (const ConfigError& e) {
      return e.line;
    }
    return -1;
  };
  EXPECT_EQ(line_of_error("[study]\nname = a\n[bogus]\n"), 3);
  EXPECT_EQ(line_of_error("[size]\nN 12\n"), 2);
  EXPECT_EQ(line_of_error("N = 12\n"), 1);
  EXPECT_EQ(line_of_error("[size]\nN = 1\nN = 2\n"), 3);
  EXPECT_EQ(line_of_error("[size\n"), 1);
}

TEST(ConfigParse, TypedAccessorsReject) {
  auto c = Config::parse("[size]\nN = 2.5\nA = abc\n[tolerance]\nrel = 3\n", "t.ini");
  EXPECT_THROW(c.integer("size.N", 0), ConfigError);
  try {
    c.real("size.A", 0);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line, 3);
    EXPECT_NE(std::string(e.what()).find("t.ini:3"), std::string::npos);
  }
  EXPECT_THROW(c.tolerance("tolerance.rel", 0.1), ConfigError);
  EXPECT_THROW(c.required("study.name"), ConfigError);
}

TEST(ConfigParse, UnusedKeysAndHash) {
  auto c = Config::parse("[size]\nN = 3\ntypo = 1\n");
  c.integer("size.N", 0);
  auto u = c.unused();
  ASSERT_EQ(u.size(), 1u);
  EXPECT_EQ(u[0].first, "size.typo");
  EXPECT_EQ(u[0].second, 3);
  EXPECT_EQ(Config::parse("[size]\nN = 3\n").hash(), Config::parse("[size]\nN = 3\n").hash());
  EXPECT_NE(Config::parse("[size]\nN = 3\n").hash(), Config::parse("[size]\nN = 4\n").hash());
  EXPECT_EQ(fockrb::hex64(fockrb::fnv1a64("")), "cbf29ce484222325");
}

TEST(ConfigParse, WeightFamilies) {
  auto w = fockrb::weight_from_config(Config::parse("[weight]\nfamily = power\nparam = 3\n"), "square", 0);
  EXPECT_EQ(w.family(), fockrb::Family::power_exponent);
  EXPECT_DOUBLE_EQ(w.parameter(), 3.0);
  auto sq = fockrb::weight_from_config(Config::parse(""), "square", 0);
  EXPECT_DOUBLE_EQ(sq.psi(3.0), 9.0);
  try {
    fockrb::weight_from_config(Config::parse("[study]\nname = x\n[weight]\nfamily = gaussian\n", "w.ini"), "power", 2);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line, 4);
  }
}

TEST(Studies, CatalogMatchesNames) {
  const auto& cat = fockrb::study_catalog();
  ASSERT_EQ(cat.size(), fockrb::study_names().size());
  for (std::size_t i = 0; i < cat.size(); ++i) EXPECT_EQ(cat[i].name, fockrb::study_names()[i]);
}

TEST(Cli, ListIsDeterministic) {
  auto a = run_cli("list"), b = run_cli("list");
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  for (const auto& n : fockrb::study_names()) EXPECT_NE(a.out.find(n), std::string::npos) << n;
  EXPECT_NE(a.out.find("A, beta, widths"), std::string::npos);
}

TEST(Cli, CirculantRunPasses) {
  auto d = scratch("circ");
  auto r = run_cli("run " + config_path("circulant.ini") + " --output-dir " + d.string());
  EXPECT_EQ(r.code, 0) << r.out;
  auto rep = nlohmann::json::parse(slurp(d / "report.json"));
  EXPECT_EQ(rep["opnorm_n2"], "7/5");
  EXPECT_EQ(rep["opnorm_n3"], "11/8");
  auto csv = slurp(d / "circulant.csv");
  EXPECT_EQ(csv.rfind("n,opnorm,opnorm_exact,max_eig_error", 0), 0u);
  auto man = nlohmann::json::parse(slurp(d / "manifest.json"));
  EXPECT_EQ(man["exit_status"], 0);
  EXPECT_EQ(man["study"], "circulant");
  EXPECT_EQ(man["config_hash"].get<std::string>().size(), 16u);
}

TEST(Cli, SameConfigGivesIdenticalOutputs) {
  auto d1 = scratch("det1"), d2 = scratch("det2");
  ASSERT_EQ(run_cli("run " + config_path("gram.ini") + " -o " + d1.string() + " -j 1").code, 0);
  ASSERT_EQ(run_cli("run " + config_path("gram.ini") + " -o " + d2.string() + " -j 4").code, 0);
  for (const char* f : {"gram.csv", "gram_scales.csv", "gram_sections.csv", "report.json"})
    EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;
}

TEST(Cli, T3SuiteDepthFivePasses) {
  auto d = scratch("t3");
  auto r = run_cli("run " + config_path("t3-suite.ini") + " -o " + d.string());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(d / "t3_debranges.csv"));
}

TEST(Cli, MalformedFamilyExitsOneWithLine) {
  auto d = scratch("bad");
  std::ofstream(d / "bad.ini") << "[study]\nname = moments\n[weight]\nfamily = gauss\n";
  auto r = run_cli("run " + (d / "bad.ini").string() + " -o " + (d / "out").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("bad.ini:4"), std::string::npos) << r.out;
  auto man = nlohmann::json::parse(slurp(d / "out" / "manifest.json"));
  EXPECT_EQ(man["exit_status"], 1);
  EXPECT_NE(man["error"].get<std::string>().find("gauss"), std::string::npos);
}

TEST(Cli, VerdictFailureExitsTwoAndWritesManifest) {
  auto d = scratch("cvx");
  auto r = run_cli("run " + config_path("convexity.ini") + " -o " + d.string());
  auto rep = nlohmann::json::parse(slurp(d / "report.json"));
  auto man = nlohmann::json::parse(slurp(d / "manifest.json"));
  EXPECT_EQ(r.code, rep["atomic"]["verdict"] == "incompatible" ? 0 : 2);
  EXPECT_EQ(man["exit_status"], r.code);
  EXPECT_EQ(rep["gaussian"]["verdict"], "monotone-compatible");
}

TEST(Cli, MissingConfigExitsOne) {
  auto d = scratch("missing");
  auto r = run_cli("run /nonexistent/x.ini -o " + d.string());
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(fs::exists(d / "manifest.json"));
}
