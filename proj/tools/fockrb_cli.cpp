#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fockrb/studies.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kPass = 0, kError = 1, kVerdictFailed = 2 };

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw fockrb::Error("cannot write " + p.string());
  f << text;
}

int cmd_list() {
  std::cout << "study           runtime     parameters\n";
  for (const auto& s : fockrb::study_catalog()) {
    std::printf("%-15s %-11s %s\n", s.name.c_str(), s.runtime.c_str(), s.parameters.c_str());
    std::printf("%-15s %-11s %s\n", "", "", s.summary.c_str());
  }
  std::fflush(stdout);
  return kPass;
}

int cmd_run(const std::string& config_path, std::string out_dir, unsigned threads, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  nlohmann::json manifest{{"version", fockrb::kVersion}, {"config", config_path}, {"threads", threads},
                          {"seed", seed}};
  int code = kError;
  fs::path dir = out_dir.empty() ? fs::path("fockrb_out") : fs::path(out_dir);
  try {
    auto cfg = fockrb::Config::load(config_path);
    manifest["config_hash"] = fockrb::hex64(cfg.hash());
    const std::string cfg_dir = cfg.str("output.dir", "fockrb_out");
    if (out_dir.empty()) dir = cfg_dir;
    const std::string study = cfg.required("study.name");
    manifest["study"] = study;
    fs::create_directories(dir);
    auto res = fockrb::run_study(study, cfg, {threads, seed});
    nlohmann::json outputs = nlohmann::json::array({"report.json"});
    write_text(dir / "report.json", res.report.dump(2) + "\n");
    for (const auto& t : res.tables) {
      write_text(dir / t.name, t.body);
      outputs.push_back(t.name);
    }
    nlohmann::json unused = nlohmann::json::array();
    for (const auto& [key, line] : cfg.unused()) {
      std::cerr << config_path << ":" << line << ": warning: unused key " << key << "\n";
      unused.push_back(key);
    }
    manifest["outputs"] = outputs;
    manifest["unused_keys"] = unused;
    manifest["verdict"] = res.pass ? "pass" : "fail";
    code = res.pass ? kPass : kVerdictFailed;
    std::cout << study << ": " << (res.pass ? "PASS" : "FAIL") << " (" << dir.string() << ")\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    manifest["error"] = e.what();
  }
  manifest["exit_status"] = code;
  manifest["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  try {
    fs::create_directories(dir);
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  } catch (const std::exception& e) {
    std::cerr << "error: cannot write manifest: " << e.what() << "\n";
    return kError;
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical experiments on radial weighted Fock-type spaces"};
  app.require_subcommand(1);

  auto* list = app.add_subcommand("list", "List the available studies and their parameters");

  std::string config, out_dir;
  unsigned threads = 1;
  std::uint64_t seed = 1;
  auto* run = app.add_subcommand("run", "Run the study described by a config file");
  run->add_option("config", config, "Path to the .ini config")->required();
  run->add_option("-o,--output-dir", out_dir, "Output directory (overrides [output] dir)");
  run->add_option("-j,--threads", threads, "Worker threads")->check(CLI::Range(1u, 256u));
  run->add_option("--seed", seed, "Seed for randomized sampling");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kPass : kError;
  }
  if (*list) return cmd_list();
  return cmd_run(config, out_dir, threads, seed);
}
