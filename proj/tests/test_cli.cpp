#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "test_support.hpp"

namespace {

std::string binary() {
  const char* p = std::getenv("VBSENSE_CLI");
  if (!p) throw std::runtime_error("VBSENSE_CLI not set (path to the CLI binary)");
  return p;
}

int run_cli(const std::string& args, const std::string& log = "/dev/null") {
  const std::string cmd = binary() + " " + args + " > " + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (status < 0) return -1;
  return WEXITSTATUS(status);
}

std::string out_dir(const std::string& name) {
  const auto dir = testsup::scratch_dir() / ("cli_" + name);
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

/// File content without provenance comment lines.
std::string data_lines(const std::string& path) {
  std::ifstream f(path);
  REQUIRE(f.good());
  std::string out, line;
  while (std::getline(f, line))
    if (line.empty() || line[0] != '#') out += line + "\n";
  return out;
}

int count_data_rows(const std::string& path) {
  std::ifstream f(path);
  int n = -1;  // discount the column header
  std::string line;
  while (std::getline(f, line))
    if (!line.empty() && line[0] != '#') ++n;
  return n;
}

const std::string kFastRotor = " --grid-n 64 --n-angles 6 --window 1e-9 ";

}  // namespace

TEST_CASE("CLI validation and help exit codes") {
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("simulate-rotor" + kFastRotor + "--out " + out_dir("noseed")) == 2);
  CHECK(run_cli("simulate-rotor --seed 1 --bar-width 0" + kFastRotor + "--out " +
                out_dir("badbar")) == 2);
  CHECK(run_cli("no-such-command") == 2);
}

TEST_CASE("a malformed config file gives the ingest exit code") {
  const std::string cfg = testsup::scratch_file("cli_bad_config.json");
  {
    std::ofstream f(cfg);
    f << "{ this is not json";
  }
  CHECK(run_cli("simulate-rotor --seed 1 --config " + cfg + " --out " + out_dir("badcfg")) == 3);
}

TEST_CASE("config file fields apply and flags override them") {
  const std::string cfg = testsup::scratch_file("cli_config.json");
  {
    std::ofstream f(cfg);
    f << R"({"n_angles": 6, "grid_n": 64, "window": 1e-9})";
  }
  const std::string d1 = out_dir("cfg_applied");
  REQUIRE(run_cli("simulate-rotor --seed 3 --config " + cfg + " --out " + d1) == 0);
  CHECK(count_data_rows(d1 + "/rotor_angles.csv") == 6);

  const std::string d2 = out_dir("cfg_overridden");
  REQUIRE(run_cli("simulate-rotor --seed 3 --config " + cfg + " --n-angles 4 --out " + d2) == 0);
  CHECK(count_data_rows(d2 + "/rotor_angles.csv") == 4);
}

TEST_CASE("seeded simulations are bit-reproducible") {
  const std::string a = out_dir("det_a"), b = out_dir("det_b"), c = out_dir("det_c");
  const std::string args = "simulate-rotor --noise-sigma 0.01" + kFastRotor;
  REQUIRE(run_cli(args + "--seed 7 --out " + a) == 0);
  REQUIRE(run_cli(args + "--seed 7 --out " + b) == 0);
  REQUIRE(run_cli(args + "--seed 8 --out " + c) == 0);
  CHECK(slurp(a + "/rotor_stokes.csv") == slurp(b + "/rotor_stokes.csv"));
  CHECK(slurp(a + "/rotor_angles.csv") == slurp(b + "/rotor_angles.csv"));
  CHECK(slurp(a + "/rotor_stokes.csv") != slurp(c + "/rotor_stokes.csv"));
}

TEST_CASE("knife transit reports one horizontal event") {
  const std::string d = out_dir("knife");
  REQUIRE(run_cli("simulate-knife --seed 2 --grid-n 96 --out " + d) == 0);
  const auto j = nlohmann::json::parse(std::ifstream(d + "/knife_events.json"));
  REQUIRE(j.at("events").size() == 1);
  CHECK(j.at("events")[0].at("duration").get<double>() > 0);
  CHECK(j.at("direction").at("axis") == "horizontal");
  CHECK(j.at("direction").at("ambiguous_180") == true);

  // an edge that never reaches the beam: no events, direction unresolved
  const std::string d2 = out_dir("knife_still");
  CHECK(run_cli("simulate-knife --seed 2 --grid-n 96 --start-offset -6e-6 --end-offset -5e-6 "
                "--out " + d2) == 4);
  const auto j2 = nlohmann::json::parse(std::ifstream(d2 + "/knife_events.json"));
  CHECK(j2.at("events").empty());
  CHECK(j2.at("direction").is_null());
}

TEST_CASE("lut build and inspect round-trip a symmetric table") {
  const std::string d = out_dir("lut");
  REQUIRE(run_cli("lut build --grid-n 96 --resolution 200e-6 --out " + d) == 0);
  const std::string log = testsup::scratch_file("cli_lut_inspect.log");
  REQUIRE(run_cli("lut inspect " + d + "/lut.vbsa", log) == 0);
  const std::string report = slurp(log);
  CHECK(report.find("shape: disk") != std::string::npos);
  CHECK(report.find("source: ideal_mode") != std::string::npos);
  CHECK(report.find("180-degree symmetric") != std::string::npos);
}

TEST_CASE("the track command reproduces the simulation's estimates from its own trace") {
  const std::string sim = out_dir("track_sim"), inv = out_dir("track_inv");
  const std::string span =
      "--start-x -0.425e-3 --start-y -0.425e-3 --end-x 0.425e-3 --end-y -0.425e-3 ";
  REQUIRE(run_cli("simulate-track --seed 11 --grid-n 96 " + span + "--out " + sim) == 0);

  // the simulation derives its half-plane prior from the first pose
  char theta[40];
  std::snprintf(theta, sizeof theta, "%.17g", std::atan2(-0.425e-3, -0.425e-3));
  REQUIRE(run_cli("track --trace " + sim + "/track_trace.csv --lut " + sim +
                  "/track_lut.vbsa --half-plane -0.425e-3 -0.425e-3 " + theta +
                  " --continuity-scale 200e-6 --out " + inv) == 0);
  CHECK(data_lines(inv + "/track.csv") == data_lines(sim + "/track.csv"));
}

TEST_CASE("the track command rejects a LUT built for a different obstacle") {
  const std::string sim = out_dir("mismatch_sim"), lutd = out_dir("mismatch_lut");
  const std::string span =
      "--start-x -0.425e-3 --start-y -0.425e-3 --end-x 0.425e-3 --end-y -0.425e-3 ";
  REQUIRE(run_cli("simulate-track --seed 11 --grid-n 96 " + span + "--out " + sim) == 0);
  REQUIRE(run_cli("lut build --shape bar --grid-n 96 --resolution 200e-6 --out " + lutd) == 0);
  CHECK(run_cli("track --trace " + sim + "/track_trace.csv --lut " + lutd + "/lut.vbsa --out " +
                out_dir("mismatch_out")) == 2);
}
