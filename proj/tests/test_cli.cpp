#include "doctest.h"

#include "superbranch/cli.hpp"
#include "superbranch/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace superbranch;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
  json doc() const { return json::parse(out); }
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string data(const char* name) { return (fs::path(SUPERBRANCH_DATA_DIR) / name).string(); }

fs::path scratch(const char* name) {
  const auto dir = fs::temp_directory_path() / "superbranch_cli_tests" / name;
  fs::remove_all(dir);
  return dir;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("check") {
  const auto ok = run({"check", data("cbi.json")});
  CHECK(ok.code == 0);
  CHECK(ok.doc()["valid"] == true);
  CHECK(ok.doc()["subcritical"]["certified"] == true);
  CHECK(ok.doc()["manifest"]["config_hash"] == config_hash(load_config(data("cbi.json"))));

  const auto refused = run({"check", data("critical.json")});
  CHECK(refused.code == cli::refused);
  CHECK(refused.doc()["subcritical"]["certified"] == false);
  CHECK(run({"check", data("critical.json"), "--no-certify"}).code == 0);
}

TEST_CASE("usage and io errors") {
  CHECK(run({"frobnicate"}).code == cli::usage);
  CHECK(run({}).code == cli::usage);
  CHECK(run({"laplace", data("cbi.json")}).code == cli::usage);
  CHECK(run({"check", "/nonexistent/model.json"}).code == cli::io_failure);
  CHECK(run({"--version"}).out == std::string(cli::kVersion) + "\n");
}

TEST_CASE("laplace and mean values") {
  const auto lap = run({"laplace", data("cbi.json"), "--mu0", "[1]", "--f", "[1]", "--t", "1"});
  REQUIRE(lap.code == 0);
  CHECK(lap.doc()["value"].get<double>() == doctest::Approx(0.6412624762686116).epsilon(1e-9));

  const auto inv = run({"laplace", data("cbi.json"), "--f", "[1]", "--invariant"});
  REQUIRE(inv.code == 0);
  CHECK(inv.doc()["value"].get<double>() == doctest::Approx(std::pow(1.5, -0.6)).epsilon(1e-8));

  const auto mean = run({"mean", data("cbi.json"), "--invariant"});
  REQUIRE(mean.code == 0);
  CHECK(mean.doc()["mean"][0].get<double>() == doctest::Approx(0.3));

  CHECK(run({"laplace", data("critical.json"), "--f", "[1,1]", "--invariant"}).code == cli::refused);
  CHECK(run({"laplace", data("cbi.json"), "--f", "[-1]", "--t", "1"}).code == cli::refused);
}

TEST_CASE("artifacts, manifest and report") {
  const auto dir = scratch("report");
  const auto solve = run({"--out", dir.string(), "solve", data("cbi.json"), "--f", "[1]", "--t", "1", "--grid", "4"});
  REQUIRE(solve.code == 0);
  CHECK(fs::exists(dir / "solve.json"));
  CHECK(fs::exists(dir / "solve.csv"));
  std::ifstream mf(dir / "manifest.json");
  const json manifest = json::parse(mf);
  CHECK(manifest["command"] == "solve");
  CHECK(manifest["tool_version"] == cli::kVersion);

  const auto rep_dir = dir / "merged";
  const auto rep = run({"--out", rep_dir.string(), "report", data("cbi.json"), (dir / "solve.json").string()});
  REQUIRE(rep.code == 0);
  CHECK(rep.doc()["sections"]["solve"].is_object());
  CHECK(rep.doc()["sections"]["simulate"].is_null());
  CHECK(fs::exists(rep_dir / "report.csv"));

  CHECK(run({"report", data("two_site.json"), (dir / "solve.json").string()}).code == cli::refused);
  CHECK(run({"report", data("cbi.json"), (dir / "missing.json").string()}).code == cli::io_failure);
}

TEST_CASE("simulate summary") {
  const auto dir = scratch("simulate");
  const auto bin = dir / "ens.sbr";
  const auto sim = run({"--seed", "4", "--threads", "2", "--out", dir.string(), "simulate", data("cbi.json"), "--mu0",
                        "[1]", "--t", "1", "--paths", "200", "--dt", "0.01", "--f", "[1]", "--binary",
                        bin.string()});
  REQUIRE(sim.code == 0);
  CHECK(fs::exists(bin));
  CHECK(run({"simulate", data("cbi.json"), "--t", "1", "--scheme", "event_driven"}).code == cli::refused);
  CHECK(run({"simulate", data("cbi.json"), "--t", "1", "--scheme", "bogus"}).code == cli::usage);
}

TEST_CASE("ergodicity output") {
  const auto dir = scratch("ergodicity");
  const auto r = run({"--out", dir.string(), "ergodicity", data("cbi.json"), "--mu0", "[1]", "--tmax", "4", "--grid",
                      "8"});
  REQUIRE(r.code == 0);
  CHECK(r.doc()["dL_within_bound"] == true);
  CHECK(r.doc()["mean_gap_within_bound"] == true);
  CHECK(fs::exists(dir / "ergodicity.csv"));
  CHECK(run({"ergodicity", data("cbi.json"), "--norm", "l2"}).code == cli::usage);
}

TEST_CASE("installed binary") {
  const std::string cmd = std::string("\"") + SUPERBRANCH_CLI_PATH + "\" --version > /dev/null";
  CHECK(std::system(cmd.c_str()) == 0);
}

} // TEST_SUITE
