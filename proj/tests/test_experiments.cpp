#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "avl/errors.hpp"
#include "avl/experiments.hpp"
#include "avl/validation.hpp"

using namespace avl;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json base_config() {
  return json::parse(R"({
    "dimension": 4,
    "potential": {"name": "uniform_magnetic", "params": {"strength": 1.0, "axis_a": 1, "axis_b": 2}},
    "ensemble": {"count": 200, "energy": 100.0, "spread": 0.006, "seed": 3,
                 "direction": [0.0, 0.0, 1.0], "bunch_width": 0.0, "antithetic": true},
    "integrator": {"step": 0.001},
    "experiment": {"kind": "compare", "lab_time": 2.0, "steps": 200, "time_samples": 9}
  })");
}

ScenarioConfig parse(const json& j) { return ScenarioConfig::from_json(j); }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("avl_test_" + name);
  fs::remove_all(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(AVL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("config round-trips through JSON and hashes canonically") {
  const ScenarioConfig c = parse(base_config());
  CHECK(c.ensemble.count == 200);
  CHECK(c.experiment.steps == 200);
  const ScenarioConfig back = parse(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash(c).size() == 16);
  json j = base_config();
  j["ensemble"]["seed"] = 4;
  CHECK(config_hash(parse(j)) != config_hash(c));
}

TEST_CASE("config errors are specific") {
  auto rejects = [](const std::function<void(json&)>& edit) {
    json j = base_config();
    edit(j);
    CHECK_THROWS_AS(parse(j), ConfigError);
  };
  rejects([](json& j) { j["ensemble"]["cuont"] = 3; });
  rejects([](json& j) { j["extra"] = 1; });
  rejects([](json& j) { j["ensemble"]["count"] = 0; });
  rejects([](json& j) { j["ensemble"]["count"] = "many"; });
  rejects([](json& j) { j["ensemble"]["energy"] = 0.5; });
  rejects([](json& j) { j["ensemble"]["direction"] = json::array({0.0, 0.0, 0.0}); });
  rejects([](json& j) { j["ensemble"]["direction"] = json::array({1.0, 0.0}); });
  rejects([](json& j) { j["integrator"]["step"] = -1e-3; });
  rejects([](json& j) { j["experiment"]["kind"] = "explode"; });
  rejects([](json& j) { j["experiment"]["spread_sweep"] = json::array({0.01, 0.005}); });
  rejects([](json& j) { j["potential"]["name"] = "monopole"; });
  rejects([](json& j) { j["chart"] = "spherical"; });
  rejects([](json& j) { j["dimension"] = 1; });
  rejects([](json& j) { j["output"] = {{"formats", {"xml"}}}; });

  const fs::path bad = scratch("bad.json");
  std::ofstream(bad) << "{ not json";
  CHECK_THROWS_AS(load_config(bad), ConfigError);
}

TEST_CASE("loglog slope of an exact power law") {
  const auto [slope, err] = loglog_slope({1, 2, 4, 8}, {3, 12, 48, 192});
  CHECK(slope == doctest::Approx(2.0));
  CHECK(err < 1e-12);
}

TEST_CASE("compare with a point ensemble has zero position gap") {
  json j = base_config();
  j["ensemble"]["spread"] = 0.0;
  const CompareResult r = run_compare(parse(j));
  REQUIRE_FALSE(r.report.samples.empty());
  double dx = 0.0;
  for (const auto& s : r.report.samples) dx = std::max(dx, s.dx);
  CHECK(dx <= 1e-9);
  CHECK(r.summary["alpha"].get<double>() == 0.0);
}

TEST_CASE("compare without a field has nothing to average away") {
  json j = base_config();
  j["potential"] = {{"name", "uniform_magnetic"}, {"params", {{"strength", 0.0}}}};
  const CompareResult r = run_compare(parse(j));
  for (const auto& s : r.report.samples) {
    CHECK(s.dx < 1e-12);
    CHECK(s.dy < 1e-12);
  }
}

TEST_CASE("compare gaps grow with time and flag the hypotheses") {
  const CompareResult r = run_compare(parse(base_config()));
  const auto& s = r.report.samples;
  REQUIRE(s.size() >= 3);
  CHECK(s.back().dx > s[s.size() / 2].dx);
  CHECK(r.summary["hypotheses"]["ultra_relativistic"]["holds"].get<bool>());
  CHECK(r.summary.contains("hypothesis4_gap"));
  CHECK(r.summary["energy"].get<double>() == doctest::Approx(100.0).epsilon(1e-3));
}

TEST_CASE("compare rejects curvilinear charts") {
  json j = base_config();
  j["chart"] = "cylindrical";
  CHECK_THROWS_AS(run_compare(parse(j)), ConfigError);
}

TEST_CASE("synthetic scale recovers the planted exponents") {
  json j = base_config();
  j["experiment"]["kind"] = "scale";
  j["experiment"]["synthetic"] = true;
  j["experiment"]["spread_sweep"] = {1e-3, 3e-3, 1e-2, 3e-2};
  j["experiment"]["energy_sweep"] = {10.0, 30.0, 100.0, 300.0};
  const ScaleResult r = run_scale(parse(j));
  REQUIRE_FALSE(r.dx_fit.refused);
  CHECK(r.dx_fit.exponents[0].exponent == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(r.dx_fit.exponents[1].exponent == doctest::Approx(-2.0).epsilon(1e-6));
  CHECK(r.dx_fit.exponents[2].exponent == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(r.dy_fit.exponents[2].exponent == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.dx_fit.prefactor == doctest::Approx(7.0).epsilon(1e-6));
}

TEST_CASE("scale refuses a delta ensemble instead of fitting noise") {
  json j = base_config();
  j["experiment"]["kind"] = "scale";
  j["ensemble"]["spread"] = 0.0;
  j["experiment"]["lab_time"] = 0.5;
  j["experiment"]["steps"] = 50;
  const ScaleResult r = run_scale(parse(j));
  CHECK(r.dx_fit.refused);
}

TEST_CASE("simulate rejects a singular start event") {
  json j = base_config();
  j["chart"] = "cylindrical";
  j["experiment"] = {{"kind", "simulate"}, {"start", {0.0, 0.0, 0.0, 0.0}}};
  j["integrator"]["duration"] = 0.1;
  CHECK_THROWS_AS(run_simulate(parse(j)), ConfigError);
  j["experiment"]["start"] = {0.0, 1.0, 0.0, 0.0};
  j["ensemble"]["energy"] = 2.0;
  const Trajectory tr = run_simulate(parse(j));
  CHECK(tr.back().t == doctest::Approx(0.1));
}

TEST_CASE("validation suite passes and catches a broken third moment") {
  const auto checks = run_validate();
  CHECK(all_passed(checks));
  ValidationOptions broken;
  broken.flip_third_moment = true;
  const auto bad = run_validate(broken);
  CHECK_FALSE(all_passed(bad));
  for (const auto& c : bad)
    if (c.name == "delta_consistency") CHECK_FALSE(c.passed);
}

TEST_CASE("emitted files are deterministic apart from the manifest") {
  json j = base_config();
  const fs::path a = scratch("emit_a"), b = scratch("emit_b");
  j["output"] = {{"directory", a.string()}};
  ScenarioConfig ca = parse(j);
  RunOptions one;
  const auto files = emit_compare(ca, run_compare(ca, one), one, 0.0);
  REQUIRE(files.back().filename() == "manifest.json");
  j["output"] = {{"directory", b.string()}};
  ScenarioConfig cb = parse(j);
  RunOptions four;
  four.workers = 4;
  emit_compare(cb, run_compare(cb, four), four, 0.0);
  for (const char* name : {"compare_report.csv", "compare_report.json", "compare_summary.json"})
    CHECK(slurp(a / name) == slurp(b / name));
  const json manifest = json::parse(slurp(a / "manifest.json"));
  CHECK(manifest["config_hash"] == config_hash(ca));
  CHECK(manifest.contains("wall_clock_seconds"));
}

TEST_CASE("cli exit codes") {
  const fs::path out = scratch("cli");
  const fs::path good = scratch("cli_good.json"), bad = scratch("cli_bad.json");
  std::ofstream(good) << base_config().dump();
  json j = base_config();
  j["ensemble"]["count"] = -1;
  std::ofstream(bad) << j.dump();
  CHECK(run_cli("compare --config " + good.string() + " --out " + out.string()) == 0);
  CHECK(fs::exists(out / "compare_summary.json"));
  CHECK(run_cli("compare --config " + bad.string()) == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("compare --format yaml") == 2);
  CHECK(run_cli("validate") == 0);
}
