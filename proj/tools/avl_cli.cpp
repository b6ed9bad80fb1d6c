// Command-line front end for the experiment pipelines.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "avl/errors.hpp"
#include "avl/experiments.hpp"
#include "avl/validation.hpp"

namespace {

constexpr int kExitInvariant = 1;
constexpr int kExitConfig = 2;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int workers = 1;
  std::string format = "both";
};

avl::ScenarioConfig resolve(const Flags& f, const std::string& kind) {
  avl::ScenarioConfig c;
  if (!f.config.empty()) c = avl::load_config(f.config);
  c.experiment.kind = kind;  // the subcommand wins over the file
  if (f.seed) c.ensemble.seed = *f.seed;
  if (!f.out.empty()) c.output.directory = f.out;
  c.output.formats.clear();
  if (f.format == "csv" || f.format == "both") c.output.formats.push_back("csv");
  if (f.format == "json" || f.format == "both") c.output.formats.push_back("json");
  c.validate();
  return c;
}

avl::RunOptions run_options(const Flags& f) {
  avl::RunOptions o;
  o.workers = f.workers;
  o.write_csv = f.format != "json";
  o.write_json = f.format != "csv";
  return o;
}

void report(const std::vector<std::filesystem::path>& paths) {
  for (const auto& p : paths) std::cout << p.string() << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int dispatch(const std::string& kind, const Flags& f) {
  const auto t0 = std::chrono::steady_clock::now();
  if (kind == "validate") {
    avl::ValidationOptions vo;
    vo.workers = f.workers;
    if (f.seed) vo.seed = *f.seed;
    const auto checks = avl::run_validate(vo);
    avl::write_validation_csv(std::cout, checks);
    if (!f.out.empty()) {
      std::filesystem::create_directories(f.out);
      if (f.format != "json") {
        std::ofstream csv(std::filesystem::path(f.out) / "validation.csv");
        avl::write_validation_csv(csv, checks);
      }
      if (f.format != "csv") {
        std::ofstream js(std::filesystem::path(f.out) / "validation.json");
        js << avl::dump_json(avl::validation_to_json(checks));
      }
    }
    return avl::all_passed(checks) ? 0 : kExitInvariant;
  }

  const avl::ScenarioConfig c = resolve(f, kind);
  const avl::RunOptions o = run_options(f);
  if (kind == "simulate") {
    const auto tr = avl::run_simulate(c);
    report(avl::emit_simulate(c, tr, o, seconds_since(t0)));
  } else if (kind == "compare") {
    const auto r = avl::run_compare(c, o);
    report(avl::emit_compare(c, r, o, seconds_since(t0)));
  } else if (kind == "scale") {
    const auto r = avl::run_scale(c, o);
    report(avl::emit_scale(c, r, o, seconds_since(t0)));
  } else if (kind == "residual") {
    const auto r = avl::run_residual(c, o);
    report(avl::emit_residual(c, r, o, seconds_since(t0)));
  } else if (kind == "fluid") {
    const auto r = avl::run_fluid(c, o);
    report(avl::emit_fluid(c, r, o, seconds_since(t0)));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Averaged Lorentz connection experiments"};
  app.require_subcommand(1);
  Flags flags;
  for (const char* name : {"simulate", "compare", "scale", "residual", "fluid", "validate"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", flags.config, "scenario file (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "overrides ensemble.seed");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--workers", flags.workers, "worker threads")->check(CLI::Range(1, 1024));
    sub->add_option("--format", flags.format, "output format")
        ->check(CLI::IsMember({"csv", "json", "both"}));
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  const std::string kind = app.get_subcommands().front()->get_name();
  try {
    return dispatch(kind, flags);
  } catch (const avl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvariant;
  }
}
