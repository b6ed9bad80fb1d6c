#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "avl/errors.hpp"
#include "avl/experiments.hpp"

namespace avl {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class Writer {
 public:
  Writer(const ScenarioConfig& config, const RunOptions& options)
      : config_(config), options_(options), dir_(config.output.directory) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw ConfigError(fmt::format("cannot create output directory '{}'", dir_.string()));
  }

  void csv(const std::string& name, const std::string& text) {
    if (options_.write_csv) write(name, text);
  }
  void json_file(const std::string& name, const json& j) {
    if (options_.write_json) write(name, dump_json(j));
  }

  std::vector<fs::path> finish(double wall_clock) {
    json outputs = json::array();
    for (const auto& p : paths_) outputs.push_back(p.filename().string());
    const json manifest{{"config_hash", config_hash(config_)},
                        {"seed", config_.ensemble.seed},
                        {"version", kVersion},
                        {"experiment", config_.experiment.kind},
                        {"outputs", outputs},
                        {"wall_clock_seconds", wall_clock}};
    write("manifest.json", dump_json(manifest));
    return paths_;
  }

 private:
  void write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ConfigError(fmt::format("cannot write '{}'", p.string()));
    out << text;
    paths_.push_back(p);
  }

  const ScenarioConfig& config_;
  const RunOptions& options_;
  fs::path dir_;
  std::vector<fs::path> paths_;
};

std::string num(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

std::vector<fs::path> emit_compare(const ScenarioConfig& config, const CompareResult& result,
                                   const RunOptions& options, double wall_clock) {
  Writer w(config, options);
  std::ostringstream report;
  write_report_csv(report, result.report);
  w.csv("compare_report.csv", report.str());
  json samples = json::array();
  for (const auto& s : result.report.samples)
    samples.push_back({{"t_lab", s.t_lab},
                       {"dx", s.dx},
                       {"dy", s.dy},
                       {"theta2", s.theta2},
                       {"theta_bar2", s.theta_bar2},
                       {"gamma_bar", s.gamma_bar},
                       {"alpha", s.alpha},
                       {"E", s.energy}});
  w.json_file("compare_report.json", samples);
  w.json_file("compare_summary.json", result.summary);
  return w.finish(wall_clock);
}

std::vector<fs::path> emit_scale(const ScenarioConfig& config, const ScaleResult& result,
                                 const RunOptions& options, double wall_clock) {
  Writer w(config, options);
  std::string csv = "alpha,E,t_lab,dx,dy\n";
  for (std::size_t i = 0; i < result.dx_points.size(); ++i) {
    const auto& p = result.dx_points[i];
    csv += fmt::format("{},{},{},{},{}\n", num(p.alpha), num(p.energy), num(p.t), num(p.value),
                       num(result.dy_points[i].value));
  }
  w.csv("scale_points.csv", csv);
  w.json_file("scale_fit.json", result.summary);
  return w.finish(wall_clock);
}

std::vector<fs::path> emit_residual(const ScenarioConfig& config, const ResidualRunResult& result,
                                    const RunOptions& options, double wall_clock) {
  Writer w(config, options);
  std::string csv = "spread,alpha,R,cells\n";
  for (const auto& p : result.points)
    csv += fmt::format("{},{},{},{}\n", num(p.spread), num(p.alpha), num(p.R), p.cells);
  w.csv("residual_sweep.csv", csv);
  if (result.grid) {
    std::ostringstream grid;
    write_grid_csv(grid, *result.grid, 1, &result.middle);
    w.csv("residual_grid.csv", grid.str());
  }
  w.json_file("residual_summary.json", result.summary);
  return w.finish(wall_clock);
}

std::vector<fs::path> emit_fluid(const ScenarioConfig& config, const FluidRunResult& result,
                                 const RunOptions& options, double wall_clock) {
  Writer w(config, options);
  std::string csv = "spread,alpha,t,gap\n";
  for (const auto& p : result.points)
    for (const auto& s : p.detail.samples)
      csv += fmt::format("{},{},{},{}\n", num(p.spread), num(p.alpha), num(s.t), num(s.gap));
  w.csv("fluid_gap.csv", csv);
  std::string dist = "t,f,f_tilde,gap,traj_gap\n";
  for (const auto& s : result.distribution.samples)
    dist += fmt::format("{},{},{},{},{}\n", num(s.t), num(s.f), num(s.f_tilde), num(s.gap),
                        num(s.traj_gap));
  w.csv("distribution_gap.csv", dist);
  w.json_file("fluid_summary.json", result.summary);
  return w.finish(wall_clock);
}

std::vector<fs::path> emit_simulate(const ScenarioConfig& config, const Trajectory& trajectory,
                                    const RunOptions& options, double wall_clock) {
  Writer w(config, options);
  std::ostringstream csv;
  write_trajectory_csv(csv, trajectory);
  w.csv("trajectory.csv", csv.str());

  // shell drift is measured in the inertial chart
  const auto chart = make_chart(config.chart, config.dimension);
  const Metric eta(config.dimension);
  double drift = 0.0;
  for (const auto& s : trajectory.samples)
    drift = std::max(drift, std::abs(eta.norm2(chart->push_forward(s.x, s.y)) - 1.0));
  const auto& last = trajectory.back();
  w.json_file("simulate_summary.json",
              json{{"experiment", "simulate"},
                   {"chart", config.chart},
                   {"potential", config.potential.name},
                   {"samples", trajectory.samples.size()},
                   {"step", trajectory.h},
                   {"max_shell_drift", drift},
                   {"final", {{"t", last.t},
                              {"x", std::vector<double>(last.x.data(), last.x.data() + last.x.size())},
                              {"y", std::vector<double>(last.y.data(), last.y.data() + last.y.size())}}}});
  return w.finish(wall_clock);
}

}  // namespace avl
