#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "avl/averaging.hpp"
#include "avl/diagnostics.hpp"
#include "avl/geometry.hpp"
#include "avl/kinetic.hpp"

namespace avl {

inline constexpr const char* kVersion = "0.1.0";

struct PotentialConfig {
  std::string name = "uniform_magnetic";
  std::map<std::string, double> params;
};

struct EnsembleConfig {
  int count = 2000;
  double energy = 100.0;  // lab <y^0> target of the mean velocity
  double spread = 0.006;  // rest-frame velocity spread
  std::uint64_t seed = 1;
  std::vector<double> direction{0.0, 0.0, 1.0};
  double bunch_width = 1.0;  // rest-frame position spread
  bool antithetic = false;
};

struct IntegratorConfig {
  double step = 1e-3;
  double duration = 1.0;
  bool reproject = false;
};

struct GridConfig {
  int cells = 6;
  double half_width = 2.5;
  double time_step = 0.05;  // slice spacing for the residual stencil
};

struct ExperimentConfig {
  std::string kind = "compare";
  // compare / scale
  double probe_offset = 1e-3;  // rest-frame transverse velocity of the probe
  double lab_time = 10.0;
  int steps = 1000;
  int time_samples = 31;
  std::vector<double> spread_sweep;
  std::vector<double> energy_sweep;
  double floor = 1e-13;
  bool synthetic = false;  // scale: fit a planted model instead of simulating
  // residual / fluid (chart time in the bunch's comoving frame)
  double time = 1.0;
  GridConfig grid;
  double kernel_radius = 0.0;  // 0 selects 3 * bunch_width
  double slice_step = 0.1;     // fluid: spacing of the velocity-field slices
  double start_offset = 0.0;   // fluid: integral-curve start, along x^1, in bunch widths
  double gap_time = 0.5;       // fluid: window of the distribution-gap check
  int gap_samples = 16;
  std::vector<double> start;   // simulate: inertial start event (empty = origin)
};

struct OutputConfig {
  std::string directory = "out";
  std::vector<std::string> formats{"csv", "json"};
};

/// Scenario file contents. Unknown keys anywhere are ConfigErrors.
struct ScenarioConfig {
  int dimension = 4;
  std::string chart = "inertial";
  PotentialConfig potential;
  EnsembleConfig ensemble;
  IntegratorConfig integrator;
  ExperimentConfig experiment;
  OutputConfig output;

  static ScenarioConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  /// Throws ConfigError on non-finite values, N < 1, h <= 0, unsorted
  /// sweeps, unknown chart/potential and the like.
  void validate() const;

  FieldConfiguration field() const;
  Vector direction() const;
};

ScenarioConfig load_config(const std::filesystem::path& path);

/// FNV-1a (64 bit) of the canonical JSON dump of the configuration.
std::string config_hash(const ScenarioConfig& config);

struct RunOptions {
  int workers = 1;
  bool write_csv = true;
  bool write_json = true;
  bool flip_third_moment = false;  // fault injection, validation suite only
};

// ---------------------------------------------------------------- compare / scale

struct CompareResult {
  ComparisonReport report;
  nlohmann::json summary;
  Trajectory lorentz;
  Trajectory averaged;
};

/// Lorentz and averaged autoparallels from the bunch-centroid initial data,
/// with the averaged connection fed by the moments of the Lorentz-transported
/// bunch along the way.
CompareResult run_compare(const ScenarioConfig& config, const RunOptions& options = {});

struct ScaleResult {
  std::vector<ScalingPoint> dx_points;
  std::vector<ScalingPoint> dy_points;
  BoundFit dx_fit;
  BoundFit dy_fit;
  nlohmann::json summary;  // fits plus the raw grid
};

ScaleResult run_scale(const ScenarioConfig& config, const RunOptions& options = {});

nlohmann::json fit_to_json(const BoundFit& fit);

// ---------------------------------------------------------------- kinetic

/// Bunch-rest-frame setup shared by the kinetic experiments.
struct ComovingSetup {
  std::shared_ptr<const Chart> chart;
  FieldConfiguration field;
  std::shared_ptr<const LorentzConnection> lorentz;
};

ComovingSetup comoving_setup(const ScenarioConfig& config);
Ensemble comoving_ensemble(const ScenarioConfig& config, double spread, std::uint64_t seed);

struct ResidualPoint {
  double spread = 0.0;
  double alpha = 0.0;
  double R = 0.0;
  std::size_t cells = 0;
};

struct ResidualRunResult {
  std::vector<ResidualPoint> points;
  ResidualPoint cold;
  double slope = 0.0;
  double slope_stderr = 0.0;
  double resolution_ratio = 0.0;  // R(2 × cells) / R at the middle spread
  nlohmann::json summary;
  std::optional<VelocityFieldGrid> grid;  // the middle-spread grid, for output
  ResidualResult middle;
};

/// One spread: averaged-Vlasov transport, spacetime grid around `time`,
/// fluid residual on the middle slice.
ResidualPoint residual_point(const ScenarioConfig& config, double spread, int cells,
                             const RunOptions& options, VelocityFieldGrid* grid_out = nullptr,
                             ResidualResult* residual_out = nullptr);

ResidualRunResult run_residual(const ScenarioConfig& config, const RunOptions& options = {});

struct FluidPoint {
  double spread = 0.0;
  double alpha = 0.0;
  double gap = 0.0;  // fluid-vs-particle gap at the end of the window
  bool truncated = false;
  FluidComparison detail;
};

struct FluidRunResult {
  std::vector<FluidPoint> points;
  double exponent = 0.0;
  double exponent_stderr = 0.0;
  DistributionGap distribution;
  nlohmann::json summary;
};

FluidPoint fluid_point(const ScenarioConfig& config, double spread, const RunOptions& options);
DistributionGap distribution_gap_run(const ScenarioConfig& config, double spread,
                                     const RunOptions& options);
FluidRunResult run_fluid(const ScenarioConfig& config, const RunOptions& options = {});

// ---------------------------------------------------------------- simulate

Trajectory run_simulate(const ScenarioConfig& config);

// ---------------------------------------------------------------- output

/// Writes the experiment's files into config.output.directory and a
/// manifest.json next to them. Returns the paths written (manifest last).
std::vector<std::filesystem::path> emit_compare(const ScenarioConfig& config,
                                                const CompareResult& result,
                                                const RunOptions& options, double wall_clock);
std::vector<std::filesystem::path> emit_scale(const ScenarioConfig& config,
                                              const ScaleResult& result, const RunOptions& options,
                                              double wall_clock);
std::vector<std::filesystem::path> emit_residual(const ScenarioConfig& config,
                                                 const ResidualRunResult& result,
                                                 const RunOptions& options, double wall_clock);
std::vector<std::filesystem::path> emit_fluid(const ScenarioConfig& config,
                                              const FluidRunResult& result,
                                              const RunOptions& options, double wall_clock);
std::vector<std::filesystem::path> emit_simulate(const ScenarioConfig& config,
                                                 const Trajectory& trajectory,
                                                 const RunOptions& options, double wall_clock);

/// Two-space indented dump; doubles use shortest round-trip form, so the
/// text is a deterministic function of the values.
std::string dump_json(const nlohmann::json& j);

/// Slope and standard error of the least-squares line through (log x, log y).
std::pair<double, double> loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace avl
