#include "avl/experiments.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "avl/errors.hpp"
#include "avl/parallel.hpp"
#include "avl/solver.hpp"

namespace avl {

using nlohmann::json;

namespace {

double mean_time(const Ensemble& e) {
  double s = 0.0, w = 0.0;
  for (const Particle& p : e.particles) {
    s += p.w * p.x[0];
    w += p.w;
  }
  return s / w;
}

std::vector<double> geometric(double lo, double hi, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k)
    out[static_cast<std::size_t>(k)] = lo * std::pow(hi / lo, static_cast<double>(k) / (n - 1));
  out.back() = hi;
  return out;
}

// Rest-frame unit vector orthogonal to the (spatial) direction n.
Vector transverse(const Vector& n) {
  const int k = static_cast<int>(n.size());
  int axis = 0;
  for (int i = 1; i < k; ++i)
    if (std::abs(n[i]) < std::abs(n[axis])) axis = i;
  Vector w = Vector::Zero(k);
  w[axis] = 1.0;
  const Vector nn = n / n.norm();
  w -= w.dot(nn) * nn;
  return w / w.norm();
}

EnsembleSpec lab_spec(const ScenarioConfig& c, const Vector& U0) {
  EnsembleSpec spec;
  spec.count = c.ensemble.count;
  spec.mean_velocity = U0;
  spec.spread = c.ensemble.spread;
  spec.bunch_width = c.ensemble.bunch_width;
  spec.center = Vector::Zero(c.dimension);
  spec.seed = c.ensemble.seed;
  spec.antithetic = c.ensemble.antithetic;
  return spec;
}

void require_inertial(const ScenarioConfig& c) {
  if (c.chart != "inertial")
    throw ConfigError(fmt::format("experiment '{}' runs in the inertial chart only, got '{}'",
                                  c.experiment.kind, c.chart));
}

}  // namespace

std::pair<double, double> loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("log-log slope needs >= 2 points");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("log-log slope needs positive data");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(y[i]) - my);
  }
  if (sxx == 0.0) throw DomainError("log-log slope needs distinct x values");
  const double slope = sxy / sxx;
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = std::log(y[i]) - my - slope * (std::log(x[i]) - mx);
    rss += r * r;
  }
  const double se = x.size() > 2 ? std::sqrt(rss / (n - 2.0) / sxx) : 0.0;
  return {slope, se};
}

// ---------------------------------------------------------------- compare

CompareResult run_compare(const ScenarioConfig& config, const RunOptions& options) {
  require_inertial(config);
  const int d = config.dimension;
  const Metric eta(d);
  const auto chart = make_chart("inertial", d);
  const FieldConfiguration field = config.field();
  const LorentzConnection lorentz(chart, field);
  const auto& x = config.experiment;

  const Vector U0 = velocity_with_energy(eta, config.ensemble.energy, config.direction());
  Ensemble ens = sample_ensemble(lab_spec(config, U0));

  // probe: centroid event, rest-frame transverse offset boosted with the
  // bunch, kept inside the sampled velocity support
  const Matrix boost = boost_from_rest(eta, U0);
  const Matrix unboost = boost.inverse();
  double support = 0.0;
  for (const Particle& p : ens.particles)
    support = std::max(support, (unboost * p.y).tail(d - 1).norm());
  const double offset = std::min(x.probe_offset, support);
  Vector rest = Vector::Zero(d);
  rest.tail(d - 1) = offset * transverse(config.direction());
  rest[0] = std::sqrt(1.0 + offset * offset);
  Vector probe_y = boost * rest;
  probe_y[0] = std::sqrt(1.0 + probe_y.tail(d - 1).squaredNorm());
  const Vector probe_x = Vector::Zero(d);

  const double T = x.lab_time;
  const double h = T / (config.ensemble.energy * x.steps);
  const std::size_t cap = 100 * static_cast<std::size_t>(x.steps) + 100;
  const double margin = T * 1e-3;

  auto history = std::make_shared<MomentHistory>();
  history->append(mean_time(ens), compute_moments(ens, options.workers));

  Trajectory lor;
  lor.conn_id = lorentz.id();
  lor.h = h;
  lor.samples.push_back({0.0, probe_x, probe_y});

  const std::size_t n = ens.size();
  std::vector<std::size_t> reprojected(parallel::block_count(n), 0);
  std::size_t step = 0;
  // the bunch and the probe advance in lockstep so the averaged probe can
  // read the moments of the bunch it travels with
  while (lor.back().x[0] < T + margin || history->times().back() < T + margin + 4 * h * U0[0]) {
    if (++step > cap) throw IntegrationError("compare: lab time window not reached", step);
    parallel::for_blocks(n, options.workers, [&](std::size_t block, std::size_t b, std::size_t e) {
      for (std::size_t a = b; a < e; ++a) {
        Particle& p = ens.particles[a];
        PhaseState s;
        try {
          s = rk4_step(lorentz, p.x, p.y, h);
        } catch (const DomainError& err) {
          throw IntegrationError(fmt::format("particle {}: {}", a, err.what()), step,
                                 static_cast<long>(a));
        }
        if (std::abs(eta.norm2(s.y) - 1.0) > kShellTolerance) {
          s.y[0] = std::sqrt(1.0 + s.y.tail(d - 1).squaredNorm());
          ++reprojected[block];
        }
        p.x = s.x;
        p.y = s.y;
      }
    });
    history->append(mean_time(ens), compute_moments(ens, options.workers));
    const auto& last = lor.back();
    const PhaseState s = rk4_step(lorentz, last.x, last.y, h);
    lor.samples.push_back({last.t + h, s.x, s.y});
  }

  const AveragedConnection averaged(chart, field, history, options.flip_third_moment);
  Trajectory avg;
  avg.conn_id = averaged.id();
  avg.h = h;
  avg.samples.push_back({0.0, probe_x, probe_y});
  for (std::size_t k = 0; avg.back().x[0] < T + margin; ++k) {
    if (k > cap) throw IntegrationError("compare: averaged probe did not reach the window", k);
    const auto& last = avg.back();
    PhaseState s = rk4_step(averaged, last.x, last.y, h);
    if (config.integrator.reproject) s.y[0] = std::sqrt(1.0 + s.y.tail(d - 1).squaredNorm());
    avg.samples.push_back({last.t + h, s.x, s.y});
  }

  const MomentSet m0 = history->entries().front();
  const BarMetric g0 = bar_metric(mean_velocity(m0));
  Ensemble initial = sample_ensemble(lab_spec(config, U0));
  const double alpha0 = diameter(initial, g0, options.workers).value;
  const double alpha1 = diameter(ens, g0, options.workers).value;

  CompareResult result;
  ComparisonReport& rep = result.report;
  rep.alpha = std::max(alpha0, alpha1);
  rep.energy = m0.energy();
  rep.field_norm = operator_norm(field.field_mixed(probe_x), g0);

  const LabTimeResampler rl(lor), ra(avg);
  std::vector<double> times{0.0};
  for (double t : geometric(T * 1e-3, T, x.time_samples)) times.push_back(t);
  for (double t : times) {
    const PhaseState L = rl.at(t), A = ra.at(t);
    const MomentSet m = history->at_time(t);
    const MeanVelocity U = mean_velocity(m);
    const BarMetric g = bar_metric(U);
    ComparisonSample s;
    s.t_lab = t;
    s.dx = g.norm(A.x - L.x);
    s.dy = g.norm(A.y / A.y[0] - L.y / L.y[0]);
    s.theta2 = spatial_norm2(L.y) - spatial_norm2(m.m1);
    s.theta_bar2 = spatial_norm2(m.m1) - spatial_norm2(A.y);
    s.gamma_bar = U.U[0];
    s.alpha = rep.alpha;
    s.energy = m.energy();
    rep.theta2_sup = std::max(rep.theta2_sup, std::abs(s.theta2));
    rep.theta_bar2_sup = std::max(rep.theta_bar2_sup, std::abs(s.theta_bar2));
    rep.hypothesis4_gap = std::max(rep.hypothesis4_gap, std::abs(s.theta2 - s.theta_bar2));
    rep.samples.push_back(s);
  }

  std::size_t reproj = 0;
  for (std::size_t c : reprojected) reproj += c;
  const auto& final = rep.samples.back();
  result.summary = json{
      {"experiment", "compare"},
      {"dimension", d},
      {"potential", field.name()},
      {"count", static_cast<int>(n)},
      {"spread", config.ensemble.spread},
      {"probe_offset", x.probe_offset},
      {"probe_offset_effective", offset},
      {"lab_time", T},
      {"parameter_step", h},
      {"steps_taken", step},
      {"alpha", rep.alpha},
      {"alpha_initial", alpha0},
      {"alpha_final", alpha1},
      {"energy", rep.energy},
      {"field_norm", rep.field_norm},
      {"dx_final", final.dx},
      {"dy_final", final.dy},
      {"theta2_sup", rep.theta2_sup},
      {"theta_bar2_sup", rep.theta_bar2_sup},
      {"hypothesis4_gap", rep.hypothesis4_gap},
      {"reprojected_particle_steps", reproj},
      {"hypotheses",
       {{"ultra_relativistic", {{"holds", rep.energy >= 10.0}, {"energy", rep.energy}}},
        {"narrow", {{"holds", rep.energy > 10.0 * rep.alpha}, {"energy_over_alpha",
                     rep.alpha > 0.0 ? json(rep.energy / rep.alpha) : json(nullptr)}}},
        {"theta_gap_small",
         {{"holds", rep.hypothesis4_gap < 0.1}, {"gap", rep.hypothesis4_gap}}}}},
  };
  if (!(rep.energy > 10.0 * rep.alpha)) result.summary["warning"] = "E <= 10 alpha";
  result.lorentz = std::move(lor);
  result.averaged = std::move(avg);
  return result;
}

// ---------------------------------------------------------------- scale

json fit_to_json(const BoundFit& fit) {
  json j{{"refused", fit.refused}};
  if (fit.refused) {
    j["floor"] = fit.floor;
    return j;
  }
  json ex = json::array();
  for (const auto& e : fit.exponents)
    ex.push_back({{"variable", e.variable},
                  {"exponent", e.fitted ? json(e.exponent) : json(nullptr)},
                  {"stderr", e.fitted ? json(e.stderr_) : json(nullptr)},
                  {"prefactor", fit.prefactor}});
  j["exponents"] = ex;
  j["prefactor"] = fit.prefactor;
  j["intercept"] = fit.intercept;
  j["rms_log_residual"] = fit.rms_log_residual;
  return j;
}

ScaleResult run_scale(const ScenarioConfig& config, const RunOptions& options) {
  const auto& x = config.experiment;
  ScaleResult result;
  json raw = json::array();

  if (x.synthetic) {
    // planted model, fits must return it exactly
    const std::vector<double> alphas =
        x.spread_sweep.empty() ? std::vector<double>{1e-3, 1e-2, 1e-1} : x.spread_sweep;
    const std::vector<double> energies =
        x.energy_sweep.empty() ? std::vector<double>{10.0, 100.0, 1000.0} : x.energy_sweep;
    const auto ts = geometric(x.lab_time * 1e-3, x.lab_time, x.time_samples);
    for (double a : alphas)
      for (double E : energies)
        for (double t : ts) {
          result.dx_points.push_back({a, E, t, 7.0 * a * a / (E * E) * t * t});
          result.dy_points.push_back({a, E, t, 7.0 * a * a / (E * E) * t});
        }
  } else {
    auto add = [&](const char* sweep, const CompareResult& r, bool all_times) {
      for (const auto& s : r.report.samples) {
        if (!(s.t_lab > 0.0)) continue;
        if (!all_times && &s != &r.report.samples.back()) continue;
        result.dx_points.push_back({r.report.alpha, r.report.energy, s.t_lab, s.dx});
        result.dy_points.push_back({r.report.alpha, r.report.energy, s.t_lab, s.dy});
        raw.push_back({{"sweep", sweep},
                       {"alpha", r.report.alpha},
                       {"energy", r.report.energy},
                       {"t_lab", s.t_lab},
                       {"dx", s.dx},
                       {"dy", s.dy}});
      }
    };
    add("time", run_compare(config, options), true);
    for (double s : x.spread_sweep) {
      ScenarioConfig c = config;
      c.ensemble.spread = s;
      add("alpha", run_compare(c, options), false);
    }
    for (double E : x.energy_sweep) {
      ScenarioConfig c = config;
      c.ensemble.energy = E;
      add("energy", run_compare(c, options), false);
    }
  }

  result.dx_fit = bound_evaluation(result.dx_points, 2.0, -2.0, 2.0, x.floor);
  result.dy_fit = bound_evaluation(result.dy_points, 2.0, -2.0, 1.0, x.floor);
  result.summary = json{
      {"experiment", "scale"},
      {"synthetic", x.synthetic},
      {"floor", x.floor},
      {"window", {{"t_min", x.lab_time * 1e-3}, {"t_max", x.lab_time}}},
      {"decades",
       {{"alpha", decades(result.dx_points, &ScalingPoint::alpha)},
        {"energy", decades(result.dx_points, &ScalingPoint::energy)},
        {"t", decades(result.dx_points, &ScalingPoint::t)}}},
      {"dx", fit_to_json(result.dx_fit)},
      {"dy", fit_to_json(result.dy_fit)},
      {"model", {{"dx", {2.0, -2.0, 2.0}}, {"dy", {2.0, -2.0, 1.0}}}},
  };
  if (!x.synthetic) result.summary["points"] = raw;
  return result;
}

// ---------------------------------------------------------------- kinetic

ComovingSetup comoving_setup(const ScenarioConfig& config) {
  require_inertial(config);
  const Metric eta(config.dimension);
  const Vector U0 = velocity_with_energy(eta, config.ensemble.energy, config.direction());
  ComovingSetup s{std::make_shared<LorentzFrameChart>(boost_from_rest(eta, U0),
                                                      Vector::Zero(config.dimension)),
                  config.field(), nullptr};
  s.lorentz = std::make_shared<LorentzConnection>(s.chart, s.field);
  return s;
}

Ensemble comoving_ensemble(const ScenarioConfig& config, double spread, std::uint64_t seed) {
  EnsembleSpec spec;
  spec.count = config.ensemble.count;
  spec.mean_velocity = Metric(config.dimension).rest_velocity();
  spec.spread = spread;
  spec.bunch_width = config.ensemble.bunch_width;
  spec.center = Vector::Zero(config.dimension);
  spec.seed = seed;
  spec.antithetic = config.ensemble.antithetic;
  return sample_ensemble(spec);
}

ResidualPoint residual_point(const ScenarioConfig& config, double spread, int cells,
                             const RunOptions& options, VelocityFieldGrid* grid_out,
                             ResidualResult* residual_out) {
  const auto& x = config.experiment;
  const double h = config.integrator.step;
  const double T = x.time, dt = x.grid.time_step;
  if (!(T - dt > 0.0)) throw ConfigError("experiment.time must exceed experiment.grid.time_step");
  const ComovingSetup setup = comoving_setup(config);
  const Ensemble ens = comoving_ensemble(config, spread, config.ensemble.seed);

  SelfConsistentRun run;
  try {
    run = transport_self_consistent(setup.chart, setup.field, ens, 1.1 * (T + dt) + 4 * h, h,
                                    options.workers);
  } catch (const std::exception& e) {
    throw IntegrationError(fmt::format("spread {}: {}", spread, e.what()), 0);
  }
  const AveragedConnection flow(setup.chart, setup.field, run.history);
  GridSpec spec{cells, x.grid.half_width, {T - dt, T, T + dt}};
  const auto snaps = snapshots(flow, ens, spec.times, h, options.workers);
  VelocityFieldGrid grid = build_velocity_grid(snaps, spec, options.workers);

  const double radius = x.kernel_radius > 0.0 ? x.kernel_radius : 3.0 * config.ensemble.bunch_width;
  auto middle = std::make_shared<const Ensemble>(snaps[1]);
  const AveragedConnection local(setup.chart, setup.field,
                                 std::make_shared<KernelMoments>(middle, radius));
  ResidualResult res;
  try {
    res = fluid_residual(local, grid, 1);
  } catch (const DomainError& e) {
    throw DomainError(fmt::format("spread {}: {}", spread, e.what()));
  }

  ResidualPoint p;
  p.spread = spread;
  p.alpha = diameter(snaps[1], bar_metric(mean_velocity(compute_moments(snaps[1], options.workers))),
                     options.workers)
                .value;
  p.R = res.R;
  p.cells = res.cells.size();
  if (grid_out) *grid_out = std::move(grid);
  if (residual_out) *residual_out = std::move(res);
  return p;
}

ResidualRunResult run_residual(const ScenarioConfig& config, const RunOptions& options) {
  const auto& x = config.experiment;
  if (x.spread_sweep.size() < 2) throw ConfigError("residual needs >= 2 entries in spread_sweep");
  ResidualRunResult out;
  const std::size_t mid = x.spread_sweep.size() / 2;
  for (std::size_t i = 0; i < x.spread_sweep.size(); ++i) {
    if (i == mid) {
      VelocityFieldGrid grid(config.dimension, GridSpec{1, 1.0, {0.0}});
      out.points.push_back(
          residual_point(config, x.spread_sweep[i], x.grid.cells, options, &grid, &out.middle));
      out.grid = std::move(grid);
    } else {
      out.points.push_back(residual_point(config, x.spread_sweep[i], x.grid.cells, options));
    }
  }
  out.cold = residual_point(config, 0.0, x.grid.cells, options);

  std::vector<double> a, r;
  for (const auto& p : out.points) {
    a.push_back(p.alpha);
    r.push_back(p.R);
  }
  std::tie(out.slope, out.slope_stderr) = loglog_slope(a, r);
  const ResidualPoint fine =
      residual_point(config, x.spread_sweep[mid], 2 * x.grid.cells, options);
  out.resolution_ratio = fine.R / out.points[mid].R;

  json pts = json::array();
  for (const auto& p : out.points)
    pts.push_back({{"spread", p.spread}, {"alpha", p.alpha}, {"R", p.R}, {"cells", p.cells}});
  out.summary = json{
      {"experiment", "residual"},
      {"time", x.time},
      {"time_step", x.grid.time_step},
      {"grid", {{"cells", x.grid.cells}, {"half_width", x.grid.half_width}}},
      {"kernel_radius", x.kernel_radius > 0.0 ? x.kernel_radius : 3.0 * config.ensemble.bunch_width},
      {"points", pts},
      {"slope", out.slope},
      {"slope_stderr", out.slope_stderr},
      {"cold", {{"R", out.cold.R}, {"cells", out.cold.cells}}},
      {"resolution",
       {{"cells", 2 * x.grid.cells},
        {"spread", x.spread_sweep[mid]},
        {"R", fine.R},
        {"ratio", out.resolution_ratio}}},
  };
  return out;
}

FluidPoint fluid_point(const ScenarioConfig& config, double spread, const RunOptions& options) {
  const auto& x = config.experiment;
  const double h = config.integrator.step;
  const ComovingSetup setup = comoving_setup(config);
  const Ensemble ens = comoving_ensemble(config, spread, config.ensemble.seed);

  std::vector<double> times;
  // one slice past the window so the integral curve can reach x.time inside the hull
  const auto slices = static_cast<int>(std::ceil(x.time / x.slice_step - 1e-9)) + 1;
  for (int k = 0; k <= slices; ++k) times.push_back(k * x.slice_step);
  const auto snaps = snapshots(*setup.lorentz, ens, times, h, options.workers);
  const VelocityFieldGrid grid =
      build_velocity_grid(snaps, GridSpec{x.grid.cells, x.grid.half_width, times}, options.workers);

  Vector start = Vector::Zero(config.dimension);
  start[1] = x.start_offset * config.ensemble.bunch_width;
  std::vector<double> sample_times(times.begin() + 1, times.end() - 1);
  sample_times.back() = std::min(sample_times.back(), x.time);

  FluidPoint p;
  p.spread = spread;
  p.alpha = diameter(ens, bar_metric(mean_velocity(compute_moments(ens, options.workers))),
                     options.workers)
                .value;
  p.detail = fluid_vs_particle(grid, *setup.lorentz, start, sample_times, h);
  p.truncated = p.detail.truncated;
  p.gap = p.detail.samples.empty() ? 0.0 : p.detail.samples.back().gap;
  return p;
}

DistributionGap distribution_gap_run(const ScenarioConfig& config, double spread,
                                     const RunOptions& options) {
  const auto& x = config.experiment;
  const double h = config.integrator.step;
  const int d = config.dimension;
  const ComovingSetup setup = comoving_setup(config);
  const Ensemble ens = comoving_ensemble(config, spread, config.ensemble.seed);
  const double window = 1.3 * x.gap_time + 4 * h;
  const SelfConsistentRun run =
      transport_self_consistent(setup.chart, setup.field, ens, window, h, options.workers);
  auto averaged = std::make_shared<AveragedConnection>(setup.chart, setup.field, run.history);

  const BunchProfile profile(d, config.ensemble.bunch_width, spread);
  const double box = 2.0 * kProfileCutoff * config.ensemble.bunch_width + 2.0 * window;
  const DistributionFunction f(profile, setup.lorentz, h, box);
  const DistributionFunction f_tilde(profile, averaged, h, box);

  // probe at the peak of f0
  const Vector x0 = Vector::Zero(d);
  const Vector y0 = Metric(d).rest_velocity();
  const Trajectory lor = integrate(*setup.lorentz, x0, y0, window, h);
  const Trajectory avg = integrate(*averaged, x0, y0, window, h);
  return distribution_gap(f, f_tilde, lor, avg, geometric(x.gap_time * 1e-2, x.gap_time,
                                                          x.gap_samples));
}

FluidRunResult run_fluid(const ScenarioConfig& config, const RunOptions& options) {
  const auto& x = config.experiment;
  if (x.spread_sweep.size() < 2) throw ConfigError("fluid needs >= 2 entries in spread_sweep");
  FluidRunResult out;
  std::vector<double> a, g;
  json pts = json::array();
  for (double s : x.spread_sweep) {
    FluidPoint p = fluid_point(config, s, options);
    if (!p.truncated && p.gap > 0.0) {
      a.push_back(p.alpha);
      g.push_back(p.gap);
    }
    pts.push_back({{"spread", p.spread},
                   {"alpha", p.alpha},
                   {"gap", p.gap},
                   {"truncated", p.truncated},
                   {"window_end", p.detail.window_end}});
    out.points.push_back(std::move(p));
  }
  bool fitted = a.size() >= 2;
  if (fitted) std::tie(out.exponent, out.exponent_stderr) = loglog_slope(a, g);
  out.distribution = distribution_gap_run(config, config.ensemble.spread, options);

  json gap{{"spread", config.ensemble.spread},
           {"window", x.gap_time},
           {"refused", out.distribution.refused}};
  if (!out.distribution.refused) {
    gap["C_M"] = out.distribution.slope;
    gap["fit_residual"] = out.distribution.fit_residual;
  }
  out.summary = json{
      {"experiment", "fluid"},
      {"time", x.time},
      {"slice_step", x.slice_step},
      {"start_offset", x.start_offset},
      {"grid", {{"cells", x.grid.cells}, {"half_width", x.grid.half_width}}},
      {"points", pts},
      {"exponent", fitted ? json(out.exponent) : json(nullptr)},
      {"exponent_stderr", fitted ? json(out.exponent_stderr) : json(nullptr)},
      {"distribution_gap", gap},
  };
  return out;
}

// ---------------------------------------------------------------- simulate

Trajectory run_simulate(const ScenarioConfig& config) {
  const int d = config.dimension;
  const auto chart = make_chart(config.chart, d);
  const LorentzConnection lorentz(chart, config.field());
  const Vector X = config.experiment.start.empty()
                       ? Vector::Zero(d)
                       : Vector(Vector::Map(config.experiment.start.data(), d));
  const Vector Y = velocity_with_energy(Metric(d), config.ensemble.energy, config.direction());
  const Vector x0 = chart->from_inertial(X);
  if (!x0.allFinite() || !chart->jacobian(x0).allFinite() ||
      std::abs(chart->jacobian(x0).determinant()) < 1e-12)
    throw ConfigError(fmt::format("start event is singular in the '{}' chart", config.chart));
  const Vector y0 = chart->pull_back(x0, Y);
  return integrate(lorentz, x0, y0, config.integrator.duration, config.integrator.step);
}

}  // namespace avl
