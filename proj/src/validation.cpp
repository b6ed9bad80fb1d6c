#include "avl/validation.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

#include <fmt/format.h>

#include "avl/averaging.hpp"
#include "avl/diagnostics.hpp"
#include "avl/experiments.hpp"
#include "avl/kinetic.hpp"
#include "avl/solver.hpp"

namespace avl {

namespace {

ValidationCheck at_most(std::string name, double value, double threshold) {
  return {std::move(name), value, threshold, std::isfinite(value) && value <= threshold};
}

const std::vector<std::pair<std::string, std::map<std::string, double>>>& catalog_fields() {
  static const std::vector<std::pair<std::string, std::map<std::string, double>>> fields{
      {"zero", {}},
      {"uniform_electric", {{"strength", 0.3}, {"axis", 1}}},
      {"uniform_magnetic", {{"strength", 1.3}, {"axis_a", 1}, {"axis_b", 2}}},
      {"crossed", {{"electric", 0.4}, {"magnetic", 1.1}}},
      {"plane_wave", {{"amplitude", 0.5}, {"frequency", 2.0}}},
      {"polynomial", {{"a", 0.2}, {"b", -0.3}, {"c", 0.25}}},
  };
  return fields;
}

Vector random_unit(std::mt19937_64& rng, int d, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Vector y(d);
  for (int i = 1; i < d; ++i) y[i] = n(rng);
  y[0] = std::sqrt(1.0 + y.tail(d - 1).squaredNorm());
  return y;
}

// gyration in the (1,2) plane; y(0) = (γ, u, 0, 0), F_12 = B
double cyclotron_error(double h) {
  const double B = 1.0, u = std::sqrt(3.0), gamma = 2.0;
  const auto chart = make_chart("inertial", 4);
  const LorentzConnection conn(chart, FieldConfiguration::uniform_magnetic(B));
  const double T = 2.0 * std::numbers::pi / B;
  Vector x0 = Vector::Zero(4), y0(4);
  y0 << gamma, u, 0.0, 0.0;
  const Trajectory tr = integrate(conn, x0, y0, T, h);
  double err = 0.0;
  for (const auto& s : tr.samples) {
    Vector exact(4);
    exact << gamma * s.t, u / B * std::sin(B * s.t), u / B * (std::cos(B * s.t) - 1.0), 0.0;
    err = std::max(err, (s.x - exact).cwiseAbs().maxCoeff());
  }
  return err;
}

// hyperbolic motion from rest along x^1, F_01 = -k
double hyperbolic_error(double h) {
  const double k = 1.0;
  const auto chart = make_chart("inertial", 4);
  const LorentzConnection conn(chart, FieldConfiguration::uniform_electric(k));
  Vector x0 = Vector::Zero(4), y0 = Metric(4).rest_velocity();
  const Trajectory tr = integrate(conn, x0, y0, 1.0, h);
  double err = 0.0;
  for (const auto& s : tr.samples) {
    Vector exact(4);
    exact << std::sinh(k * s.t) / k, (std::cosh(k * s.t) - 1.0) / k, 0.0, 0.0;
    err = std::max(err, (s.x - exact).cwiseAbs().maxCoeff());
  }
  return err;
}

}  // namespace

std::vector<ValidationCheck> run_validate(const ValidationOptions& options) {
  std::vector<ValidationCheck> out;
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const int d = 4;
  const Metric eta(d);
  const auto inertial = make_chart("inertial", d);

  out.push_back(at_most("cyclotron_position_error", cyclotron_error(1e-3), 1e-8));
  out.push_back(at_most("hyperbolic_position_error", hyperbolic_error(1e-3), 1e-8));
  {
    const LorentzConnection conn(inertial, FieldConfiguration::uniform_magnetic(1.0));
    Vector x0 = Vector::Zero(d), y0(d);
    y0 << 2.0, std::sqrt(3.0), 0.0, 0.0;
    const ConvergenceResult c = convergence_order(conn, x0, y0, 2.0 * std::numbers::pi, 0.1);
    out.push_back(at_most("convergence_order_deviation",
                          c.saturated ? INFINITY : std::abs(c.order - 4.0), 0.2));
  }

  {
    // contracted connection against the force form, inertial chart
    double worst = 0.0;
    for (int n = 0; n < 1000; ++n) {
      const auto& [name, params] = catalog_fields()[static_cast<std::size_t>(n) % catalog_fields().size()];
      const FieldConfiguration field = FieldConfiguration::from_catalog(name, params, d);
      Vector x(d);
      for (int i = 0; i < d; ++i) x[i] = 2.0 * unif(rng);
      Vector y = random_unit(rng, d, 2.0) * (0.5 + std::abs(unif(rng)));
      const Vector a = LorentzConnection(inertial, field).acceleration(x, y);
      const Vector ref = -std::sqrt(eta.norm2(y)) * (field.field_mixed(x) * y);
      const double scale = std::max(ref.norm(), y.squaredNorm() * field.field_mixed(x).norm());
      if (scale > 0.0) worst = std::max(worst, (a - ref).norm() / scale);
      else worst = std::max(worst, a.norm());
    }
    out.push_back(at_most("connection_force_equivalence", worst, 1e-10));
  }

  {
    double drift = 0.0;
    for (const auto& [name, params] : catalog_fields()) {
      const LorentzConnection conn(inertial, FieldConfiguration::from_catalog(name, params, d));
      Vector x0 = Vector::Zero(d);
      Vector y0(d);
      y0 << 0.0, 0.3, -0.2, 0.1;
      y0[0] = std::sqrt(1.0 + y0.tail(d - 1).squaredNorm());
      for (const auto& s : integrate(conn, x0, y0, 10.0, 1e-3).samples)
        drift = std::max(drift, std::abs(eta.norm2(s.y) - 1.0));
    }
    out.push_back(at_most("shell_conservation", drift, 1e-9));
  }

  {
    ScenarioConfig c;
    c.potential.name = "crossed";
    c.potential.params = {{"electric", 0.5}, {"magnetic", 1.0}};
    c.ensemble.count = 8;
    c.ensemble.energy = 100.0;
    c.ensemble.spread = 0.0;
    c.ensemble.bunch_width = 0.0;
    c.experiment.probe_offset = 0.0;
    c.experiment.lab_time = 5.0;
    c.experiment.steps = 500;
    c.experiment.time_samples = 11;
    RunOptions run;
    run.workers = options.workers;
    run.flip_third_moment = options.flip_third_moment;
    const CompareResult r = run_compare(c, run);
    double worst = 0.0;
    for (const auto& s : r.report.samples) worst = std::max(worst, s.dx);
    out.push_back(at_most("delta_consistency", worst, 1e-9));
  }

  {
    EnsembleSpec spec;
    spec.count = 500;
    spec.mean_velocity = velocity_with_energy(eta, 3.0, Vector::Unit(3, 0));
    spec.spread = 0.05;
    spec.bunch_width = 0.5;
    spec.seed = options.seed;
    const MomentSet m = compute_moments(sample_ensemble(spec), options.workers);
    const FieldConfiguration field =
        FieldConfiguration::from_catalog("polynomial", {{"a", 0.2}, {"b", -0.3}, {"c", 0.25}}, d);
    auto conn = std::make_shared<AveragedConnection>(inertial, field,
                                                     std::make_shared<ConstantMoments>(m));
    Vector x0(d);
    x0 << 0.3, -0.4, 0.5, 0.1;
    const Rank3 g1 = conn->coefficients(x0, random_unit(rng, d, 1.0));
    const Rank3 g2 = conn->coefficients(x0, random_unit(rng, d, 1.0));
    out.push_back({"averaged_velocity_independence", g1 == g2 ? 0.0 : 1.0, 0.0, g1 == g2});
    double asym = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) asym = std::max(asym, std::abs(g1(i, j, k) - g1(i, k, j)));
    out.push_back(at_most("averaged_symmetry", asym, 0.0));
    const NormalFrame frame = normal_frame(conn, x0);
    out.push_back(at_most("normal_frame_vanishing", frame.transformed_coefficients(x0).max_abs(),
                          1e-10));
  }

  {
    double pd = 0.0, unit = 0.0;
    std::uniform_real_distribution<double> lg(0.0, std::log(1e3));
    for (int n = 0; n < 100; ++n) {
      const double gamma = std::exp(lg(rng));
      Vector dir(d - 1);
      for (int i = 0; i < d - 1; ++i) dir[i] = unif(rng);
      const Vector U = velocity_with_energy(eta, gamma, dir);
      const BarMetric g = bar_metric(MeanVelocity{U});
      Eigen::SelfAdjointEigenSolver<Matrix> es(g.matrix());
      if (!(es.eigenvalues().minCoeff() > 0.0)) pd = 1.0;
      // relative to the conditioning scale |U|²
      unit = std::max(unit, std::abs(g.norm2(U) - 1.0) / U.squaredNorm());
    }
    out.push_back({"bar_metric_positive_definite", pd, 0.0, pd == 0.0});
    out.push_back(at_most("bar_metric_unit_mean", unit, 1e-12));

    double frame = 0.0;
    for (int n = 0; n < 100; ++n) {
      const Vector U = random_unit(rng, d, 3.0);
      const BarMetric g = bar_metric(MeanVelocity{U});
      Vector y(d);
      for (int i = 0; i < d; ++i) y[i] = 2.0 * unif(rng);
      const double ref = 2.0 * eta.dot(y, U) * eta.dot(y, U) - eta.norm2(y);
      frame = std::max(frame, std::abs(g.norm2(y) - ref) / std::max(1.0, std::abs(ref)));
    }
    out.push_back(at_most("bar_metric_frame_identity", frame, 1e-12));

    const BarMetric rest = bar_metric(MeanVelocity{eta.rest_velocity()});
    const double B = 1.7;
    const double op = operator_norm(FieldConfiguration::uniform_magnetic(B).field_mixed(Vector::Zero(d)), rest);
    out.push_back(at_most("operator_norm_uniform_B", std::abs(op - B), 1e-10));
  }

  {
    const BunchProfile profile(d, 1.0, 0.1);
    auto conn = std::make_shared<LorentzConnection>(inertial, FieldConfiguration::uniform_magnetic(1.0));
    const DistributionFunction f(profile, conn, 1e-2, 50.0);
    std::normal_distribution<double> nx(0.0, 1.0), nu(0.0, 0.1);
    double worst = 0.0;
    for (int n = 0; n < 100; ++n) {
      Vector x = Vector::Zero(d), y(d);
      for (int i = 1; i < d; ++i) {
        x[i] = nx(rng);
        y[i] = nu(rng);
      }
      y[0] = std::sqrt(1.0 + y.tail(d - 1).squaredNorm());
      const PhaseState s = advance_to_time(*conn, x, y, 1.0, 1e-2);
      const double v = f.evaluate(s.x, s.y);
      if (v < 0.0) worst = INFINITY;
      worst = std::max(worst, std::abs(v - profile(x, y)));
    }
    out.push_back(at_most("liouville_constancy", worst, 1e-7));
  }

  {
    ScenarioConfig c;
    c.experiment.synthetic = true;
    c.experiment.spread_sweep = {1e-3, 3e-3, 1e-2, 3e-2};
    c.experiment.energy_sweep = {10.0, 30.0, 100.0, 300.0};
    const ScaleResult r = run_scale(c);
    const double model[3] = {2.0, -2.0, 2.0};
    double worst = std::abs(r.dx_fit.prefactor - 7.0) / 7.0;
    for (int v = 0; v < 3; ++v)
      worst = std::max(worst, std::abs(r.dx_fit.exponents[static_cast<std::size_t>(v)].exponent - model[v]));
    out.push_back(at_most("exponent_recovery", r.dx_fit.refused ? INFINITY : worst, 1e-2));
  }
  return out;
}

bool all_passed(const std::vector<ValidationCheck>& checks) {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

void write_validation_csv(std::ostream& out, const std::vector<ValidationCheck>& checks) {
  out << "check,value,threshold,passed\n";
  for (const auto& c : checks)
    out << fmt::format("{},{:.17g},{:.17g},{}\n", c.name, c.value, c.threshold, c.passed ? 1 : 0);
}

nlohmann::json validation_to_json(const std::vector<ValidationCheck>& checks) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : checks)
    rows.push_back({{"check", c.name},
                    {"value", std::isfinite(c.value) ? nlohmann::json(c.value) : nlohmann::json(nullptr)},
                    {"threshold", c.threshold},
                    {"passed", c.passed}});
  return {{"passed", all_passed(checks)}, {"checks", rows}};
}

}  // namespace avl
