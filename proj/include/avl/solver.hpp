#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "avl/geometry.hpp"

namespace avl {

struct TrajectorySample {
  double t = 0.0;  // parameter (proper) time
  Vector x;
  Vector y;
};

struct Trajectory {
  std::string conn_id;
  double h = 0.0;
  std::vector<TrajectorySample> samples;

  int dim() const { return samples.empty() ? 0 : static_cast<int>(samples.front().x.size()); }
  const TrajectorySample& back() const { return samples.back(); }
};

struct IntegratorOptions {
  /// Re-project y onto η(y,y) = 1 after every step (averaged runs only).
  bool reproject = false;
  /// Keep every n-th step in the trajectory (the final state is always kept).
  std::size_t record_every = 1;
};

struct PhaseState {
  Vector x;
  Vector y;
};

/// One classical fourth-order Runge-Kutta step of ẋ = y, ẏ = a(x, y).
PhaseState rk4_step(const ConnectionField& conn, const Vector& x, const Vector& y, double h);

/// Integrates the autoparallel system over parameter time T (negative T
/// integrates backwards). The step count is ceil(|T|/h) and the spacing is
/// |T| divided by that count, so the last sample lands on T exactly.
/// For non-affine connections a step that leaves the timelike cone throws
/// IntegrationError carrying the step index.
Trajectory integrate(const ConnectionField& conn, const Vector& x0, const Vector& y0, double T,
                     double h, const IntegratorOptions& options = {});

/// Final state only; same stepping as integrate().
PhaseState integrate_final(const ConnectionField& conn, const Vector& x0, const Vector& y0,
                           double T, double h, const IntegratorOptions& options = {});

/// Advances until the chart time x^0 equals `t_target`: whole steps of
/// size at most h, then parameter-time corrections Δτ = (t - x^0)/y^0
/// until |x^0 - t| <= 1e-13 (1 + |t|).
PhaseState advance_to_time(const ConnectionField& conn, const Vector& x0, const Vector& y0,
                           double t_target, double h);

struct ConvergenceResult {
  bool saturated = false;
  double order = 0.0;  // meaningful only if !saturated
  double error_h = 0.0;    // |z(h) - z(h/2)|
  double error_h2 = 0.0;   // |z(h/2) - z(h/4)|
};

/// Self-convergence estimate from final states at h, h/2, h/4:
/// p = log2(|z_h - z_h/2| / |z_h/2 - z_h/4|). Saturated when the finer
/// difference is below 1e-13 of the state scale.
ConvergenceResult convergence_order(const ConnectionField& conn, const Vector& x0,
                                    const Vector& y0, double T, double h);

/// Columns t, x0..x{d-1}, y0..y{d-1} with 17 significant digits.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);

}  // namespace avl
