#include "avl/solver.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "avl/errors.hpp"

namespace avl {

PhaseState rk4_step(const ConnectionField& conn, const Vector& x, const Vector& y, double h) {
  const Vector k1x = y;
  const Vector k1y = conn.acceleration(x, y);
  const Vector y2 = y + 0.5 * h * k1y;
  const Vector k2y = conn.acceleration(x + 0.5 * h * k1x, y2);
  const Vector y3 = y + 0.5 * h * k2y;
  const Vector k3y = conn.acceleration(x + 0.5 * h * y2, y3);
  const Vector y4 = y + h * k3y;
  const Vector k4y = conn.acceleration(x + h * y3, y4);
  return {x + (h / 6.0) * (k1x + 2.0 * y2 + 2.0 * y3 + y4),
          y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)};
}

namespace {

double shell(const Vector& y) {
  double s = y[0] * y[0];
  for (int i = 1; i < y.size(); ++i) s -= y[i] * y[i];
  return s;
}

void reproject(Vector& y) { y[0] = std::sqrt(1.0 + y.tail(y.size() - 1).squaredNorm()); }

template <class Sink>
void run(const ConnectionField& conn, const Vector& x0, const Vector& y0, double T, double h,
         const IntegratorOptions& options, Sink sink) {
  if (!(h > 0.0) || !std::isfinite(T) || T == 0.0)
    throw DomainError(fmt::format("integrate needs h > 0 and finite non-zero T (h={}, T={})", h, T));
  if (x0.size() != conn.dim() || y0.size() != conn.dim())
    throw DomainError("initial state dimension does not match the connection");
  const bool guard = !conn.affine();
  if (guard && !(shell(y0) > kTimelikeEpsilon))
    throw IntegrationError(fmt::format("initial velocity not timelike, η(y,y) = {:.17g}", shell(y0)),
                           0);

  const auto steps = static_cast<std::size_t>(std::ceil(std::abs(T) / h - 1e-9));
  const double step = T / static_cast<double>(steps);
  PhaseState s{x0, y0};
  sink(0, std::abs(step), s);
  for (std::size_t n = 1; n <= steps; ++n) {
    try {
      s = rk4_step(conn, s.x, s.y, step);
    } catch (const DomainError& e) {
      throw IntegrationError(fmt::format("step {}: {}", n, e.what()), n);
    }
    if (!s.y.allFinite() || !s.x.allFinite())
      throw IntegrationError(fmt::format("step {}: state is not finite", n), n);
    if (guard && !(shell(s.y) > kTimelikeEpsilon))
      throw IntegrationError(
          fmt::format("step {}: velocity left the timelike cone, η(y,y) = {:.17g}", n, shell(s.y)),
          n);
    if (options.reproject) reproject(s.y);
    sink(n, std::abs(step), s);
  }
}

}  // namespace

Trajectory integrate(const ConnectionField& conn, const Vector& x0, const Vector& y0, double T,
                     double h, const IntegratorOptions& options) {
  Trajectory traj;
  traj.conn_id = conn.id();
  const auto steps = static_cast<std::size_t>(std::ceil(std::abs(T) / h - 1e-9));
  const std::size_t every = std::max<std::size_t>(1, options.record_every);
  traj.samples.reserve(steps / every + 2);
  const double sign = T < 0.0 ? -1.0 : 1.0;
  run(conn, x0, y0, T, h, options, [&](std::size_t n, double step, const PhaseState& s) {
    traj.h = step * static_cast<double>(every);
    if (n % every == 0 || n == steps)
      traj.samples.push_back({sign * step * static_cast<double>(n), s.x, s.y});
  });
  return traj;
}

PhaseState integrate_final(const ConnectionField& conn, const Vector& x0, const Vector& y0,
                           double T, double h, const IntegratorOptions& options) {
  PhaseState last;
  run(conn, x0, y0, T, h, options, [&](std::size_t, double, const PhaseState& s) { last = s; });
  return last;
}

PhaseState advance_to_time(const ConnectionField& conn, const Vector& x0, const Vector& y0,
                           double t_target, double h) {
  PhaseState s{x0, y0};
  const double tol = 1e-13 * (1.0 + std::abs(t_target));
  // coarse steps while a full step clearly stays on this side of the target
  for (std::size_t n = 0; n < 100000000; ++n) {
    const double dtau = (t_target - s.x[0]) / s.y[0];
    if (std::abs(dtau) <= 1.5 * h) break;
    s = rk4_step(conn, s.x, s.y, dtau > 0.0 ? h : -h);
  }
  for (int it = 0; it < 8; ++it) {
    const double gap = t_target - s.x[0];
    if (std::abs(gap) <= tol) return s;
    double dtau = gap / s.y[0];
    if (std::abs(dtau) > h) {
      s = rk4_step(conn, s.x, s.y, 0.5 * dtau);
      dtau = (t_target - s.x[0]) / s.y[0];
    }
    s = rk4_step(conn, s.x, s.y, dtau);
  }
  if (std::abs(t_target - s.x[0]) > 1e-10 * (1.0 + std::abs(t_target)))
    throw IntegrationError(fmt::format("could not reach chart time {}", t_target), 0);
  return s;
}

ConvergenceResult convergence_order(const ConnectionField& conn, const Vector& x0,
                                    const Vector& y0, double T, double h) {
  auto final_state = [&](double step) {
    const PhaseState s = integrate_final(conn, x0, y0, T, step);
    Vector z(2 * s.x.size());
    z << s.x, s.y;
    return z;
  };
  const auto z1 = final_state(h), z2 = final_state(h / 2), z4 = final_state(h / 4);
  ConvergenceResult r;
  r.error_h = (z1 - z2).norm();
  r.error_h2 = (z2 - z4).norm();
  const double scale = 1.0 + z4.norm();
  if (r.error_h2 <= 1e-13 * scale || r.error_h <= 1e-13 * scale) {
    r.saturated = true;
    return r;
  }
  r.order = std::log2(r.error_h / r.error_h2);
  return r;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  const int d = trajectory.dim();
  out << "t";
  for (int i = 0; i < d; ++i) out << ",x" << i;
  for (int i = 0; i < d; ++i) out << ",y" << i;
  out << '\n';
  for (const auto& s : trajectory.samples) {
    std::string line = fmt::format("{:.17g}", s.t);
    for (int i = 0; i < d; ++i) line += fmt::format(",{:.17g}", s.x[i]);
    for (int i = 0; i < d; ++i) line += fmt::format(",{:.17g}", s.y[i]);
    line += '\n';
    out << line;
  }
}

}  // namespace avl
