#include "avl/kinetic.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "avl/errors.hpp"
#include "avl/parallel.hpp"

namespace avl {

// ---------------------------------------------------------------- Distribution functions

BunchProfile::BunchProfile(int dim, double width, double spread)
    : dim_(dim), width_(width), spread_(spread) {
  if (!(width > 0.0) || !(spread > 0.0))
    throw DomainError("bunch profile needs positive width and spread");
}

double BunchProfile::operator()(const Vector& x, const Vector& y) const {
  double r2 = 0.0, u2 = 0.0;
  for (int i = 1; i < dim_; ++i) {
    r2 += x[i] * x[i];
    u2 += y[i] * y[i];
  }
  const double cut = kProfileCutoff * kProfileCutoff;
  if (r2 > cut * width_ * width_ || u2 > cut * spread_ * spread_) return 0.0;
  return std::exp(-0.5 * r2 / (width_ * width_) - 0.5 * u2 / (spread_ * spread_));
}

DistributionFunction::DistributionFunction(BunchProfile initial,
                                           std::shared_ptr<const ConnectionField> conn, double h,
                                           double box_half_width)
    : initial_(initial), conn_(std::move(conn)), h_(h), box_(box_half_width) {}

double DistributionFunction::evaluate(const Vector& x, const Vector& y) const {
  auto inside = [this](const Vector& z) {
    for (int i = 1; i < z.size(); ++i)
      if (std::abs(z[i]) > box_) return false;
    return true;
  };
  if (!inside(x)) throw OutOfDomainError("evaluation point outside the distribution box");
  if (x[0] == 0.0) return initial_(x, y);
  const PhaseState back = advance_to_time(*conn_, x, y, 0.0, h_);
  if (!inside(back.x))
    throw OutOfDomainError(
        fmt::format("backward characteristic left the box |x| <= {} before reaching t = 0", box_));
  return initial_(back.x, back.y);
}

double DistributionFunction::evaluate(const Vector& x, const Vector& y, double t) const {
  Vector event = x;
  event[0] = t;
  return evaluate(event, y);
}

// ---------------------------------------------------------------- Transport

Ensemble transport_ensemble(const ConnectionField& conn, const Ensemble& ensemble, double T,
                            double h, int workers, TransportStats* stats) {
  Ensemble out = ensemble;
  const std::size_t n = ensemble.size();
  std::vector<std::size_t> reprojected(parallel::block_count(n), 0);
  const bool lorentz = !conn.affine();
  parallel::for_blocks(n, workers, [&](std::size_t block, std::size_t begin, std::size_t end) {
    for (std::size_t a = begin; a < end; ++a) {
      Particle& p = out.particles[a];
      PhaseState s;
      try {
        s = integrate_final(conn, p.x, p.y, T, h);
      } catch (const IntegrationError& e) {
        throw IntegrationError(fmt::format("particle {}: {}", a, e.what()), e.step(),
                               static_cast<long>(a));
      }
      if (lorentz) {
        const double drift = Metric(conn.dim()).norm2(s.y) - 1.0;
        if (std::abs(drift) > kShellTolerance) {
          s.y[0] = std::sqrt(1.0 + s.y.tail(s.y.size() - 1).squaredNorm());
          ++reprojected[block];
        }
      }
      p.x = s.x;
      p.y = s.y;
    }
  });
  if (stats) {
    stats->reprojected = 0;
    for (std::size_t c : reprojected) stats->reprojected += c;
  }
  return out;
}

namespace {

double mean_time(const Ensemble& e) {
  // fixed-order sum, cheap enough to do serially
  double s = 0.0, w = 0.0;
  for (const Particle& p : e.particles) {
    s += p.w * p.x[0];
    w += p.w;
  }
  return s / w;
}

}  // namespace

SelfConsistentRun transport_self_consistent(std::shared_ptr<const Chart> chart,
                                            const FieldConfiguration& field,
                                            const Ensemble& ensemble, double T, double h,
                                            int workers) {
  if (!(T > 0.0) || !(h > 0.0)) throw DomainError("self-consistent transport needs T, h > 0");
  const auto steps = static_cast<std::size_t>(std::ceil(T / h - 1e-9));
  const double step = T / static_cast<double>(steps);
  const std::size_t n = ensemble.size();

  SelfConsistentRun run;
  run.history = std::make_shared<MomentHistory>();
  Ensemble state = ensemble;

  // derivative of every particle under the moments of `stage`
  auto derivative = [&](const Ensemble& stage, std::vector<Vector>& dx, std::vector<Vector>& dy) {
    const MomentSet m = compute_moments(stage, workers);
    parallel::for_blocks(n, workers, [&](std::size_t, std::size_t begin, std::size_t end) {
      for (std::size_t a = begin; a < end; ++a) {
        const Particle& p = stage.particles[a];
        dx[a] = p.y;
        dy[a] = averaged_acceleration(*chart, field, m, p.x, p.y);
      }
    });
    return m;
  };
  auto offset = [&](const Ensemble& base, const std::vector<Vector>& dx,
                    const std::vector<Vector>& dy, double c) {
    Ensemble e = base;
    for (std::size_t a = 0; a < n; ++a) {
      e.particles[a].x += c * dx[a];
      e.particles[a].y += c * dy[a];
    }
    return e;
  };

  std::vector<Vector> k1x(n), k1y(n), k2x(n), k2y(n), k3x(n), k3y(n), k4x(n), k4y(n);
  for (std::size_t s = 0; s < steps; ++s) {
    const MomentSet m0 = derivative(state, k1x, k1y);
    run.history->append(mean_time(state), m0);
    derivative(offset(state, k1x, k1y, 0.5 * step), k2x, k2y);
    derivative(offset(state, k2x, k2y, 0.5 * step), k3x, k3y);
    derivative(offset(state, k3x, k3y, step), k4x, k4y);
    for (std::size_t a = 0; a < n; ++a) {
      Particle& p = state.particles[a];
      p.x += (step / 6.0) * (k1x[a] + 2.0 * k2x[a] + 2.0 * k3x[a] + k4x[a]);
      p.y += (step / 6.0) * (k1y[a] + 2.0 * k2y[a] + 2.0 * k3y[a] + k4y[a]);
      if (!p.y.allFinite())
        throw IntegrationError(fmt::format("particle {} not finite at step {}", a, s + 1), s + 1,
                               static_cast<long>(a));
    }
  }
  run.history->append(mean_time(state), compute_moments(state, workers));
  run.final = std::move(state);
  return run;
}

std::vector<Ensemble> snapshots(const ConnectionField& conn, const Ensemble& ensemble,
                                const std::vector<double>& times, double h, int workers) {
  std::vector<Ensemble> out;
  Ensemble state = ensemble;
  for (double t : times) {
    parallel::for_blocks(state.size(), workers,
                         [&](std::size_t, std::size_t begin, std::size_t end) {
                           for (std::size_t a = begin; a < end; ++a) {
                             Particle& p = state.particles[a];
                             PhaseState s;
                             try {
                               s = advance_to_time(conn, p.x, p.y, t, h);
                             } catch (const std::exception& e) {
                               throw IntegrationError(
                                   fmt::format("particle {} to t = {}: {}", a, t, e.what()), 0,
                                   static_cast<long>(a));
                             }
                             p.x = s.x;
                             p.y = s.y;
                           }
                         });
    out.push_back(state);
  }
  return out;
}

// ---------------------------------------------------------------- Velocity grid

VelocityFieldGrid::VelocityFieldGrid(int dim, const GridSpec& spec)
    : dim_(dim), spec_(spec), spacing_(2.0 * spec.half_width / spec.cells) {
  if (spec.cells < 1 || !(spec.half_width > 0.0) || spec.times.empty())
    throw DomainError("grid needs cells >= 1, half_width > 0 and at least one time slice");
  per_slice_ = 1;
  for (int a = 1; a < dim; ++a) per_slice_ *= static_cast<std::size_t>(spec.cells);
  cells_.resize(per_slice_ * spec.times.size());
  for (auto& c : cells_) c.V = Vector::Zero(dim);
}

std::size_t VelocityFieldGrid::index(int, const std::vector<int>& multi) const {
  std::size_t flat = 0;
  for (int m : multi) flat = flat * static_cast<std::size_t>(spec_.cells) + static_cast<std::size_t>(m);
  return flat;
}

std::vector<int> VelocityFieldGrid::multi_index(std::size_t flat) const {
  std::vector<int> multi(static_cast<std::size_t>(dim_ - 1));
  for (int a = dim_ - 2; a >= 0; --a) {
    multi[static_cast<std::size_t>(a)] = static_cast<int>(flat % static_cast<std::size_t>(spec_.cells));
    flat /= static_cast<std::size_t>(spec_.cells);
  }
  return multi;
}

Vector VelocityFieldGrid::center(int slice, const std::vector<int>& multi) const {
  Vector x(dim_);
  x[0] = spec_.times[static_cast<std::size_t>(slice)];
  for (int a = 1; a < dim_; ++a)
    x[a] = -spec_.half_width + (multi[static_cast<std::size_t>(a - 1)] + 0.5) * spacing_;
  return x;
}

bool VelocityFieldGrid::interpolate(const Vector& x, Vector& u) const {
  const auto& times = spec_.times;
  const int nt = static_cast<int>(times.size());
  // time stencil: the slice itself, linear between two slices, or cubic
  // Lagrange over four slices around x^0 (the flow is smooth in time while
  // slices are expensive)
  std::vector<int> ts;
  std::vector<double> tw;
  if (nt == 1) {
    if (std::abs(x[0] - times[0]) > 1e-12) return false;
    ts = {0};
    tw = {1.0};
  } else {
    if (x[0] < times.front() || x[0] > times.back()) return false;
    int s0 = static_cast<int>(std::upper_bound(times.begin(), times.end(), x[0]) - times.begin()) - 1;
    s0 = std::clamp(s0, 0, nt - 2);
    const int width = nt >= 4 ? 4 : 2;
    const int first = std::clamp(s0 - (width / 2 - 1), 0, nt - width);
    for (int k = 0; k < width; ++k) {
      double w = 1.0;
      const double tk = times[static_cast<std::size_t>(first + k)];
      for (int m = 0; m < width; ++m) {
        if (m == k) continue;
        const double tm = times[static_cast<std::size_t>(first + m)];
        w *= (x[0] - tm) / (tk - tm);
      }
      ts.push_back(first + k);
      tw.push_back(w);
    }
  }
  const int n = spec_.cells;
  if (n < 2) return false;
  std::vector<int> base(static_cast<std::size_t>(dim_ - 1));
  std::vector<double> frac(static_cast<std::size_t>(dim_ - 1));
  for (int a = 1; a < dim_; ++a) {
    const double g = (x[a] + spec_.half_width) / spacing_ - 0.5;
    if (g < 0.0 || g > n - 1) return false;
    const int i0 = std::min(static_cast<int>(std::floor(g)), n - 2);
    base[static_cast<std::size_t>(a - 1)] = i0;
    frac[static_cast<std::size_t>(a - 1)] = g - i0;
  }
  Vector sum = Vector::Zero(dim_);
  const int space_corners = 1 << (dim_ - 1);
  std::vector<int> multi(base.size());
  for (std::size_t tc = 0; tc < ts.size(); ++tc) {
    const double wt = tw[tc];
    for (int sc = 0; sc < space_corners; ++sc) {
      double w = wt;
      for (std::size_t a = 0; a < base.size(); ++a) {
        const int bit = (sc >> a) & 1;
        multi[a] = base[a] + bit;
        w *= bit ? frac[a] : 1.0 - frac[a];
      }
      const GridCell& c = cell(ts[tc], index(0, multi));
      if (c.empty) return false;
      sum += w * c.V;
    }
  }
  const double n2 = Metric(dim_).norm2(sum);
  if (!(n2 > 0.0)) return false;
  u = sum / std::sqrt(n2);
  return true;
}

VelocityFieldGrid build_velocity_grid(const std::vector<Ensemble>& snaps, const GridSpec& spec,
                                      int workers) {
  if (snaps.size() != spec.times.size())
    throw DomainError("one snapshot per grid time slice is required");
  const int d = snaps.front().dim();
  VelocityFieldGrid grid(d, spec);
  const int n = spec.cells;
  const double L = spec.half_width, D = grid.spacing();
  const std::size_t per = grid.cells_per_slice();
  const int corners = 1 << (d - 1);

  for (std::size_t k = 0; k < snaps.size(); ++k) {
    const Ensemble& e = snaps[k];
    const std::size_t count = e.size();
    const std::size_t blocks = parallel::block_count(count);
    // per block: sums of w*y (d entries) and w, per cell
    std::vector<std::vector<double>> partial(blocks);
    parallel::for_blocks(count, workers, [&](std::size_t block, std::size_t begin, std::size_t end) {
      std::vector<double>& acc = partial[block];
      acc.assign(per * static_cast<std::size_t>(d + 1), 0.0);
      std::vector<int> base(static_cast<std::size_t>(d - 1));
      std::vector<double> frac(static_cast<std::size_t>(d - 1));
      std::vector<int> multi(static_cast<std::size_t>(d - 1));
      for (std::size_t a = begin; a < end; ++a) {
        const Particle& p = e.particles[a];
        for (int i = 1; i < d; ++i) {
          const double g = (p.x[i] + L) / D - 0.5;
          const int i0 = static_cast<int>(std::floor(g));
          base[static_cast<std::size_t>(i - 1)] = i0;
          frac[static_cast<std::size_t>(i - 1)] = g - i0;
        }
        for (int c = 0; c < corners; ++c) {
          double w = p.w;
          bool ok = true;
          for (std::size_t i = 0; i < base.size(); ++i) {
            const int bit = (c >> i) & 1;
            multi[i] = base[i] + bit;
            if (multi[i] < 0 || multi[i] >= n) ok = false;
            w *= bit ? frac[i] : 1.0 - frac[i];
          }
          if (!ok || w == 0.0) continue;
          const std::size_t flat = grid.index(0, multi) * static_cast<std::size_t>(d + 1);
          for (int i = 0; i < d; ++i) acc[flat + static_cast<std::size_t>(i)] += w * p.y[i];
          acc[flat + static_cast<std::size_t>(d)] += w;
        }
      }
    });
    std::vector<double> total(per * static_cast<std::size_t>(d + 1), 0.0);
    for (const auto& acc : partial)
      for (std::size_t i = 0; i < total.size(); ++i) total[i] += acc[i];

    double total_weight = 0.0;
    for (const Particle& p : e.particles) total_weight += p.w;

    // nearest-cell membership for the per-cell diameter
    std::vector<std::vector<Vector>> members(per);
    for (const Particle& p : e.particles) {
      std::vector<int> multi(static_cast<std::size_t>(d - 1));
      bool ok = true;
      for (int i = 1; i < d; ++i) {
        const int m = static_cast<int>(std::floor((p.x[i] + L) / D));
        if (m < 0 || m >= n) ok = false;
        multi[static_cast<std::size_t>(i - 1)] = m;
      }
      if (ok) members[grid.index(0, multi)].push_back(p.y);
    }

    for (std::size_t c = 0; c < per; ++c) {
      GridCell& cell = grid.cell(static_cast<int>(k), c);
      const double w = total[c * static_cast<std::size_t>(d + 1) + static_cast<std::size_t>(d)];
      cell.weight = w;
      cell.empty = !(w >= 1e-6 * total_weight) || w == 0.0;
      if (cell.empty) continue;
      Vector mean(d);
      for (int i = 0; i < d; ++i) mean[i] = total[c * static_cast<std::size_t>(d + 1) + static_cast<std::size_t>(i)] / w;
      const MeanVelocity U = mean_velocity(mean);
      if (U.zero()) {
        cell.empty = true;
        continue;
      }
      cell.V = U.U;
      cell.alpha = members[c].size() > 1 ? diameter(members[c], bar_metric(U)).value : 0.0;
    }
  }
  return grid;
}

ResidualResult fluid_residual(const ConnectionField& averaged, const VelocityFieldGrid& grid,
                              int slice) {
  const int n = grid.cells();
  const int d = grid.dim();
  if (n < 3) throw DomainError(fmt::format("fluid residual needs >= 3 cells per axis, got {}", n));
  if (slice < 1 || slice + 1 >= grid.slices())
    throw DomainError("fluid residual needs a time slice on each side of the evaluated one");
  const auto& times = grid.spec().times;
  const double dt = times[static_cast<std::size_t>(slice) + 1] - times[static_cast<std::size_t>(slice) - 1];
  const double D = grid.spacing();

  ResidualResult result;
  for (std::size_t flat = 0; flat < grid.cells_per_slice(); ++flat) {
    const std::vector<int> multi = grid.multi_index(flat);
    if (std::any_of(multi.begin(), multi.end(), [n](int m) { return m == 0 || m == n - 1; }))
      continue;
    const GridCell& c = grid.cell(slice, flat);
    const GridCell& before = grid.cell(slice - 1, flat);
    const GridCell& after = grid.cell(slice + 1, flat);
    if (c.empty || before.empty || after.empty) continue;

    std::vector<Vector> grad(static_cast<std::size_t>(d));
    grad[0] = (after.V - before.V) / dt;
    bool ok = true;
    for (int a = 1; a < d && ok; ++a) {
      std::vector<int> lo = multi, hi = multi;
      --lo[static_cast<std::size_t>(a - 1)];
      ++hi[static_cast<std::size_t>(a - 1)];
      const GridCell& cl = grid.cell(slice, grid.index(slice, lo));
      const GridCell& ch = grid.cell(slice, grid.index(slice, hi));
      if (cl.empty || ch.empty) ok = false;
      else grad[static_cast<std::size_t>(a)] = (ch.V - cl.V) / (2.0 * D);
    }
    if (!ok) continue;

    const Vector x = grid.center(slice, multi);
    Vector conv = Vector::Zero(d);
    for (int k = 0; k < d; ++k) conv += c.V[k] * grad[static_cast<std::size_t>(k)];
    CellResidual cr;
    cr.flat = flat;
    cr.center = x;
    cr.r = conv - averaged.acceleration(x, c.V);
    cr.norm = bar_metric(MeanVelocity{c.V}).norm(cr.r);
    result.R = std::max(result.R, cr.norm);
    result.cells.push_back(std::move(cr));
  }
  if (result.cells.empty()) throw DomainError("fluid residual: no interior cell has a full stencil");
  return result;
}

void write_grid_csv(std::ostream& out, const VelocityFieldGrid& grid, int slice,
                    const ResidualResult* residual) {
  const int d = grid.dim();
  out << "cell";
  for (int i = 0; i < d; ++i) out << ",x" << i;
  for (int i = 0; i < d; ++i) out << ",V" << i;
  out << ",alpha_cell,weight";
  for (int i = 0; i < d; ++i) out << ",r" << i;
  out << '\n';
  std::vector<const CellResidual*> by_cell(grid.cells_per_slice(), nullptr);
  if (residual)
    for (const auto& r : residual->cells) by_cell[r.flat] = &r;
  for (std::size_t flat = 0; flat < grid.cells_per_slice(); ++flat) {
    const GridCell& c = grid.cell(slice, flat);
    const Vector x = grid.center(slice, grid.multi_index(flat));
    std::string line = fmt::format("{}", flat);
    for (int i = 0; i < d; ++i) line += fmt::format(",{:.17g}", x[i]);
    for (int i = 0; i < d; ++i) line += fmt::format(",{:.17g}", c.V[i]);
    line += fmt::format(",{:.17g},{:.17g}", c.alpha, c.weight);
    for (int i = 0; i < d; ++i)
      line += by_cell[flat] ? fmt::format(",{:.17g}", by_cell[flat]->r[i]) : std::string(",");
    line += '\n';
    out << line;
  }
}

// ---------------------------------------------------------------- Comparisons along flows

DistributionGap distribution_gap(const DistributionFunction& f, const DistributionFunction& f_tilde,
                                 const Trajectory& lorentz, const Trajectory& averaged,
                                 const std::vector<double>& times, double floor) {
  DistributionGap out;
  const LabTimeResampler rl(lorentz), ra(averaged);
  for (double t : times) {
    const PhaseState s = rl.at(t);
    const PhaseState st = ra.at(t);
    GapSample g;
    g.t = t;
    g.f = f.evaluate(s.x, s.y);
    g.f_tilde = f_tilde.evaluate(s.x, s.y);
    g.gap = std::abs(g.f - g.f_tilde);
    g.traj_gap = (s.x - st.x).tail(s.x.size() - 1).norm();
    out.samples.push_back(g);
  }
  double num = 0.0, den = 0.0, gmax = 0.0, tmax = 0.0;
  for (const auto& g : out.samples) {
    num += g.gap * g.traj_gap;
    den += g.traj_gap * g.traj_gap;
    gmax = std::max(gmax, g.gap);
    tmax = std::max(tmax, g.traj_gap);
  }
  if (gmax <= floor || tmax <= floor) {
    out.refused = true;
    return out;
  }
  out.slope = num / den;
  double res = 0.0, norm = 0.0;
  for (const auto& g : out.samples) {
    res += (g.gap - out.slope * g.traj_gap) * (g.gap - out.slope * g.traj_gap);
    norm += g.gap * g.gap;
  }
  out.fit_residual = std::sqrt(res / norm);
  return out;
}

FluidComparison fluid_vs_particle(const VelocityFieldGrid& grid, const ConnectionField& lorentz,
                                  const Vector& start, const std::vector<double>& times, double h) {
  FluidComparison out;
  Vector u0;
  if (!grid.interpolate(start, u0)) throw OutOfDomainError("fluid start point outside the grid");
  const double t_end = times.back();

  // integral curve of u, recorded as a trajectory so it can be resampled
  Trajectory curve;
  curve.conn_id = "fluid";
  curve.h = h;
  Vector x = start, u = u0;
  curve.samples.push_back({0.0, x, u});
  double tau = 0.0;
  bool exited = false;
  auto field = [&](const Vector& at, Vector& v) { return grid.interpolate(at, v); };
  while (x[0] < t_end) {
    Vector k1, k2, k3, k4;
    if (!field(x, k1) || !field(x + 0.5 * h * k1, k2) || !field(x + 0.5 * h * k2, k3) ||
        !field(x + h * k3, k4)) {
      exited = true;
      break;
    }
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    tau += h;
    Vector v;
    if (!field(x, v)) {
      curve.samples.push_back({tau, x, k4});
      exited = true;
      break;
    }
    curve.samples.push_back({tau, x, v});
  }
  out.truncated = exited;
  out.window_end = std::min(curve.samples.back().x[0], t_end);

  const Trajectory particle = integrate(lorentz, start, u0, 1.05 * (t_end - start[0]) + 2 * h, h);
  const LabTimeResampler rf(curve), rp(particle);
  for (double t : times) {
    if (t > out.window_end || t < start[0]) continue;
    const PhaseState a = rf.at(t), b = rp.at(t);
    out.samples.push_back({t, (a.x - b.x).tail(a.x.size() - 1).norm()});
  }
  return out;
}

}  // namespace avl
