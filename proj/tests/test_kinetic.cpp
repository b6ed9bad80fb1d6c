#include <doctest.h>

#include <random>

#include "avl/errors.hpp"
#include "avl/kinetic.hpp"

using namespace avl;

namespace {

std::shared_ptr<const Chart> inertial() { return make_chart("inertial", 4); }

Vector vec(double a, double b, double c, double d) {
  Vector v(4);
  v << a, b, c, d;
  return v;
}

Ensemble bunch(int n, double spread, double width, const Vector& u, std::uint64_t seed = 3) {
  EnsembleSpec s;
  s.count = n;
  s.mean_velocity = u;
  s.spread = spread;
  s.bunch_width = width;
  s.seed = seed;
  return sample_ensemble(s);
}

}  // namespace

TEST_CASE("bunch profile peak, shape and cutoff") {
  const BunchProfile f(4, 2.0, 0.1);
  CHECK(f(Vector::Zero(4), Metric(4).rest_velocity()) == 1.0);
  const Vector x = vec(5.0, 2.0, 0.0, 0.0), y = vec(1.0, 0.0, 0.1, 0.0);
  CHECK(f(x, y) == doctest::Approx(std::exp(-0.5 - 0.5)));
  CHECK(f(vec(0, 12.5, 0, 0), Metric(4).rest_velocity()) == 0.0);
  CHECK_THROWS_AS(BunchProfile(4, 0.0, 1.0), DomainError);
}

TEST_CASE("free streaming: f(x, y, t) = f0(x - t y / y0, y)") {
  const BunchProfile f0(4, 1.0, 0.3);
  const DistributionFunction f(f0, std::make_shared<LorentzConnection>(inertial(), FieldConfiguration::zero()),
                               1e-2, 30.0);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 0.5);
  for (int k = 0; k < 20; ++k) {
    Vector y = vec(0, n(rng), n(rng), n(rng));
    y[0] = std::sqrt(1.0 + y.tail(3).squaredNorm());
    const Vector x = vec(1.7, n(rng), n(rng), n(rng));
    const Vector x_back = x - (x[0] / y[0]) * y;
    CHECK(f.evaluate(x, y) == doctest::Approx(f0(x_back, y)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(f.evaluate(vec(0, 40, 0, 0), Metric(4).rest_velocity()), OutOfDomainError);
}

TEST_CASE("f is constant along Lorentz characteristics") {
  const BunchProfile f0(4, 1.0, 0.2);
  auto conn = std::make_shared<LorentzConnection>(
      inertial(), FieldConfiguration::from_catalog("crossed", {{"electric", 0.3}}, 4));
  const DistributionFunction f(f0, conn, 1e-2, 40.0);
  const Vector x0 = vec(0.0, 0.4, -0.3, 0.2);
  Vector y0 = vec(0.0, 0.1, 0.15, -0.05);
  y0[0] = std::sqrt(1.0 + y0.tail(3).squaredNorm());
  const Trajectory tr = integrate(*conn, x0, y0, 2.0, 1e-2);
  for (std::size_t k = 10; k < tr.samples.size(); k += 50)
    CHECK(f.evaluate(tr.samples[k].x, tr.samples[k].y) == doctest::Approx(f0(x0, y0)).epsilon(1e-8));
}

TEST_CASE("ensemble transport matches single-particle integration and ignores workers") {
  const LorentzConnection conn(inertial(), FieldConfiguration::uniform_magnetic(1.0));
  const Ensemble e = bunch(300, 0.05, 1.0, velocity_with_energy(Metric(4), 2.0, vec(0, 1, 0, 0).tail(3)));
  TransportStats stats;
  const Ensemble one = transport_ensemble(conn, e, 1.5, 1e-2, 1, &stats);
  CHECK(stats.reprojected == 0);
  for (int w : {2, 5}) {
    const Ensemble many = transport_ensemble(conn, e, 1.5, 1e-2, w);
    for (std::size_t a = 0; a < e.size(); ++a) {
      CHECK(many.particles[a].x == one.particles[a].x);
      CHECK(many.particles[a].y == one.particles[a].y);
    }
  }
  const PhaseState ref = integrate_final(conn, e.particles[17].x, e.particles[17].y, 1.5, 1e-2);
  CHECK(ref.x == one.particles[17].x);
  CHECK(one.particles[17].w == e.particles[17].w);
}

TEST_CASE("self-consistent transport of a cold bunch is Lorentz transport") {
  const auto field = FieldConfiguration::uniform_magnetic(1.0);
  const Ensemble e = bunch(64, 0.0, 1.0, velocity_with_energy(Metric(4), 1.5, vec(0, 0, 1, 0.5).tail(3)));
  // the two sprays agree on the shell only, so they part at the step's shell drift
  const SelfConsistentRun run = transport_self_consistent(inertial(), field, e, 1.0, 0.01, 2);
  const Ensemble ref = transport_ensemble(LorentzConnection(inertial(), field), e, 1.0, 0.01);
  double worst = 0.0;
  for (std::size_t a = 0; a < e.size(); ++a)
    worst = std::max(worst, (run.final.particles[a].x - ref.particles[a].x).norm() +
                                (run.final.particles[a].y - ref.particles[a].y).norm());
  CHECK(worst < 1e-9);
  CHECK(run.history->entries().size() == 101);
  const Ensemble same = transport_self_consistent(inertial(), field, e, 1.0, 0.01, 1).final;
  CHECK(same.particles[5].y == run.final.particles[5].y);
}

TEST_CASE("snapshots land on the requested chart times") {
  const LorentzConnection conn(inertial(), FieldConfiguration::uniform_electric(0.5));
  const Ensemble e = bunch(50, 0.1, 1.0, Metric(4).rest_velocity());
  const std::vector<double> times{0.0, 0.3, 0.75};
  const auto snaps = snapshots(conn, e, times, 1e-2, 3);
  REQUIRE(snaps.size() == 3);
  for (std::size_t k = 0; k < times.size(); ++k)
    for (const auto& p : snaps[k].particles) CHECK(std::abs(p.x[0] - times[k]) < 1e-12);
}

TEST_CASE("a uniform flow is deposited and interpolated exactly") {
  const Vector u = velocity_with_energy(Metric(4), 1.2, vec(0, 1, -1, 0.5).tail(3));
  Ensemble e = bunch(2000, 0.0, 1.0, u);
  for (auto& p : e.particles) p.x[0] = 0.0;
  const VelocityFieldGrid g = build_velocity_grid({e, e}, GridSpec{4, 3.0, {0.0, 1.0}}, 2);
  CHECK(g.spacing() == 1.5);
  double inside = 0.0, deposited = 0.0;
  for (const auto& p : e.particles)
    if ((p.x.tail(3).array().abs() < 3.0 - 0.75).all()) inside += p.w;
  for (std::size_t c = 0; c < g.cells_per_slice(); ++c) {
    deposited += g.cell(0, c).weight;
    if (!g.cell(0, c).empty) CHECK((g.cell(0, c).V - u).norm() < 1e-14);
  }
  CHECK(deposited >= inside);
  Vector out;
  REQUIRE(g.interpolate(vec(0.5, 0.1, -0.2, 0.3), out));
  CHECK((out - u).norm() < 1e-14);
  CHECK_FALSE(g.interpolate(vec(0.5, 2.9, 0.0, 0.0), out));  // beyond the outer cell centers
  CHECK_FALSE(g.interpolate(vec(1.5, 0.0, 0.0, 0.0), out));  // after the last slice
  const VelocityFieldGrid same = build_velocity_grid({e, e}, GridSpec{4, 3.0, {0.0, 1.0}}, 1);
  CHECK(same.cell(1, 21).V == g.cell(1, 21).V);
}

TEST_CASE("grid interpolation is cubic in time and linear in space") {
  GridSpec spec{3, 1.5, {0.0, 0.2, 0.5, 0.6, 1.0}};
  VelocityFieldGrid g(4, spec);
  // unnormalized field w(t, x), cubic in t, linear in each x^a
  auto w = [](const Vector& x) {
    const double t = x[0];
    return vec(3.0 + t * t * t, 0.2 * x[1] - 0.3 * t * t, 0.1 * x[2] * x[3] + t, 0.05 * x[1] * x[3]);
  };
  for (int s = 0; s < g.slices(); ++s)
    for (std::size_t c = 0; c < g.cells_per_slice(); ++c) {
      GridCell& cell = g.cell(s, c);
      cell.V = w(g.center(s, g.multi_index(c)));
      cell.empty = false;
    }
  for (const Vector& x : {vec(0.1, 0.3, -0.4, 0.2), vec(0.55, -0.9, 0.9, 0.0), vec(0.93, 0.0, 0.1, -0.7)}) {
    Vector u;
    REQUIRE(g.interpolate(x, u));
    const Vector ref = w(x) / std::sqrt(Metric(4).norm2(w(x)));
    CHECK((u - ref).norm() < 1e-13);
  }
  g.cell(2, 13).empty = true;
  Vector u;
  CHECK_FALSE(g.interpolate(vec(0.5, 0.0, 0.0, 0.0), u));
}

TEST_CASE("fluid residual vanishes for a cold uniform flow and sees time variation") {
  const Vector u = velocity_with_energy(Metric(4), 1.5, vec(0, 1, 0, 0).tail(3));
  GridSpec spec{4, 2.0, {0.0, 0.1, 0.2}};
  VelocityFieldGrid g(4, spec);
  const double c = 0.3;
  for (int s = 0; s < 3; ++s)
    for (std::size_t k = 0; k < g.cells_per_slice(); ++k) {
      GridCell& cell = g.cell(s, k);
      cell.V = u;
      cell.V[2] = c * spec.times[static_cast<std::size_t>(s)];
      cell.V[0] = std::sqrt(1.0 + cell.V.tail(3).squaredNorm());
      cell.empty = false;
    }
  const AveragedConnection free(inertial(), FieldConfiguration::zero(),
                                std::make_shared<ConstantMoments>(delta_moments(u)));
  const ResidualResult r = fluid_residual(free, g, 1);
  CHECK(r.cells.size() == 8);
  for (const auto& cell : r.cells) {
    // r = V^0 ∂_t V with ∂_t V^2 = c exactly
    CHECK(cell.r[2] == doctest::Approx(g.cell(1, cell.flat).V[0] * c).epsilon(1e-12));
    CHECK(cell.r[1] == 0.0);
  }
  CHECK(r.R > 0.0);
  CHECK_THROWS_AS(fluid_residual(free, g, 0), DomainError);
}

TEST_CASE("fluid integral curve of a cold free flow is the particle trajectory") {
  const Vector u = velocity_with_energy(Metric(4), 1.1, vec(0, 1, 0.5, 0).tail(3));
  Ensemble e = bunch(4000, 0.0, 1.0, u);
  const LorentzConnection free(inertial(), FieldConfiguration::zero());
  const std::vector<double> times{0.0, 0.25, 0.5, 0.75, 1.0};
  const auto snaps = snapshots(free, e, times, 1e-2);
  const VelocityFieldGrid g = build_velocity_grid(snaps, GridSpec{5, 2.5, times});
  const FluidComparison cmp = fluid_vs_particle(g, free, Vector::Zero(4), {0.2, 0.5, 0.8}, 1e-2);
  CHECK_FALSE(cmp.truncated);
  REQUIRE(cmp.samples.size() == 3);
  for (const auto& s : cmp.samples) CHECK(s.gap < 1e-12);
  CHECK_THROWS_AS(fluid_vs_particle(g, free, vec(0, 9, 0, 0), {0.5}, 1e-2), OutOfDomainError);
}

TEST_CASE("distribution gap of a connection with itself is refused as floor") {
  auto conn = std::make_shared<LorentzConnection>(inertial(), FieldConfiguration::uniform_magnetic(1.0));
  const DistributionFunction f(BunchProfile(4, 1.0, 0.1), conn, 1e-2, 30.0);
  const Trajectory tr = integrate(*conn, Vector::Zero(4), Metric(4).rest_velocity(), 1.2, 1e-2);
  const DistributionGap gap = distribution_gap(f, f, tr, tr, {0.1, 0.5, 1.0});
  CHECK(gap.refused);
  REQUIRE(gap.samples.size() == 3);
  CHECK(gap.samples[1].f == 1.0);  // the peak rides along its own characteristic
}
