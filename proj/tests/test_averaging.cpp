#include <doctest.h>

#include <random>
#include <sstream>

#include "avl/averaging.hpp"
#include "avl/errors.hpp"

using namespace avl;

namespace {

EnsembleSpec spec(int n, double energy, double spread, double width, std::uint64_t seed = 7) {
  const Metric eta(4);
  EnsembleSpec s;
  s.count = n;
  Vector dir(3);
  dir << 0.3, -0.2, 1.0;
  s.mean_velocity = velocity_with_energy(eta, energy, dir);
  s.spread = spread;
  s.bunch_width = width;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("sampled velocities lie on the unit hyperboloid and are reproducible") {
  const Metric eta(4);
  const Ensemble a = sample_ensemble(spec(300, 50.0, 0.05, 1.0));
  const Ensemble b = sample_ensemble(spec(300, 50.0, 0.05, 1.0));
  REQUIRE(a.size() == 300);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::abs(eta.norm2(a.particles[i].y) - 1.0) <= kShellTolerance);
    CHECK(a.particles[i].y[0] > 0.0);
    CHECK(a.particles[i].x == b.particles[i].x);
    CHECK(a.particles[i].y == b.particles[i].y);
  }
  const Ensemble c = sample_ensemble(spec(300, 50.0, 0.05, 1.0, 8));
  CHECK(c.particles[0].y != a.particles[0].y);
}

TEST_CASE("positions sit on the rest-frame slice through the center") {
  const Metric eta(4);
  const EnsembleSpec s = spec(100, 5.0, 0.01, 2.0);
  const Ensemble e = sample_ensemble(s);
  for (const auto& p : e.particles) CHECK(std::abs(eta.dot(p.x, s.mean_velocity)) < 1e-12);
}

TEST_CASE("antithetic partners share position and mirror the rest-frame offset") {
  EnsembleSpec s = spec(200, 20.0, 0.05, 1.0);
  s.antithetic = true;
  const Ensemble e = sample_ensemble(s);
  const Matrix inv = boost_from_rest(Metric(4), s.mean_velocity).inverse();
  for (std::size_t a = 0; a + 1 < e.size(); a += 2) {
    CHECK(e.particles[a].x == e.particles[a + 1].x);
    const Vector u0 = inv * e.particles[a].y, u1 = inv * e.particles[a + 1].y;
    CHECK((u0.tail(3) + u1.tail(3)).norm() < 1e-9);
  }
  // the rest-frame first moment is exactly balanced
  const MomentSet m = compute_moments(e);
  const Vector rest = inv * m.m1;
  CHECK(rest.tail(3).norm() < 1e-9);
}

TEST_CASE("zero spread gives a delta ensemble") {
  const EnsembleSpec s = spec(10, 3.0, 0.0, 0.0);
  const Ensemble e = sample_ensemble(s);
  for (const auto& p : e.particles) CHECK(p.y == s.mean_velocity);
  const MomentSet m = compute_moments(e);
  const MomentSet ref = delta_moments(s.mean_velocity);
  CHECK((m.m1 - ref.m1).norm() < 1e-13);
  CHECK((m.m2 - ref.m2).norm() < 1e-11);
}

TEST_CASE("sampling rejects bad input") {
  EnsembleSpec s = spec(10, 3.0, 0.1, 0.0);
  s.mean_velocity[0] = 1.0;
  CHECK_THROWS_AS(sample_ensemble(s), DomainError);
  s = spec(0, 3.0, 0.1, 0.0);
  CHECK_THROWS_AS(sample_ensemble(s), DomainError);
}

TEST_CASE("ensemble CSV round-trips exactly") {
  const Ensemble e = sample_ensemble(spec(20, 4.0, 0.2, 0.5));
  std::stringstream io;
  write_ensemble_csv(io, e);
  const Ensemble back = read_ensemble_csv(io);
  REQUIRE(back.size() == e.size());
  for (std::size_t a = 0; a < e.size(); ++a) {
    CHECK(back.particles[a].x == e.particles[a].x);
    CHECK(back.particles[a].y == e.particles[a].y);
  }
  std::stringstream bad("a,x0,y0\n0,1,2\n");
  CHECK_THROWS_AS(read_ensemble_csv(bad), ConfigError);
}

TEST_CASE("moments match a brute-force weighted sum and do not depend on workers") {
  Ensemble e = sample_ensemble(spec(1000, 10.0, 0.1, 1.0));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> w(0.5, 2.0);
  for (auto& p : e.particles) p.w = w(rng);

  double vol = 0;
  Vector m1 = Vector::Zero(4);
  Matrix m2 = Matrix::Zero(4, 4);
  Rank3 m3(4);
  for (const auto& p : e.particles) {
    vol += p.w;
    for (int i = 0; i < 4; ++i) {
      m1[i] += p.w * p.y[i];
      for (int j = 0; j < 4; ++j) {
        m2(i, j) += p.w * p.y[i] * p.y[j];
        for (int k = 0; k < 4; ++k) m3(i, j, k) += p.w * p.y[i] * p.y[j] * p.y[k];
      }
    }
  }
  const MomentSet m = compute_moments(e, 1);
  CHECK(m.vol == doctest::Approx(vol));
  CHECK((m.m1 - m1 / vol).norm() < 1e-12 * m1.norm() / vol);
  CHECK((m.m2 - m2 / vol).norm() < 1e-12 * m2.norm() / vol);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) CHECK(m.m3(i, j, k) == doctest::Approx(m3(i, j, k) / vol));
  CHECK(m.energy() == m.m1[0]);

  for (int workers : {2, 3, 8}) {
    const MomentSet p = compute_moments(e, workers);
    CHECK(p.m1 == m.m1);
    CHECK(p.m2 == m.m2);
    CHECK(p.m3 == m.m3);
  }
}

TEST_CASE("rest-frame Gaussian moments agree with the closed form") {
  // at rest, <y^0> = E[sqrt(1 + |u|^2)] ≈ 1 + 3 s^2 / 2 and <y^i y^j> = s^2 δ_ij
  EnsembleSpec s = spec(200000, 1.0, 0.01, 0.0);
  s.mean_velocity = Metric(4).rest_velocity();
  s.antithetic = true;
  const MomentSet m = compute_moments(sample_ensemble(s));
  CHECK(m.m1[0] == doctest::Approx(1.0 + 1.5e-4).epsilon(1e-6));
  for (int i = 1; i < 4; ++i) {
    CHECK(std::abs(m.m1[i]) < 1e-15);
    CHECK(m.m2(i, i) == doctest::Approx(1e-4).epsilon(2e-2));
  }
}

TEST_CASE("kernel moments select by spatial radius and fall back to global") {
  Ensemble e;
  const Metric eta(4);
  for (int a = 0; a < 10; ++a) {
    Particle p;
    p.x = Vector::Zero(4);
    p.x[1] = a;
    p.y = velocity_with_energy(eta, 1.0 + a, Vector::Unit(3, 0));
    e.particles.push_back(p);
  }
  Vector at = Vector::Zero(4);
  at[1] = 2.0;
  const MomentSet m = compute_kernel_moments(e, at, 1.0);
  CHECK(m.vol == 3.0);
  CHECK(m.m1[0] == doctest::Approx((2.0 + 3.0 + 4.0) / 3.0));
  at[1] = 100.0;
  CHECK_THROWS_AS(compute_kernel_moments(e, at, 1.0), DegenerateMomentsError);
  const KernelMoments provider(std::make_shared<Ensemble>(e), 1.0);
  CHECK(provider.moments_at(at).vol == 10.0);
}

TEST_CASE("moment history interpolates cubics exactly and clamps") {
  MomentHistory h;
  auto cubic = [](double t) { return 1.0 + 0.5 * t - 0.2 * t * t + 0.1 * t * t * t; };
  for (int k = 0; k < 10; ++k) {
    const double t = 0.3 * k + 0.01 * k * k;
    MomentSet m = delta_moments(Metric(4).rest_velocity());
    m.m1[0] = cubic(t);
    m.m3(1, 2, 3) = cubic(t);
    h.append(t, m);
  }
  for (double t : {0.05, 0.77, 1.9, 3.4}) {
    CHECK(h.at_time(t).m1[0] == doctest::Approx(cubic(t)).epsilon(1e-12));
    CHECK(h.at_time(t).m3(1, 2, 3) == doctest::Approx(cubic(t)).epsilon(1e-12));
  }
  CHECK(h.at_time(-5.0).m1[0] == cubic(0.0));
  CHECK(h.at_time(1e3).m1[0] == h.entries().back().m1[0]);
  CHECK_THROWS(h.append(0.0, delta_moments(Metric(4).rest_velocity())));
}

TEST_CASE("averaged coefficients are velocity independent and symmetric") {
  const auto chart = make_chart("inertial", 4);
  const auto field = FieldConfiguration::from_catalog("polynomial", {{"a", 0.3}}, 4);
  const MomentSet m = compute_moments(sample_ensemble(spec(500, 3.0, 0.1, 1.0)));
  const AveragedConnection conn(chart, field, std::make_shared<ConstantMoments>(m));
  Vector x(4);
  x << 0.2, 0.5, -0.3, 0.7;
  const Metric eta(4);
  const Rank3 a = conn.coefficients(x, eta.rest_velocity());
  const Rank3 b = conn.coefficients(x, velocity_with_energy(eta, 40.0, Vector::Unit(3, 1)));
  CHECK(a == b);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) CHECK(a(i, j, k) == a(i, k, j));
  // fast acceleration equals the generic contraction
  const Vector y = velocity_with_energy(eta, 2.0, Vector::Unit(3, 2));
  CHECK((conn.acceleration(x, y) + a.contract(y)).norm() < 1e-12);
}

TEST_CASE("delta moments reproduce the Lorentz acceleration at the support velocity") {
  const Metric eta(4);
  for (const char* chart_name : {"inertial", "cylindrical"}) {
    CAPTURE(chart_name);
    const auto chart = make_chart(chart_name, 4);
    const auto field = FieldConfiguration::from_catalog("crossed", {{"electric", 0.5}}, 4);
    Vector x(4);
    x << 0.1, 1.2, 0.4, -0.3;
    Vector y(4);
    y << 0.0, 0.4, -0.7, 0.2;
    y[0] = std::sqrt(1.0 + y.tail(3).squaredNorm());
    // the chart velocity whose inertial image is y
    const Vector yc = chart->pull_back(x, y);
    const Vector Yc = yc / std::sqrt(yc.dot(chart->metric(x) * yc));
    // moments are stored with upper chart indices
    const MomentSet m = delta_moments(Yc);
    const Vector a = averaged_acceleration(*chart, field, m, x, Yc);
    const Vector ref = LorentzConnection(chart, field).acceleration(x, Yc);
    CHECK((a - ref).norm() < 1e-12 * (1 + ref.norm()));
    // the flipped third moment breaks it
    const Vector bad = averaged_acceleration(*chart, field, m, x, Yc, true);
    CHECK((bad - ref).norm() > 1e-3);
  }
}

TEST_CASE("normal frame kills the coefficients at its origin") {
  const auto chart = make_chart("inertial", 4);
  const auto field = FieldConfiguration::from_catalog("plane_wave", {{"amplitude", 0.8}}, 4);
  const MomentSet m = compute_moments(sample_ensemble(spec(200, 5.0, 0.2, 1.0)));
  auto conn = std::make_shared<AveragedConnection>(chart, field, std::make_shared<ConstantMoments>(m));
  Vector x0(4);
  x0 << 0.3, 0.1, -0.2, 0.6;
  const NormalFrame frame = normal_frame(conn, x0);
  CHECK(frame.transformed_coefficients(x0).max_abs() < 1e-10);
  CHECK(conn->coefficients(x0, x0).max_abs() > 1e-3);

  // inverse agrees with a plain fixed-point iteration of x = x0 + x' - ½Γ0(x-x0)(x-x0)
  Vector xp(4);
  xp << 0.05, -0.02, 0.04, 0.01;
  Vector x = x0 + xp;
  for (int it = 0; it < 200; ++it) {
    const Vector dx = x - x0;
    x = x0 + xp - 0.5 * frame.quadratic().contract(dx);
  }
  CHECK((frame.inverse(xp) - x).norm() < 1e-13);
  CHECK((frame.forward(frame.inverse(xp)) - xp).norm() < 1e-13);

  // Jacobian against central differences
  const double e = 1e-6;
  const Matrix J = frame.jacobian(x);
  for (int j = 0; j < 4; ++j) {
    Vector p = x, q = x;
    p[j] += e;
    q[j] -= e;
    CHECK(((frame.forward(p) - frame.forward(q)) / (2 * e) - J.col(j)).norm() < 1e-8);
  }
  CHECK_THROWS_AS(normal_frame(std::make_shared<LorentzConnection>(chart, field), x0),
                  DomainError);
}
