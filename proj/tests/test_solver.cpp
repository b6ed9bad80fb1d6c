#include <doctest.h>

#include <numbers>
#include <sstream>

#include "avl/errors.hpp"
#include "avl/solver.hpp"

using namespace avl;

namespace {

std::shared_ptr<const Chart> inertial() { return make_chart("inertial", 4); }

// constant acceleration in x^1 regardless of the state: exact for RK4
class ConstantPush : public ConnectionField {
 public:
  int dim() const override { return 4; }
  bool affine() const override { return true; }
  std::string id() const override { return "push"; }
  Rank3 coefficients(const Vector&, const Vector&) const override { return Rank3(4); }
  Vector acceleration(const Vector&, const Vector&) const override {
    return Vector::Unit(4, 1);
  }
};

}  // namespace

TEST_CASE("cyclotron orbit matches the closed form") {
  const double B = 1.0, gamma = 2.0, u = std::sqrt(3.0);
  const LorentzConnection conn(inertial(), FieldConfiguration::uniform_magnetic(B));
  Vector y0(4);
  y0 << gamma, u, 0.0, 0.0;
  const Trajectory tr = integrate(conn, Vector::Zero(4), y0, 2.0 * std::numbers::pi / B, 1e-3);
  double err = 0.0;
  for (const auto& s : tr.samples) {
    Vector exact(4);
    exact << gamma * s.t, u / B * std::sin(B * s.t), u / B * (std::cos(B * s.t) - 1.0), 0.0;
    err = std::max(err, (s.x - exact).norm());
  }
  CHECK(err < 1e-8);
  // closes on itself after one proper-time period
  CHECK(tr.back().x.tail(3).norm() < 1e-8);
}

TEST_CASE("hyperbolic motion matches the closed form") {
  const LorentzConnection conn(inertial(), FieldConfiguration::uniform_electric(1.0));
  const Trajectory tr = integrate(conn, Vector::Zero(4), Metric(4).rest_velocity(), 1.0, 1e-3);
  for (const auto& s : tr.samples) {
    CHECK(s.x[0] == doctest::Approx(std::sinh(s.t)).epsilon(1e-10));
    CHECK(s.x[1] == doctest::Approx(std::cosh(s.t) - 1.0).epsilon(1e-10).scale(1.0));
    CHECK(s.x[2] == 0.0);
  }
}

TEST_CASE("self-convergence order is four") {
  const LorentzConnection conn(inertial(), FieldConfiguration::uniform_magnetic(1.0));
  Vector y0(4);
  y0 << 2.0, std::sqrt(3.0), 0.0, 0.0;
  const ConvergenceResult c =
      convergence_order(conn, Vector::Zero(4), y0, 2.0 * std::numbers::pi, 0.1);
  REQUIRE_FALSE(c.saturated);
  CHECK(c.order == doctest::Approx(4.0).epsilon(0.05));
  // an exactly integrable problem saturates
  const ConvergenceResult s =
      convergence_order(ConstantPush(), Vector::Zero(4), Metric(4).rest_velocity(), 1.0, 0.1);
  CHECK(s.saturated);
}

TEST_CASE("step rounding lands on T and backward integration retraces") {
  const LorentzConnection conn(inertial(),
                               FieldConfiguration::from_catalog("crossed", {{"electric", 0.3}}, 4));
  Vector y0(4);
  y0 << 1.5, 0.4, -0.7, 0.5;
  y0[0] = std::sqrt(1.0 + y0.tail(3).squaredNorm());
  const Trajectory tr = integrate(conn, Vector::Zero(4), y0, 1.0, 0.3);
  REQUIRE(tr.samples.size() == 5);
  CHECK(tr.back().t == doctest::Approx(1.0).epsilon(1e-15));
  const PhaseState fwd = integrate_final(conn, Vector::Zero(4), y0, 1.0, 1e-3);
  const PhaseState back = integrate_final(conn, fwd.x, fwd.y, -1.0, 1e-3);
  CHECK(back.x.norm() < 1e-11);
  CHECK((back.y - y0).norm() < 1e-11);

  IntegratorOptions thin;
  thin.record_every = 7;
  const Trajectory sparse = integrate(conn, Vector::Zero(4), y0, 1.0, 0.01, thin);
  CHECK(sparse.back().t == doctest::Approx(1.0));
  CHECK(sparse.samples.size() == 16);
}

TEST_CASE("advance_to_time reaches the requested chart time") {
  const LorentzConnection conn(inertial(), FieldConfiguration::uniform_magnetic(1.3));
  Vector y0(4);
  y0 << 3.0, 0.0, 2.0, 2.0;
  y0[0] = std::sqrt(1.0 + y0.tail(3).squaredNorm());
  for (double t : {0.0, 0.37, 2.5, -1.2}) {
    const PhaseState s = advance_to_time(conn, Vector::Zero(4), y0, t, 1e-3);
    CHECK(std::abs(s.x[0] - t) <= 1e-13 * (1.0 + std::abs(t)));
    if (t == 0.0) continue;
    // the same state via integrate at the matching proper time
    const double tau = t / y0[0];  // y^0 is constant in a pure magnetic field
    const PhaseState ref = integrate_final(conn, Vector::Zero(4), y0, tau, 1e-3);
    CHECK((s.x - ref.x).norm() < 1e-9);
  }
}

TEST_CASE("shell is conserved along Lorentz autoparallels") {
  const LorentzConnection conn(inertial(), FieldConfiguration::from_catalog(
                                               "plane_wave", {{"amplitude", 0.5}}, 4));
  Vector y0(4);
  y0 << 0.0, 1.0, 0.5, -0.2;
  y0[0] = std::sqrt(1.0 + y0.tail(3).squaredNorm());
  const Trajectory tr = integrate(conn, Vector::Zero(4), y0, 10.0, 1e-3);
  double drift = 0.0;
  for (const auto& s : tr.samples) drift = std::max(drift, std::abs(Metric(4).norm2(s.y) - 1.0));
  CHECK(drift <= 1e-9);
}

TEST_CASE("leaving the timelike cone is an integration error") {
  const LorentzConnection conn(inertial(), FieldConfiguration::uniform_electric(1.0));
  Vector y0(4);
  y0 << 1.0, 1.0, 0.0, 0.0;  // null
  CHECK_THROWS_AS(integrate(conn, Vector::Zero(4), y0, 1.0, 0.1), IntegrationError);
}

TEST_CASE("trajectory CSV has a header and one row per sample") {
  const LorentzConnection conn(inertial(), FieldConfiguration::zero());
  const Trajectory tr = integrate(conn, Vector::Zero(4), Metric(4).rest_velocity(), 0.2, 0.1);
  std::ostringstream out;
  write_trajectory_csv(out, tr);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,x0,x1,x2,x3,y0,y1,y2,y3");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3);
}
