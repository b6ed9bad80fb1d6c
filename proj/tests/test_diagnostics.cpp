#include <doctest.h>

#include <random>

#include <Eigen/Eigenvalues>

#include "avl/diagnostics.hpp"
#include "avl/errors.hpp"

using namespace avl;

namespace {

Vector random_velocity(std::mt19937_64& rng, double gamma_max) {
  std::uniform_real_distribution<double> g(1.0, gamma_max);
  std::normal_distribution<double> n(0.0, 1.0);
  Vector dir(3);
  dir << n(rng), n(rng), n(rng);
  return velocity_with_energy(Metric(4), g(rng), dir);
}

BarMetric bar_at(const Vector& U) { return bar_metric(mean_velocity(U)); }

}  // namespace

TEST_CASE("mean velocity normalizes timelike means and zeroes the rest") {
  Vector m1(4);
  m1 << 3.0, 1.0, 0.5, -0.2;
  const MeanVelocity U = mean_velocity(m1);
  CHECK(Metric(4).norm2(U.U) == doctest::Approx(1.0));
  CHECK((U.U / U.U[0] - m1 / m1[0]).norm() < 1e-15);
  m1 << 1.0, 1.0, 0.0, 0.0;
  CHECK(mean_velocity(m1).zero());
  CHECK_THROWS_AS(bar_metric(mean_velocity(m1)), DomainError);
}

TEST_CASE("bar metric is positive definite with unit mean norm") {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 100; ++k) {
    const Vector U = random_velocity(rng, 1e3);
    const BarMetric g = bar_at(U);
    CHECK(std::abs(g.norm2(g.U()) - 1.0) <= 1e-12 * g.U().squaredNorm());
    // η̄ eigenvalues, computed independently: γ-boosted identity
    Eigen::SelfAdjointEigenSolver<Matrix> es(g.matrix());
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("bar metric norm agrees with the matrix form and the orthonormal components") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    const BarMetric g = bar_at(random_velocity(rng, 5.0));
    Vector v(4);
    v << n(rng), n(rng), n(rng), n(rng);
    const double quad = v.dot(g.matrix() * v);
    CHECK(g.norm2(v) == doctest::Approx(quad).epsilon(1e-11));
    CHECK(g.orthonormal(v).squaredNorm() == doctest::Approx(quad).epsilon(1e-11));
  }
  // at rest η̄ is the Euclidean metric
  const BarMetric rest = bar_at(Metric(4).rest_velocity());
  CHECK((rest.matrix() - Matrix::Identity(4, 4)).norm() == 0.0);
}

TEST_CASE("exact diameter matches a brute-force pair scan") {
  std::mt19937_64 rng(2);
  std::vector<Vector> ys;
  for (int k = 0; k < 200; ++k) ys.push_back(random_velocity(rng, 1.5));
  const BarMetric g = bar_at(Metric(4).rest_velocity());
  double ref = 0.0;
  for (const auto& a : ys)
    for (const auto& b : ys) ref = std::max(ref, (a - b).norm());
  const DiameterResult d = diameter(ys, g, 3);
  CHECK(d.exact);
  CHECK(d.value == doctest::Approx(ref).epsilon(1e-14));
  CHECK(diameter(ys, g, 1).value == d.value);
  CHECK(diameter(std::vector<Vector>{ys[0]}, g).value == 0.0);
}

TEST_CASE("large sets give a bracket around the true diameter") {
  std::mt19937_64 rng(9);
  std::vector<Vector> ys;
  for (std::size_t k = 0; k < kExactDiameterLimit + 500; ++k) ys.push_back(random_velocity(rng, 1.2));
  const BarMetric g = bar_at(Metric(4).rest_velocity());
  double ref = 0.0;
  for (std::size_t a = 0; a < ys.size(); ++a)
    for (std::size_t b = a + 1; b < ys.size(); ++b) ref = std::max(ref, (ys[a] - ys[b]).norm());
  const DiameterResult d = diameter(ys, g, 2);
  CHECK_FALSE(d.exact);
  CHECK(d.lower <= ref * (1 + 1e-12));
  CHECK(d.upper >= ref * (1 - 1e-12));
  CHECK(d.value == d.upper);
}

TEST_CASE("operator norm of a uniform magnetic field is its strength") {
  for (double B : {0.3, 1.0, 7.5}) {
    const Matrix F = FieldConfiguration::uniform_magnetic(B).field_mixed(Vector::Zero(4));
    CHECK(operator_norm(F, bar_at(Metric(4).rest_velocity())) == doctest::Approx(B).epsilon(1e-12));
  }
  // boosted frames: compare with the generalized eigenproblem of Fᵀ η̄ F against η̄
  std::mt19937_64 rng(4);
  const Matrix F = FieldConfiguration::from_catalog("crossed", {{"electric", 0.5}}, 4)
                       .field_mixed(Vector::Zero(4));
  for (int k = 0; k < 10; ++k) {
    const BarMetric g = bar_at(random_velocity(rng, 3.0));
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(F.transpose() * g.matrix() * F,
                                                        g.matrix());
    CHECK(operator_norm(F, g) == doctest::Approx(std::sqrt(es.eigenvalues().maxCoeff())));
  }
}

TEST_CASE("lab-time resampler is exact for uniform motion") {
  Trajectory tr;
  Vector y(4);
  y << 1.25, 0.75, 0.0, 0.0;
  for (int k = 0; k <= 10; ++k) tr.samples.push_back({0.1 * k, 0.1 * k * y, y});
  const LabTimeResampler r(tr);
  for (double t : {0.0, 0.0333, 0.6, 1.25}) {
    const PhaseState s = r.at(t);
    CHECK((s.x - (t / y[0]) * y).norm() < 1e-14);
    CHECK((s.y - y).norm() < 1e-14);
  }
  CHECK_THROWS_AS(r.at(2.0), OutOfDomainError);
  Trajectory back = tr;
  std::swap(back.samples[2], back.samples[3]);
  CHECK_THROWS_AS(LabTimeResampler{back}, DomainError);
}

TEST_CASE("theta diagnostics vanish for a delta ensemble on its own trajectory") {
  Trajectory tr;
  Vector y(4);
  y << 2.0, 0.0, std::sqrt(3.0), 0.0;
  for (int k = 0; k <= 5; ++k) tr.samples.push_back({0.1 * k, 0.1 * k * y, y});
  const ConstantMoments moments(delta_moments(y));
  const ThetaSummary s = theta_diagnostics(tr, tr, moments);
  REQUIRE(s.samples.size() == 6);
  CHECK(s.theta2_sup < 1e-14);
  CHECK(s.theta_bar2_sup < 1e-14);
  CHECK(s.samples[3].gamma_bar == doctest::Approx(2.0));
}

TEST_CASE("bound fit recovers planted exponents and prefactor") {
  std::vector<ScalingPoint> pts;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (double a : {1e-3, 3e-3, 1e-2, 3e-2})
    for (double E : {10.0, 100.0, 1000.0})
      for (double t : {0.1, 1.0, 10.0})
        pts.push_back({a, E, t, 3.0 * a * a / (E * E) * t * t * std::exp(noise(rng))});
  const BoundFit fit = bound_evaluation(pts, 2, -2, 2, 1e-30);
  REQUIRE_FALSE(fit.refused);
  REQUIRE(fit.exponents.size() == 3);
  CHECK(fit.exponents[0].exponent == doctest::Approx(2.0).epsilon(0.01));
  CHECK(fit.exponents[1].exponent == doctest::Approx(-2.0).epsilon(0.01));
  CHECK(fit.exponents[2].exponent == doctest::Approx(2.0).epsilon(0.01));
  CHECK(fit.exponents[0].stderr_ > 0.0);
  CHECK(fit.prefactor == doctest::Approx(3.0).epsilon(0.01));
  CHECK(fit.rms_log_residual < 0.02);
  CHECK(decades(pts, &ScalingPoint::energy) == doctest::Approx(2.0));
}

TEST_CASE("bound fit refuses data at the floor and skips constant variables") {
  std::vector<ScalingPoint> pts{{1e-2, 100, 1, 1e-12}, {2e-2, 100, 1, 4e-12}};
  const BoundFit r = bound_evaluation(pts, 2, -2, 2, 1e-10);
  CHECK(r.refused);
  CHECK(r.floor == 4e-12);

  std::vector<ScalingPoint> alpha_only;
  for (double a : {1e-3, 2e-3, 4e-3, 8e-3}) alpha_only.push_back({a, 100, 1, a * a});
  const BoundFit f = bound_evaluation(alpha_only, 2, -2, 2, 0.0);
  REQUIRE_FALSE(f.refused);
  CHECK(f.exponents[0].fitted);
  CHECK(f.exponents[0].exponent == doctest::Approx(2.0));
  CHECK_FALSE(f.exponents[1].fitted);
  CHECK_FALSE(f.exponents[2].fitted);
}
