#pragma once

#include <algorithm>
#include <cmath>
#include <iosfwd>
#include <string>
#include <vector>

#include "avl/averaging.hpp"
#include "avl/geometry.hpp"
#include "avl/solver.hpp"

namespace avl {

/// Unit mean velocity, or the zero vector when the mean is not timelike.
struct MeanVelocity {
  Vector U;
  bool zero() const { return U.isZero(0.0); }
};

/// U = m1 / sqrt(η(m1, m1)) if η(m1, m1) > 0, else 0.
MeanVelocity mean_velocity(const MomentSet& moments);
MeanVelocity mean_velocity(const Vector& m1);

/// η̄ = -η + 2 U_ U_, with a cached Cholesky factor η̄ = L Lᵀ.
class BarMetric {
 public:
  const Matrix& matrix() const { return g_; }
  const Vector& U() const { return U_; }
  /// 2 η(v,U)² - η(v,v): same value as vᵀ η̄ v, without forming γ⁴-sized
  /// products.
  double norm2(const Vector& v) const {
    double vu = v[0] * U_[0], vv = v[0] * v[0];
    for (Eigen::Index i = 1; i < v.size(); ++i) {
      vu -= v[i] * U_[i];
      vv -= v[i] * v[i];
    }
    return 2.0 * vu * vu - vv;
  }
  double norm(const Vector& v) const { return std::sqrt(std::max(0.0, norm2(v))); }
  /// Components in an η̄-orthonormal basis: z = Lᵀ v, so |z| = ‖v‖_η̄.
  Vector orthonormal(const Vector& v) const { return factor_.transpose() * v; }
  const Matrix& factor() const { return factor_; }

 private:
  friend BarMetric bar_metric(const MeanVelocity& U);
  Vector U_;
  Matrix g_;
  Matrix factor_;
};

/// Throws DomainError if U is zero or not unit timelike.
BarMetric bar_metric(const MeanVelocity& U);

struct DiameterResult {
  double value = 0.0;  // exact diameter, or the upper bracket
  double lower = 0.0;
  double upper = 0.0;
  bool exact = true;
};

/// Largest N for which the diameter is an exact pairwise scan.
inline constexpr std::size_t kExactDiameterLimit = 4096;

/// sup over pairs of ‖y_a - y_b‖_η̄. Exact O(N²) scan up to
/// kExactDiameterLimit velocities; above that an interval from the
/// bounding box in η̄-orthonormal components.
DiameterResult diameter(const std::vector<Vector>& velocities, const BarMetric& metric,
                        int workers = 1);
DiameterResult diameter(const Ensemble& ensemble, const BarMetric& metric, int workers = 1);

/// sup ‖F y‖_η̄ / ‖y‖_η̄ for the mixed tensor F^i_j.
double operator_norm(const Matrix& field_mixed, const BarMetric& metric);

/// Spatial squared norm in the laboratory chart.
double spatial_norm2(const Vector& v);

struct ThetaSample {
  double t_lab = 0.0;
  double theta2 = 0.0;      // |y|² - |<ŷ>|²
  double theta_bar2 = 0.0;  // |<ŷ>|² - |ỹ|²
  double gamma_bar = 0.0;   // U^0
  double gap = 0.0;         // |θ² - θ̄²|
};

struct ThetaSummary {
  std::vector<ThetaSample> samples;
  double theta2_sup = 0.0;
  double theta_bar2_sup = 0.0;
  double gap_sup = 0.0;
};

/// θ², θ̄², γ̄ along a pair of trajectories. The provider is queried at the
/// Lorentz trajectory's events; the averaged trajectory is resampled to the
/// same laboratory times.
ThetaSummary theta_diagnostics(const Trajectory& lorentz, const Trajectory& averaged,
                               const MomentProvider& moments);

/// Cubic Hermite resampling of a trajectory on its laboratory time x^0.
/// Requires x^0 strictly increasing along the samples.
class LabTimeResampler {
 public:
  explicit LabTimeResampler(const Trajectory& trajectory);
  /// Throws OutOfDomainError outside [t_min, t_max].
  PhaseState at(double t_lab) const;
  double t_min() const { return times_.front(); }
  double t_max() const { return times_.back(); }

 private:
  std::vector<double> times_;
  std::vector<Vector> xs_;
  std::vector<Vector> ys_;
};

struct ComparisonSample {
  double t_lab = 0.0;
  double dx = 0.0;  // ‖x̃ - x‖_η̄
  double dy = 0.0;  // ‖ỹ/ỹ⁰ - y/y⁰‖_η̄
  double theta2 = 0.0;
  double theta_bar2 = 0.0;
  double gamma_bar = 0.0;
  double alpha = 0.0;
  double energy = 0.0;
};

struct ComparisonReport {
  std::vector<ComparisonSample> samples;
  double alpha = 0.0;
  double energy = 0.0;
  double field_norm = 0.0;  // ‖F‖_η̄ at the start event
  double theta2_sup = 0.0;
  double theta_bar2_sup = 0.0;
  double hypothesis4_gap = 0.0;
};

void write_report_csv(std::ostream& out, const ComparisonReport& report);

/// One measured gap together with the variables of the bound.
struct ScalingPoint {
  double alpha = 0.0;
  double energy = 0.0;
  double t = 0.0;
  double value = 0.0;
};

struct ExponentFit {
  std::string variable;
  double exponent = 0.0;
  double stderr_ = 0.0;
  bool fitted = false;  // false when the variable did not vary
};

struct BoundFit {
  bool refused = false;
  double floor = 0.0;  // largest |value| seen when refused
  std::vector<ExponentFit> exponents;  // alpha, energy, t
  double prefactor = 0.0;  // geometric mean of value / model at the model exponents
  double intercept = 0.0;  // exp of the fitted log-intercept
  double rms_log_residual = 0.0;
};

/// Least-squares fit of log value = c + a log α + b log E + p log t over all
/// points, dropping variables that do not vary. The prefactor is evaluated
/// at the model exponents (model_alpha, model_energy, model_t). Refused if
/// every value is at or below `floor`.
BoundFit bound_evaluation(const std::vector<ScalingPoint>& points, double model_alpha,
                          double model_energy, double model_t, double floor = 1e-10);

/// Decades spanned by a positive variable over the points.
double decades(const std::vector<ScalingPoint>& points, double ScalingPoint::*member);

}  // namespace avl
