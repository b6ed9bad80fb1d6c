#include "avl/diagnostics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <ostream>

#include <Eigen/SVD>
#include <fmt/format.h>

#include "avl/errors.hpp"
#include "avl/parallel.hpp"

namespace avl {

MeanVelocity mean_velocity(const Vector& m1) {
  const Metric eta(static_cast<int>(m1.size()));
  const double n2 = eta.norm2(m1);
  if (!(n2 > 0.0)) return {Vector::Zero(m1.size())};
  return {m1 / std::sqrt(n2)};
}

MeanVelocity mean_velocity(const MomentSet& moments) { return mean_velocity(moments.m1); }

BarMetric bar_metric(const MeanVelocity& U) {
  if (U.zero()) throw DomainError("η̄ is undefined for a zero mean velocity");
  const int d = static_cast<int>(U.U.size());
  const Metric eta(d);
  if (std::abs(eta.norm2(U.U) - 1.0) > 1e-9)
    throw DomainError(fmt::format("η̄ needs η(U,U) = 1, got {:.17g}", eta.norm2(U.U)));
  const Vector Ul = eta.lower(U.U);
  BarMetric out;
  out.U_ = U.U;
  out.g_ = -eta.lowered() + 2.0 * Ul * Ul.transpose();
  Eigen::LLT<Matrix> llt(out.g_);
  if (llt.info() != Eigen::Success) throw DomainError("η̄ is not positive definite");
  out.factor_ = llt.matrixL();
  return out;
}

double spatial_norm2(const Vector& v) { return v.tail(v.size() - 1).squaredNorm(); }

// ---------------------------------------------------------------- Diameter

DiameterResult diameter(const std::vector<Vector>& velocities, const BarMetric& metric,
                        int workers) {
  DiameterResult r;
  const std::size_t n = velocities.size();
  if (n < 2) return r;
  std::vector<Vector> z(n);
  for (std::size_t a = 0; a < n; ++a) z[a] = metric.orthonormal(velocities[a]);

  if (n <= kExactDiameterLimit) {
    std::vector<double> partial(parallel::block_count(n), 0.0);
    parallel::for_blocks(n, workers, [&](std::size_t block, std::size_t begin, std::size_t end) {
      double best = 0.0;
      for (std::size_t a = begin; a < end; ++a)
        for (std::size_t b = a + 1; b < n; ++b) best = std::max(best, (z[a] - z[b]).squaredNorm());
      partial[block] = best;
    });
    const double best = *std::max_element(partial.begin(), partial.end());
    r.value = r.lower = r.upper = std::sqrt(best);
    r.exact = true;
    return r;
  }

  Vector lo = z.front(), hi = z.front();
  for (const Vector& v : z) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const Vector width = hi - lo;
  r.upper = width.norm();
  r.lower = width.maxCoeff();
  r.value = r.upper;
  r.exact = false;
  return r;
}

DiameterResult diameter(const Ensemble& ensemble, const BarMetric& metric, int workers) {
  std::vector<Vector> ys;
  ys.reserve(ensemble.size());
  for (const Particle& p : ensemble.particles) ys.push_back(p.y);
  return diameter(ys, metric, workers);
}

double operator_norm(const Matrix& field_mixed, const BarMetric& metric) {
  // ‖F y‖ = |Lᵀ F y| with y = L⁻ᵀ z
  const Matrix& L = metric.factor();
  const Matrix Lt = L.transpose();
  const Matrix A = Lt * field_mixed * Lt.inverse();
  Eigen::JacobiSVD<Matrix> svd(A);
  return svd.singularValues()(0);
}

// ---------------------------------------------------------------- Trajectory comparison

LabTimeResampler::LabTimeResampler(const Trajectory& trajectory) {
  for (const auto& s : trajectory.samples) {
    if (!times_.empty() && !(s.x[0] > times_.back()))
      throw DomainError("laboratory time must increase along the trajectory");
    times_.push_back(s.x[0]);
    xs_.push_back(s.x);
    ys_.push_back(s.y);
  }
  if (times_.size() < 2) throw DomainError("resampling needs at least two samples");
}

PhaseState LabTimeResampler::at(double t) const {
  const std::size_t n = times_.size();
  const double slack = 1e-12 * (1.0 + std::abs(t));
  if (t < times_.front() - slack || t > times_.back() + slack)
    throw OutOfDomainError(fmt::format("laboratory time {} outside [{}, {}]", t, times_.front(),
                                       times_.back()));
  std::size_t k = static_cast<std::size_t>(
      std::upper_bound(times_.begin(), times_.end(), t) - times_.begin());
  k = std::clamp<std::size_t>(k, 1, n - 1);
  const std::size_t a = k - 1, b = k;
  const double t0 = times_[a], t1 = times_[b], dt = t1 - t0;
  const double u = (t - t0) / dt;
  if (u == 0.0) return {xs_[a], ys_[a]};
  if (u == 1.0) return {xs_[b], ys_[b]};

  // x: cubic Hermite with dx/dt_lab = y / y^0
  const double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
  const double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
  const Vector v0 = ys_[a] / ys_[a][0], v1 = ys_[b] / ys_[b][0];
  const Vector x = h00 * xs_[a] + h10 * dt * v0 + h01 * xs_[b] + h11 * dt * v1;

  // y: four-point Lagrange
  std::size_t first = a >= 1 ? a - 1 : 0;
  first = std::min(first, n >= 4 ? n - 4 : 0);
  const std::size_t width = std::min<std::size_t>(4, n);
  Vector y = Vector::Zero(ys_[a].size());
  for (std::size_t i = first; i < first + width; ++i) {
    double w = 1.0;
    for (std::size_t j = first; j < first + width; ++j)
      if (j != i) w *= (t - times_[j]) / (times_[i] - times_[j]);
    y += w * ys_[i];
  }
  return {x, y};
}

ThetaSummary theta_diagnostics(const Trajectory& lorentz, const Trajectory& averaged,
                               const MomentProvider& moments) {
  ThetaSummary out;
  const LabTimeResampler resampled(averaged);
  for (const auto& s : lorentz.samples) {
    const double t = s.x[0];
    if (t > resampled.t_max()) break;
    const PhaseState tilde = resampled.at(std::max(t, resampled.t_min()));
    const MomentSet m = moments.moments_at(s.x);
    const MeanVelocity U = mean_velocity(m);
    ThetaSample row;
    row.t_lab = t;
    row.theta2 = spatial_norm2(s.y) - spatial_norm2(m.m1);
    row.theta_bar2 = spatial_norm2(m.m1) - spatial_norm2(tilde.y);
    row.gamma_bar = U.zero() ? 0.0 : U.U[0];
    row.gap = std::abs(row.theta2 - row.theta_bar2);
    out.theta2_sup = std::max(out.theta2_sup, std::abs(row.theta2));
    out.theta_bar2_sup = std::max(out.theta_bar2_sup, std::abs(row.theta_bar2));
    out.gap_sup = std::max(out.gap_sup, row.gap);
    out.samples.push_back(row);
  }
  return out;
}

void write_report_csv(std::ostream& out, const ComparisonReport& report) {
  out << "t_lab,dx,dy,theta2,theta_bar2,gamma_bar,alpha,E\n";
  for (const auto& s : report.samples)
    out << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n",
                       s.t_lab, s.dx, s.dy, s.theta2, s.theta_bar2, s.gamma_bar, s.alpha,
                       s.energy);
}

// ---------------------------------------------------------------- Bound fits

double decades(const std::vector<ScalingPoint>& points, double ScalingPoint::*member) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& p : points) {
    const double v = p.*member;
    if (v > 0.0) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  return hi > 0.0 ? std::log10(hi / lo) : 0.0;
}

BoundFit bound_evaluation(const std::vector<ScalingPoint>& points, double model_alpha,
                          double model_energy, double model_t, double floor) {
  BoundFit fit;
  double largest = 0.0;
  for (const auto& p : points) largest = std::max(largest, std::abs(p.value));
  if (points.empty() || largest <= floor) {
    fit.refused = true;
    fit.floor = largest;
    return fit;
  }

  std::vector<ScalingPoint> usable;
  for (const auto& p : points)
    if (p.value > floor && p.alpha > 0.0 && p.energy > 0.0 && p.t > 0.0) usable.push_back(p);

  const std::array<std::pair<const char*, double ScalingPoint::*>, 3> vars{
      {{"alpha", &ScalingPoint::alpha}, {"energy", &ScalingPoint::energy}, {"t", &ScalingPoint::t}}};
  std::vector<int> active;
  for (int v = 0; v < 3; ++v) {
    ExponentFit e;
    e.variable = vars[static_cast<std::size_t>(v)].first;
    fit.exponents.push_back(e);
    if (decades(usable, vars[static_cast<std::size_t>(v)].second) > 1e-9) active.push_back(v);
  }

  const auto n = static_cast<Eigen::Index>(usable.size());
  const auto p = static_cast<Eigen::Index>(active.size() + 1);
  if (n < p + 1) {
    fit.refused = true;
    fit.floor = largest;
    return fit;
  }
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& pt = usable[static_cast<std::size_t>(r)];
    X(r, 0) = 1.0;
    for (std::size_t c = 0; c < active.size(); ++c)
      X(r, static_cast<Eigen::Index>(c + 1)) =
          std::log(pt.*vars[static_cast<std::size_t>(active[c])].second);
    rhs(r) = std::log(pt.value);
  }
  const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(rhs);
  const Eigen::VectorXd resid = rhs - X * beta;
  const double sigma2 = resid.squaredNorm() / static_cast<double>(n - p);
  const Eigen::MatrixXd cov = sigma2 * (X.transpose() * X).inverse();

  fit.intercept = std::exp(beta(0));
  fit.rms_log_residual = std::sqrt(resid.squaredNorm() / static_cast<double>(n));
  for (std::size_t c = 0; c < active.size(); ++c) {
    auto& e = fit.exponents[static_cast<std::size_t>(active[c])];
    const auto idx = static_cast<Eigen::Index>(c + 1);
    e.exponent = beta(idx);
    e.stderr_ = std::sqrt(std::max(0.0, cov(idx, idx)));
    e.fitted = true;
  }

  double log_sum = 0.0;
  for (const auto& pt : usable)
    log_sum += std::log(pt.value) - model_alpha * std::log(pt.alpha) -
               model_energy * std::log(pt.energy) - model_t * std::log(pt.t);
  fit.prefactor = std::exp(log_sum / static_cast<double>(usable.size()));
  return fit;
}

}  // namespace avl
