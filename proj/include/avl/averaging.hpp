#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "avl/geometry.hpp"
#include "avl/tensor.hpp"

namespace avl {

/// Shell tolerance: every ensemble velocity satisfies |η(y,y) - 1| <= this.
inline constexpr double kShellTolerance = 1e-9;

struct EnsembleSpec {
  int count = 1;
  Vector mean_velocity;  // ŷ_c, unit timelike
  double spread = 0.0;   // rest-frame velocity standard deviation
  /// Rest-frame position standard deviation. Positions are drawn on the
  /// rest-frame simultaneity slice through `center`.
  double bunch_width = 0.0;
  Vector center;  // empty means the origin
  std::uint64_t seed = 1;
  /// Quiet start: odd-indexed particles copy the position of their even
  /// partner with the rest-frame velocity offset negated.
  bool antithetic = false;
};

struct Particle {
  Vector x;
  Vector y;
  double w = 1.0;
};

struct Ensemble {
  std::vector<Particle> particles;
  std::uint64_t seed = 0;
  EnsembleSpec spec;

  int dim() const { return particles.empty() ? 0 : static_cast<int>(particles.front().y.size()); }
  std::size_t size() const { return particles.size(); }
};

/// Per particle the generator draws d-1 rest-frame velocity normals, then
/// d-1 rest-frame position normals, from a mt19937_64 seeded with
/// spec.seed (antithetic partners draw nothing). Throws DomainError if ŷ_c
/// is not unit timelike.
Ensemble sample_ensemble(const EnsembleSpec& spec);

/// Columns a, x0..x{d-1}, y0..y{d-1}, w with 17 significant digits.
void write_ensemble_csv(std::ostream& out, const Ensemble& ensemble);
Ensemble read_ensemble_csv(std::istream& in);

/// Weighted fiber moments of a particle selection.
struct MomentSet {
  double vol = 0.0;  // total selected weight
  Vector m1;         // <y^i>
  Matrix m2;         // <y^i y^j>
  Rank3 m3;          // <y^m y^s y^l>

  int dim() const { return static_cast<int>(m1.size()); }
  double energy() const { return m1[0]; }
};

/// Moments of a single unit velocity (delta distribution).
MomentSet delta_moments(const Vector& y);

/// Global moments of the whole ensemble. Reduced over fixed-size blocks
/// in block order, so the result does not depend on `workers`.
MomentSet compute_moments(const Ensemble& ensemble, int workers = 1);

/// Moments of the particles whose spatial components lie within `radius`
/// (Euclidean, chart components 1..d-1) of `at`. Throws
/// DegenerateMomentsError if the selection is empty.
MomentSet compute_kernel_moments(const Ensemble& ensemble, const Vector& at, double radius,
                                 int workers = 1);

/// Source of the moments feeding the averaged connection at an event.
class MomentProvider {
 public:
  virtual ~MomentProvider() = default;
  virtual std::string name() const = 0;
  virtual MomentSet moments_at(const Vector& x) const = 0;
};

class ConstantMoments final : public MomentProvider {
 public:
  explicit ConstantMoments(MomentSet moments) : moments_(std::move(moments)) {}
  std::string name() const override { return "constant"; }
  MomentSet moments_at(const Vector&) const override { return moments_; }

 private:
  MomentSet moments_;
};

/// Radius-r spatial kernel over a fixed ensemble, uniform weights inside
/// the ball; falls back to the global moments where the ball is empty.
class KernelMoments final : public MomentProvider {
 public:
  KernelMoments(std::shared_ptr<const Ensemble> ensemble, double radius);
  std::string name() const override { return "kernel"; }
  MomentSet moments_at(const Vector& x) const override;
  double radius() const { return radius_; }

 private:
  std::shared_ptr<const Ensemble> ensemble_;
  double radius_;
  MomentSet global_;
};

/// Moments recorded along a transported ensemble, keyed by the chart time
/// of the ensemble mean. Queries interpolate in x^0 with four-point
/// Lagrange stencils and clamp outside the recorded range.
class MomentHistory final : public MomentProvider {
 public:
  MomentHistory() = default;
  std::string name() const override { return "history"; }
  MomentSet moments_at(const Vector& x) const override { return at_time(x[0]); }

  /// Times must be appended in strictly increasing order.
  void append(double time, MomentSet moments);
  MomentSet at_time(double t) const;

  std::size_t size() const { return times_.size(); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<MomentSet>& entries() const { return entries_; }

 private:
  std::vector<double> times_;
  std::vector<MomentSet> entries_;
};

/// Γ̄^i_jk(x) built from the fiber moments; never looks at a velocity.
/// `flip_third_moment` negates the m3 term (fault injection for the
/// validation suite only).
Rank3 averaged_coeffs(const Chart& chart, const FieldConfiguration& field,
                      const MomentSet& moments, const Vector& x, bool flip_third_moment = false);

/// -Γ̄^i_jk y^j y^k evaluated without assembling the full coefficient array.
Vector averaged_acceleration(const Chart& chart, const FieldConfiguration& field,
                             const MomentSet& moments, const Vector& x, const Vector& y,
                             bool flip_third_moment = false);

class AveragedConnection final : public ConnectionField {
 public:
  AveragedConnection(std::shared_ptr<const Chart> chart, FieldConfiguration field,
                     std::shared_ptr<const MomentProvider> provider, bool flip_third_moment = false);

  int dim() const override { return chart_->dim(); }
  bool affine() const override { return true; }
  std::string id() const override { return "averaged"; }
  Rank3 coefficients(const Vector& x, const Vector& y) const override;
  Vector acceleration(const Vector& x, const Vector& y) const override;

  const Chart& chart() const { return *chart_; }
  std::shared_ptr<const Chart> chart_ptr() const { return chart_; }
  const FieldConfiguration& field() const { return field_; }
  const MomentProvider& provider() const { return *provider_; }

 private:
  std::shared_ptr<const Chart> chart_;
  FieldConfiguration field_;
  std::shared_ptr<const MomentProvider> provider_;
  bool flip_;
};

/// Quadratic chart x' = x - x0 + ½ Γ̄(x0)(x - x0)(x - x0) in which the
/// coefficients of an affine symmetric connection vanish at x0.
class NormalFrame {
 public:
  NormalFrame(std::shared_ptr<const ConnectionField> conn, const Vector& origin);

  const Vector& origin() const { return origin_; }
  const Rank3& quadratic() const { return gamma0_; }

  Vector forward(const Vector& x) const;
  /// Newton iteration; throws DomainError if it does not converge.
  Vector inverse(const Vector& xp) const;
  /// ∂x'/∂x at x
  Matrix jacobian(const Vector& x) const;
  /// Coefficients of the connection in the primed chart, at the event
  /// whose original coordinates are x.
  Rank3 transformed_coefficients(const Vector& x) const;

 private:
  std::shared_ptr<const ConnectionField> conn_;
  Vector origin_;
  Rank3 gamma0_;
};

/// Throws DomainError if `conn` is not affine.
NormalFrame normal_frame(std::shared_ptr<const ConnectionField> conn, const Vector& origin);

}  // namespace avl
