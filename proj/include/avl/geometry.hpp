#pragma once

#include <map>
#include <memory>
#include <string>

#include "avl/tensor.hpp"

namespace avl {

/// Lower bound on η(y,y) below which a vector is not treated as timelike.
inline constexpr double kTimelikeEpsilon = 1e-10;

/// Minkowski metric η = diag(+1, -1, ..., -1) in an inertial chart.
class Metric {
 public:
  explicit Metric(int dim = 4);

  int dim() const { return dim_; }
  double sign(int i) const { return i == 0 ? 1.0 : -1.0; }

  Matrix lowered() const;  // η_ij
  Matrix raised() const;   // η^ij

  Vector lower(const Vector& y) const;
  Vector raise(const Vector& y) const;
  double dot(const Vector& a, const Vector& b) const;
  double norm2(const Vector& y) const { return dot(y, y); }
  bool timelike(const Vector& y) const { return norm2(y) > kTimelikeEpsilon; }

  /// Unit observer at rest in this chart, e0 = (1, 0, ..., 0).
  Vector rest_velocity() const;

 private:
  int dim_;
};

/// Pure boost Λ with Λ e0 = u, for a future-pointing unit timelike u.
Matrix boost_from_rest(const Metric& metric, const Vector& u);

/// Unit velocity with energy `energy` = y^0 moving along the spatial
/// direction `direction` (normalised internally).
Vector velocity_with_energy(const Metric& metric, double energy, const Vector& direction);

/// A coordinate chart on Minkowski space. Every chart knows how to map to
/// and from the inertial chart and supplies the metric components and the
/// Levi-Civita coefficients of η in its own coordinates.
class Chart {
 public:
  virtual ~Chart() = default;

  virtual std::string name() const = 0;
  virtual int dim() const = 0;
  virtual bool inertial() const { return false; }

  virtual Vector to_inertial(const Vector& x) const = 0;
  virtual Vector from_inertial(const Vector& X) const = 0;
  /// J^I_a = ∂X^I/∂x^a
  virtual Matrix jacobian(const Vector& x) const = 0;
  virtual Matrix metric(const Vector& x) const = 0;
  virtual Matrix inverse_metric(const Vector& x) const = 0;
  virtual Rank3 christoffel(const Vector& x) const = 0;

  /// Chart components of a tangent vector at x -> inertial components.
  Vector push_forward(const Vector& x, const Vector& v) const { return jacobian(x) * v; }
  /// Inertial components of a tangent vector at x -> chart components.
  Vector pull_back(const Vector& x, const Vector& V) const;
};

class InertialChart final : public Chart {
 public:
  explicit InertialChart(int dim = 4) : metric_(dim) {}

  std::string name() const override { return "inertial"; }
  int dim() const override { return metric_.dim(); }
  bool inertial() const override { return true; }

  Vector to_inertial(const Vector& x) const override { return x; }
  Vector from_inertial(const Vector& X) const override { return X; }
  Matrix jacobian(const Vector& x) const override;
  Matrix metric(const Vector& x) const override;
  Matrix inverse_metric(const Vector& x) const override;
  Rank3 christoffel(const Vector& x) const override;

 private:
  Metric metric_;
};

/// Inertial chart of another observer: X = origin + Λ x with Λ a Lorentz
/// transformation. Used to run kinetic experiments in a bunch's comoving
/// frame; the metric keeps its Minkowski form and the coefficients of η
/// vanish.
class LorentzFrameChart final : public Chart {
 public:
  LorentzFrameChart(const Matrix& lorentz, const Vector& origin);

  std::string name() const override { return "lorentz_frame"; }
  int dim() const override { return metric_.dim(); }
  bool inertial() const override { return true; }

  Vector to_inertial(const Vector& x) const override { return origin_ + lorentz_ * x; }
  Vector from_inertial(const Vector& X) const override { return inverse_ * (X - origin_); }
  Matrix jacobian(const Vector&) const override { return lorentz_; }
  Matrix metric(const Vector&) const override { return metric_.lowered(); }
  Matrix inverse_metric(const Vector&) const override { return metric_.raised(); }
  Rank3 christoffel(const Vector&) const override { return Rank3(metric_.dim()); }

  const Matrix& lorentz() const { return lorentz_; }

 private:
  Metric metric_;
  Matrix lorentz_;
  Matrix inverse_;
  Vector origin_;
};

/// (t, r, φ, x^3, ...): cylindrical coordinates on the (x^1, x^2) plane.
class CylindricalChart final : public Chart {
 public:
  explicit CylindricalChart(int dim = 4);

  std::string name() const override { return "cylindrical"; }
  int dim() const override { return dim_; }

  Vector to_inertial(const Vector& x) const override;
  Vector from_inertial(const Vector& X) const override;
  Matrix jacobian(const Vector& x) const override;
  Matrix metric(const Vector& x) const override;
  Matrix inverse_metric(const Vector& x) const override;
  Rank3 christoffel(const Vector& x) const override;

 private:
  int dim_;
};

/// "inertial" or "cylindrical"; anything else is a ConfigError.
std::shared_ptr<const Chart> make_chart(const std::string& name, int dim);

/// An external electromagnetic potential from a closed catalog, with its
/// field tensor evaluated analytically. Components are inertial; charge
/// over mass is folded into the amplitude parameters.
class FieldConfiguration {
 public:
  enum class Kind { kZero, kUniformElectric, kUniformMagnetic, kCrossed, kPlaneWave, kPolynomial };

  /// Throws ConfigError on an unknown name or parameter, or on a
  /// dimension the potential cannot live in.
  static FieldConfiguration from_catalog(const std::string& name,
                                         const std::map<std::string, double>& params, int dim);

  static FieldConfiguration zero(int dim = 4);
  static FieldConfiguration uniform_electric(double strength, int dim = 4, int axis = 1);
  static FieldConfiguration uniform_magnetic(double strength, int dim = 4, int axis_a = 1,
                                             int axis_b = 2);

  int dim() const { return dim_; }
  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  const std::map<std::string, double>& params() const { return params_; }

  /// A_j(X)
  Vector potential(const Vector& X) const;
  /// F_ij(X) = ∂_i A_j - ∂_j A_i
  Matrix field(const Vector& X) const;
  /// F^i_j(X) = η^ik F_kj
  Matrix field_mixed(const Vector& X) const;
  /// F_ab at chart point x: J^I_a J^J_b F_IJ(X(x)).
  Matrix field_in_chart(const Chart& chart, const Vector& x) const;

  /// The configuration with A (and hence F) multiplied by `factor`.
  FieldConfiguration scaled(double factor) const;

 private:
  FieldConfiguration(Kind kind, std::string name, std::map<std::string, double> params, int dim);
  double param(const char* key) const { return params_.at(key); }
  int axis(const char* key) const { return static_cast<int>(params_.at(key)); }

  Kind kind_;
  std::string name_;
  std::map<std::string, double> params_;
  int dim_;
  double scale_ = 1.0;
};

/// Analytic F_ij of the configuration at the inertial event X.
Matrix field_tensor(const FieldConfiguration& config, const Vector& X);

/// Coefficient map Γ^i_jk(x, y) of a linear connection along the slit
/// tangent bundle. Affine connections ignore y.
class ConnectionField {
 public:
  virtual ~ConnectionField() = default;

  virtual int dim() const = 0;
  virtual bool affine() const = 0;
  virtual std::string id() const = 0;
  virtual Rank3 coefficients(const Vector& x, const Vector& y) const = 0;

  /// Right-hand side of the autoparallel equation, a^i = -Γ^i_jk y^j y^k.
  virtual Vector acceleration(const Vector& x, const Vector& y) const {
    return -coefficients(x, y).contract(y);
  }
};

inline Vector autoparallel_acceleration(const ConnectionField& conn, const Vector& x,
                                        const Vector& y) {
  return conn.acceleration(x, y);
}

/// Levi-Civita connection of η in a chart; zero in inertial charts.
class LeviCivitaConnection final : public ConnectionField {
 public:
  explicit LeviCivitaConnection(std::shared_ptr<const Chart> chart) : chart_(std::move(chart)) {}

  int dim() const override { return chart_->dim(); }
  bool affine() const override { return true; }
  std::string id() const override { return "levi_civita"; }
  Rank3 coefficients(const Vector& x, const Vector&) const override {
    return chart_->christoffel(x);
  }

 private:
  std::shared_ptr<const Chart> chart_;
};

/// Coefficients of the velocity-dependent connection whose autoparallels
/// are the Lorentz force curves. Throws DomainError if η(y,y) is not above
/// kTimelikeEpsilon.
Rank3 lorentz_coeffs(const Chart& chart, const FieldConfiguration& field, const Vector& x,
                     const Vector& y);

class LorentzConnection final : public ConnectionField {
 public:
  LorentzConnection(std::shared_ptr<const Chart> chart, FieldConfiguration field);

  int dim() const override { return chart_->dim(); }
  bool affine() const override { return false; }
  std::string id() const override { return "lorentz"; }
  Rank3 coefficients(const Vector& x, const Vector& y) const override {
    return lorentz_coeffs(*chart_, field_, x, y);
  }
  /// Same contraction as coefficients(x, y).contract(y), grouped by factor
  /// so the velocity-squared terms cancel before they are formed.
  Vector acceleration(const Vector& x, const Vector& y) const override;

  const Chart& chart() const { return *chart_; }
  std::shared_ptr<const Chart> chart_ptr() const { return chart_; }
  const FieldConfiguration& field() const { return field_; }

 private:
  std::shared_ptr<const Chart> chart_;
  FieldConfiguration field_;
};

}  // namespace avl
