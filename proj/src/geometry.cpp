#include "avl/geometry.hpp"

#include <cmath>

#include <fmt/format.h>

#include "avl/errors.hpp"

namespace avl {

// ---------------------------------------------------------------- Metric

Metric::Metric(int dim) : dim_(dim) {
  if (dim < 2 || dim > kMaxDim)
    throw ConfigError(fmt::format("spacetime dimension {} outside [2, {}]", dim, kMaxDim));
}

Matrix Metric::lowered() const {
  Matrix m = Matrix::Zero(dim_, dim_);
  for (int i = 0; i < dim_; ++i) m(i, i) = sign(i);
  return m;
}

Matrix Metric::raised() const { return lowered(); }

Vector Metric::lower(const Vector& y) const {
  Vector out = y;
  for (int i = 1; i < dim_; ++i) out[i] = -y[i];
  return out;
}

Vector Metric::raise(const Vector& y) const { return lower(y); }

double Metric::dot(const Vector& a, const Vector& b) const {
  double s = a[0] * b[0];
  for (int i = 1; i < dim_; ++i) s -= a[i] * b[i];
  return s;
}

Vector Metric::rest_velocity() const {
  Vector e0 = Vector::Zero(dim_);
  e0[0] = 1.0;
  return e0;
}

Matrix boost_from_rest(const Metric& metric, const Vector& u) {
  const int d = metric.dim();
  const double n2 = metric.norm2(u);
  if (std::abs(n2 - 1.0) > 1e-9 || u[0] <= 0.0)
    throw DomainError(fmt::format("boost needs a future unit timelike vector, got η(u,u) = {}", n2));
  const double gamma = u[0];
  Matrix L = Matrix::Identity(d, d);
  L(0, 0) = gamma;
  for (int i = 1; i < d; ++i) {
    L(0, i) = u[i];
    L(i, 0) = u[i];
    for (int j = 1; j < d; ++j) L(i, j) += u[i] * u[j] / (1.0 + gamma);
  }
  return L;
}

Vector velocity_with_energy(const Metric& metric, double energy, const Vector& direction) {
  const int d = metric.dim();
  if (!(energy >= 1.0)) throw DomainError(fmt::format("energy {} below rest energy 1", energy));
  Vector y = Vector::Zero(d);
  y[0] = energy;
  const double speed = std::sqrt(energy * energy - 1.0);
  double n = 0.0;
  for (int i = 0; i < direction.size(); ++i) n += direction[i] * direction[i];
  n = std::sqrt(n);
  if (speed > 0.0) {
    if (n == 0.0 || direction.size() != d - 1)
      throw DomainError("direction must be a non-zero spatial vector");
    for (int i = 1; i < d; ++i) y[i] = speed * direction[i - 1] / n;
  }
  return y;
}

// ---------------------------------------------------------------- Charts

Vector Chart::pull_back(const Vector& x, const Vector& V) const {
  return jacobian(x).partialPivLu().solve(V);
}

Matrix InertialChart::jacobian(const Vector&) const { return Matrix::Identity(dim(), dim()); }
Matrix InertialChart::metric(const Vector&) const { return metric_.lowered(); }
Matrix InertialChart::inverse_metric(const Vector&) const { return metric_.raised(); }
Rank3 InertialChart::christoffel(const Vector&) const { return Rank3(dim()); }

LorentzFrameChart::LorentzFrameChart(const Matrix& lorentz, const Vector& origin)
    : metric_(static_cast<int>(lorentz.rows())),
      lorentz_(lorentz),
      inverse_(metric_.raised() * lorentz.transpose() * metric_.lowered()),
      origin_(origin) {}

CylindricalChart::CylindricalChart(int dim) : dim_(dim) {
  if (dim < 3) throw ConfigError("cylindrical chart needs at least two spatial dimensions");
}

Vector CylindricalChart::to_inertial(const Vector& x) const {
  Vector X = x;
  X[1] = x[1] * std::cos(x[2]);
  X[2] = x[1] * std::sin(x[2]);
  return X;
}

Vector CylindricalChart::from_inertial(const Vector& X) const {
  Vector x = X;
  x[1] = std::hypot(X[1], X[2]);
  x[2] = std::atan2(X[2], X[1]);
  return x;
}

Matrix CylindricalChart::jacobian(const Vector& x) const {
  Matrix J = Matrix::Identity(dim_, dim_);
  const double c = std::cos(x[2]), s = std::sin(x[2]);
  J(1, 1) = c;
  J(1, 2) = -x[1] * s;
  J(2, 1) = s;
  J(2, 2) = x[1] * c;
  return J;
}

Matrix CylindricalChart::metric(const Vector& x) const {
  Matrix g = Metric(dim_).lowered();
  g(2, 2) = -x[1] * x[1];
  return g;
}

Matrix CylindricalChart::inverse_metric(const Vector& x) const {
  Matrix g = Metric(dim_).raised();
  g(2, 2) = -1.0 / (x[1] * x[1]);
  return g;
}

Rank3 CylindricalChart::christoffel(const Vector& x) const {
  Rank3 G(dim_);
  const double r = x[1];
  G(1, 2, 2) = -r;
  G(2, 1, 2) = 1.0 / r;
  G(2, 2, 1) = 1.0 / r;
  return G;
}

std::shared_ptr<const Chart> make_chart(const std::string& name, int dim) {
  if (name == "inertial") return std::make_shared<InertialChart>(dim);
  if (name == "cylindrical") return std::make_shared<CylindricalChart>(dim);
  throw ConfigError(fmt::format("unknown chart '{}'", name));
}

// ---------------------------------------------------------------- Fields

namespace {

struct CatalogEntry {
  FieldConfiguration::Kind kind;
  int min_dim;
  std::map<std::string, double> defaults;
};

const std::map<std::string, CatalogEntry>& catalog() {
  using K = FieldConfiguration::Kind;
  static const std::map<std::string, CatalogEntry> entries{
      {"zero", {K::kZero, 2, {}}},
      {"uniform_electric", {K::kUniformElectric, 2, {{"strength", 1.0}, {"axis", 1.0}}}},
      {"uniform_magnetic",
       {K::kUniformMagnetic, 3, {{"strength", 1.0}, {"axis_a", 1.0}, {"axis_b", 2.0}}}},
      {"crossed", {K::kCrossed, 3, {{"electric", 1.0}, {"magnetic", 1.0}}}},
      {"plane_wave", {K::kPlaneWave, 3, {{"amplitude", 1.0}, {"frequency", 1.0}}}},
      {"polynomial", {K::kPolynomial, 3, {{"a", 0.1}, {"b", 0.1}, {"c", 0.05}}}},
  };
  return entries;
}

void check_axis(const std::string& name, const char* key, double value, int dim) {
  if (value != std::floor(value) || value < 1 || value >= dim)
    throw ConfigError(fmt::format("potential '{}': {} = {} is not a spatial axis in d = {}", name,
                                  key, value, dim));
}

}  // namespace

FieldConfiguration::FieldConfiguration(Kind kind, std::string name,
                                       std::map<std::string, double> params, int dim)
    : kind_(kind), name_(std::move(name)), params_(std::move(params)), dim_(dim) {}

FieldConfiguration FieldConfiguration::from_catalog(const std::string& name,
                                                    const std::map<std::string, double>& params,
                                                    int dim) {
  const auto it = catalog().find(name);
  if (it == catalog().end()) throw ConfigError(fmt::format("unknown potential '{}'", name));
  const CatalogEntry& entry = it->second;
  if (dim < entry.min_dim || dim > kMaxDim)
    throw ConfigError(fmt::format("potential '{}' needs d >= {}, got {}", name, entry.min_dim, dim));

  std::map<std::string, double> merged = entry.defaults;
  for (const auto& [key, value] : params) {
    if (!entry.defaults.contains(key))
      throw ConfigError(fmt::format("potential '{}' has no parameter '{}'", name, key));
    if (!std::isfinite(value))
      throw ConfigError(fmt::format("potential '{}': parameter '{}' is not finite", name, key));
    merged[key] = value;
  }
  if (entry.kind == Kind::kUniformElectric) check_axis(name, "axis", merged["axis"], dim);
  if (entry.kind == Kind::kUniformMagnetic) {
    check_axis(name, "axis_a", merged["axis_a"], dim);
    check_axis(name, "axis_b", merged["axis_b"], dim);
    if (merged["axis_a"] == merged["axis_b"])
      throw ConfigError("uniform_magnetic: axis_a and axis_b must differ");
  }
  return FieldConfiguration(entry.kind, name, std::move(merged), dim);
}

FieldConfiguration FieldConfiguration::zero(int dim) { return from_catalog("zero", {}, dim); }

FieldConfiguration FieldConfiguration::uniform_electric(double strength, int dim, int axis) {
  return from_catalog("uniform_electric", {{"strength", strength}, {"axis", axis}}, dim);
}

FieldConfiguration FieldConfiguration::uniform_magnetic(double strength, int dim, int axis_a,
                                                        int axis_b) {
  return from_catalog("uniform_magnetic",
                      {{"strength", strength}, {"axis_a", axis_a}, {"axis_b", axis_b}}, dim);
}

FieldConfiguration FieldConfiguration::scaled(double factor) const {
  FieldConfiguration out = *this;
  out.scale_ *= factor;
  return out;
}

Vector FieldConfiguration::potential(const Vector& X) const {
  Vector A = Vector::Zero(dim_);
  const int last = dim_ - 1;
  switch (kind_) {
    case Kind::kZero:
      break;
    case Kind::kUniformElectric:
      A[0] = param("strength") * X[axis("axis")];
      break;
    case Kind::kUniformMagnetic:
      A[axis("axis_b")] = param("strength") * X[axis("axis_a")];
      break;
    case Kind::kCrossed:
      A[0] = param("electric") * X[1];
      A[2] = param("magnetic") * X[1];
      break;
    case Kind::kPlaneWave:
      A[1] = param("amplitude") * std::sin(param("frequency") * (X[0] - X[last]));
      break;
    case Kind::kPolynomial:
      A[0] = param("a") * X[1] * X[1];
      A[1] = param("c") * X[0] * X[2];
      A[2] = param("b") * X[1] * X[1];
      break;
  }
  return scale_ * A;
}

Matrix FieldConfiguration::field(const Vector& X) const {
  Matrix F = Matrix::Zero(dim_, dim_);
  auto set = [&F](int i, int j, double v) {
    F(i, j) = v;
    F(j, i) = -v;
  };
  const int last = dim_ - 1;
  switch (kind_) {
    case Kind::kZero:
      break;
    case Kind::kUniformElectric:
      // A_0 = k x^a  =>  F_0a = -k
      set(0, axis("axis"), -param("strength"));
      break;
    case Kind::kUniformMagnetic:
      // A_b = k x^a  =>  F_ab = k
      set(axis("axis_a"), axis("axis_b"), param("strength"));
      break;
    case Kind::kCrossed:
      set(0, 1, -param("electric"));
      set(1, 2, param("magnetic"));
      break;
    case Kind::kPlaneWave: {
      const double w = param("frequency");
      const double v = param("amplitude") * w * std::cos(w * (X[0] - X[last]));
      set(0, 1, v);
      set(1, last, v);
      break;
    }
    case Kind::kPolynomial: {
      const double a = param("a"), b = param("b"), c = param("c");
      set(0, 1, c * X[2] - 2.0 * a * X[1]);
      set(1, 2, 2.0 * b * X[1] - c * X[0]);
      break;
    }
  }
  return scale_ * F;
}

Matrix FieldConfiguration::field_mixed(const Vector& X) const {
  Matrix F = field(X);
  for (int j = 0; j < dim_; ++j)
    for (int i = 1; i < dim_; ++i) F(i, j) = -F(i, j);
  return F;
}

Matrix FieldConfiguration::field_in_chart(const Chart& chart, const Vector& x) const {
  if (chart.inertial() && chart.name() == "inertial") return field(x);
  const Matrix J = chart.jacobian(x);
  return J.transpose() * field(chart.to_inertial(x)) * J;
}

Matrix field_tensor(const FieldConfiguration& config, const Vector& X) { return config.field(X); }

// ---------------------------------------------------------------- Lorentz connection

Rank3 lorentz_coeffs(const Chart& chart, const FieldConfiguration& field, const Vector& x,
                     const Vector& y) {
  const int d = chart.dim();
  const Matrix g = chart.metric(x);
  const Vector yl = g * y;
  const double n2 = y.dot(yl);
  if (!(n2 > kTimelikeEpsilon))
    throw DomainError(fmt::format("Lorentz connection needs timelike y, got η(y,y) = {:.17g}", n2));

  const Matrix Fm = chart.inverse_metric(x) * field.field_in_chart(chart, x);
  const Vector Fy = Fm * y;
  const double root = std::sqrt(n2);
  const double c1 = 0.5 / root;

  Rank3 G = chart.christoffel(x);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      for (int k = j; k < d; ++k) {
        const double v = c1 * (Fm(i, j) * yl[k] + Fm(i, k) * yl[j]) +
                         Fy[i] * c1 * (g(j, k) - yl[j] * yl[k] / n2);
        G(i, j, k) += v;
        if (k != j) G(i, k, j) = G(i, j, k);
      }
    }
  }
  return G;
}

Vector LorentzConnection::acceleration(const Vector& x, const Vector& y) const {
  const Matrix g = chart_->metric(x);
  const Vector yl = g * y;
  const double n2 = y.dot(yl);
  if (!(n2 > kTimelikeEpsilon))
    throw DomainError(fmt::format("Lorentz connection needs timelike y, got η(y,y) = {:.17g}", n2));
  const Vector Fy = chart_->inverse_metric(x) * field_.field_in_chart(*chart_, x) * y;
  // c1 (2 Fy (yl.y) + Fy (n2 - (yl.y)^2 / n2)) with yl.y = n2; the second
  // bracket is identically zero
  const double root = std::sqrt(n2);
  Vector a = -root * Fy;
  if (!chart_->inertial()) a -= chart_->christoffel(x).contract(y);
  return a;
}

LorentzConnection::LorentzConnection(std::shared_ptr<const Chart> chart, FieldConfiguration field)
    : chart_(std::move(chart)), field_(std::move(field)) {
  if (chart_->dim() != field_.dim())
    throw ConfigError("chart and field configuration disagree on the dimension");
}

}  // namespace avl
