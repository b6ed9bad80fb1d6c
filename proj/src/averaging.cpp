#include "avl/averaging.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "avl/errors.hpp"
#include "avl/parallel.hpp"

namespace avl {

// ---------------------------------------------------------------- Sampling

Ensemble sample_ensemble(const EnsembleSpec& spec) {
  const int d = static_cast<int>(spec.mean_velocity.size());
  const Metric eta(d);
  if (spec.count < 1) throw DomainError("ensemble needs at least one particle");
  if (!(spec.spread >= 0.0) || !(spec.bunch_width >= 0.0))
    throw DomainError("spread and bunch width must be non-negative");
  const Matrix boost = boost_from_rest(eta, spec.mean_velocity);
  const Vector center = spec.center.size() == 0 ? Vector(Vector::Zero(d)) : spec.center;

  Ensemble out;
  out.seed = spec.seed;
  out.spec = spec;
  out.particles.reserve(static_cast<std::size_t>(spec.count));

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector u = Vector::Zero(d);
  Vector offset = Vector::Zero(d);
  for (int a = 0; a < spec.count; ++a) {
    if (spec.antithetic && a % 2 == 1) {
      u = -u;
    } else {
      for (int i = 1; i < d; ++i) u[i] = spec.spread * normal(rng);
      for (int i = 1; i < d; ++i) offset[i] = spec.bunch_width * normal(rng);
    }

    Particle p;
    if (spec.spread == 0.0) {
      p.y = spec.mean_velocity;
    } else {
      u[0] = std::sqrt(1.0 + u.tail(d - 1).squaredNorm());
      p.y = boost * u;
      p.y[0] = std::sqrt(1.0 + p.y.tail(d - 1).squaredNorm());
    }
    p.x = spec.bunch_width == 0.0 ? center : Vector(center + boost * offset);
    p.w = 1.0;
    out.particles.push_back(std::move(p));
  }
  return out;
}

void write_ensemble_csv(std::ostream& out, const Ensemble& ensemble) {
  const int d = ensemble.dim();
  out << "a";
  for (int i = 0; i < d; ++i) out << ",x" << i;
  for (int i = 0; i < d; ++i) out << ",y" << i;
  out << ",w\n";
  for (std::size_t a = 0; a < ensemble.size(); ++a) {
    const Particle& p = ensemble.particles[a];
    std::string line = fmt::format("{}", a);
    for (int i = 0; i < d; ++i) line += fmt::format(",{:.17g}", p.x[i]);
    for (int i = 0; i < d; ++i) line += fmt::format(",{:.17g}", p.y[i]);
    line += fmt::format(",{:.17g}\n", p.w);
    out << line;
  }
}

Ensemble read_ensemble_csv(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw ConfigError("ensemble CSV is empty");
  const long commas = std::count(header.begin(), header.end(), ',');
  // a, x0..x{d-1}, y0..y{d-1}, w
  if (commas < 5 || (commas - 1) % 2 != 0) throw ConfigError("malformed ensemble CSV header");
  const int dim = static_cast<int>(commas - 1) / 2;

  Ensemble ensemble;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<double> values;
    std::getline(row, cell, ',');  // index column
    while (std::getline(row, cell, ',')) values.push_back(std::stod(cell));
    if (static_cast<int>(values.size()) != 2 * dim + 1)
      throw ConfigError(fmt::format("ensemble CSV row has {} values, expected {}", values.size(),
                                    2 * dim + 1));
    Particle p;
    p.x = Vector::Map(values.data(), dim);
    p.y = Vector::Map(values.data() + dim, dim);
    p.w = values.back();
    ensemble.particles.push_back(std::move(p));
  }
  return ensemble;
}

// ---------------------------------------------------------------- Moments

namespace {

struct Accumulator {
  explicit Accumulator(int d) : vol(0.0), s1(Vector::Zero(d)), s2(Matrix::Zero(d, d)), s3(d) {}

  void add(const Vector& y, double w) {
    const int d = static_cast<int>(y.size());
    vol += w;
    for (int i = 0; i < d; ++i) {
      const double wi = w * y[i];
      s1[i] += wi;
      for (int j = i; j < d; ++j) {
        const double wij = wi * y[j];
        s2(i, j) += wij;
        for (int k = j; k < d; ++k) s3(i, j, k) += wij * y[k];
      }
    }
  }

  void merge(const Accumulator& o) {
    vol += o.vol;
    s1 += o.s1;
    s2 += o.s2;
    s3 += o.s3;
  }

  MomentSet finish() const {
    const int d = static_cast<int>(s1.size());
    MomentSet m;
    m.vol = vol;
    m.m1 = s1 / vol;
    m.m2 = Matrix::Zero(d, d);
    m.m3 = Rank3(d);
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) {
        m.m2(i, j) = m.m2(j, i) = s2(i, j) / vol;
        for (int k = j; k < d; ++k) {
          const double v = s3(i, j, k) / vol;
          m.m3(i, j, k) = m.m3(i, k, j) = m.m3(j, i, k) = v;
          m.m3(j, k, i) = m.m3(k, i, j) = m.m3(k, j, i) = v;
        }
      }
    return m;
  }

  double vol;
  Vector s1;
  Matrix s2;
  Rank3 s3;
};

template <class Select>
MomentSet reduce(const Ensemble& ensemble, int workers, Select select) {
  const int d = ensemble.dim();
  const std::size_t n = ensemble.size();
  std::vector<Accumulator> partial(parallel::block_count(n), Accumulator(d));
  parallel::for_blocks(n, workers, [&](std::size_t block, std::size_t begin, std::size_t end) {
    Accumulator& acc = partial[block];
    for (std::size_t a = begin; a < end; ++a) {
      const Particle& p = ensemble.particles[a];
      if (select(p)) acc.add(p.y, p.w);
    }
  });
  Accumulator total(d);
  for (const Accumulator& acc : partial) total.merge(acc);
  if (!(total.vol > 0.0)) throw DegenerateMomentsError("moment selection has zero total weight");
  return total.finish();
}

}  // namespace

MomentSet delta_moments(const Vector& y) {
  Accumulator acc(static_cast<int>(y.size()));
  acc.add(y, 1.0);
  return acc.finish();
}

MomentSet compute_moments(const Ensemble& ensemble, int workers) {
  if (ensemble.size() == 0) throw DegenerateMomentsError("empty ensemble");
  return reduce(ensemble, workers, [](const Particle&) { return true; });
}

MomentSet compute_kernel_moments(const Ensemble& ensemble, const Vector& at, double radius,
                                 int workers) {
  if (ensemble.size() == 0) throw DegenerateMomentsError("empty ensemble");
  const int d = ensemble.dim();
  const double r2 = radius * radius;
  try {
    return reduce(ensemble, workers, [&](const Particle& p) {
      double s = 0.0;
      for (int i = 1; i < d; ++i) s += (p.x[i] - at[i]) * (p.x[i] - at[i]);
      return s <= r2;
    });
  } catch (const DegenerateMomentsError&) {
    throw DegenerateMomentsError(
        fmt::format("no particles within radius {} of the evaluation event", radius));
  }
}

KernelMoments::KernelMoments(std::shared_ptr<const Ensemble> ensemble, double radius)
    : ensemble_(std::move(ensemble)), radius_(radius), global_(compute_moments(*ensemble_)) {
  if (!(radius > 0.0)) throw DomainError("kernel radius must be positive");
}

MomentSet KernelMoments::moments_at(const Vector& x) const {
  try {
    return compute_kernel_moments(*ensemble_, x, radius_);
  } catch (const DegenerateMomentsError&) {
    return global_;
  }
}

void MomentHistory::append(double time, MomentSet moments) {
  if (!times_.empty() && !(time > times_.back()))
    throw DomainError("moment history times must increase");
  times_.push_back(time);
  entries_.push_back(std::move(moments));
}

MomentSet MomentHistory::at_time(double t) const {
  if (entries_.empty()) throw DegenerateMomentsError("empty moment history");
  const std::size_t n = times_.size();
  if (n == 1 || t <= times_.front()) return entries_.front();
  if (t >= times_.back()) return entries_.back();

  const std::size_t hi = static_cast<std::size_t>(
      std::upper_bound(times_.begin(), times_.end(), t) - times_.begin());
  const std::size_t width = std::min<std::size_t>(4, n);
  std::size_t first = hi >= 2 ? hi - 2 : 0;
  first = std::min(first, n - width);

  const int d = entries_.front().dim();
  MomentSet out;
  out.vol = 0.0;
  out.m1 = Vector::Zero(d);
  out.m2 = Matrix::Zero(d, d);
  out.m3 = Rank3(d);
  for (std::size_t a = first; a < first + width; ++a) {
    double w = 1.0;
    for (std::size_t b = first; b < first + width; ++b)
      if (b != a) w *= (t - times_[b]) / (times_[a] - times_[b]);
    const MomentSet& m = entries_[a];
    out.vol += w * m.vol;
    out.m1 += w * m.m1;
    out.m2 += w * m.m2;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) out.m3(i, j, k) += w * m.m3(i, j, k);
  }
  return out;
}

// ---------------------------------------------------------------- Averaged connection

namespace {

// η_js η_kl m3^{msl} for each m
std::vector<Matrix> lowered_third(const Matrix& g, const Rank3& m3) {
  const int d = m3.dim();
  std::vector<Matrix> out(static_cast<std::size_t>(d));
  for (int m = 0; m < d; ++m) {
    Matrix slice(d, d);
    for (int s = 0; s < d; ++s)
      for (int l = 0; l < d; ++l) slice(s, l) = m3(m, s, l);
    out[static_cast<std::size_t>(m)] = g * slice * g;
  }
  return out;
}

}  // namespace

Rank3 averaged_coeffs(const Chart& chart, const FieldConfiguration& field,
                      const MomentSet& moments, const Vector& x, bool flip_third_moment) {
  const int d = chart.dim();
  const Matrix g = chart.metric(x);
  const Matrix Fm = chart.inverse_metric(x) * field.field_in_chart(chart, x);
  const Vector m1 = moments.m1;
  const Vector m1l = g * m1;
  const std::vector<Matrix> m3l = lowered_third(g, moments.m3);
  const double third = flip_third_moment ? -1.0 : 1.0;

  Rank3 G = chart.christoffel(x);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      for (int k = j; k < d; ++k) {
        double v = 0.5 * (Fm(i, j) * m1l[k] + Fm(i, k) * m1l[j]);
        double tail = 0.0;
        for (int m = 0; m < d; ++m)
          tail += Fm(i, m) * (m1[m] * g(j, k) - third * m3l[static_cast<std::size_t>(m)](j, k));
        v += 0.5 * tail;
        G(i, j, k) += v;
        if (k != j) G(i, k, j) = G(i, j, k);
      }
    }
  }
  return G;
}

Vector averaged_acceleration(const Chart& chart, const FieldConfiguration& field,
                             const MomentSet& moments, const Vector& x, const Vector& y,
                             bool flip_third_moment) {
  const Matrix g = chart.metric(x);
  const Matrix Fm = chart.inverse_metric(x) * field.field_in_chart(chart, x);
  const Vector yl = g * y;
  const double third = flip_third_moment ? -1.0 : 1.0;
  // Γ̄ y y = F y (m1·y) + ½ F (m1 η(y,y) - m3(y_, y_))
  const Vector inner = moments.m1 * y.dot(yl) - third * moments.m3.contract(yl, yl);
  Vector a = -(Fm * y) * moments.m1.dot(yl) - 0.5 * (Fm * inner);
  if (!(chart.inertial())) a -= chart.christoffel(x).contract(y);
  return a;
}

AveragedConnection::AveragedConnection(std::shared_ptr<const Chart> chart,
                                       FieldConfiguration field,
                                       std::shared_ptr<const MomentProvider> provider,
                                       bool flip_third_moment)
    : chart_(std::move(chart)),
      field_(std::move(field)),
      provider_(std::move(provider)),
      flip_(flip_third_moment) {
  if (chart_->dim() != field_.dim())
    throw ConfigError("chart and field configuration disagree on the dimension");
}

Rank3 AveragedConnection::coefficients(const Vector& x, const Vector&) const {
  return averaged_coeffs(*chart_, field_, provider_->moments_at(x), x, flip_);
}

Vector AveragedConnection::acceleration(const Vector& x, const Vector& y) const {
  return averaged_acceleration(*chart_, field_, provider_->moments_at(x), x, y, flip_);
}

// ---------------------------------------------------------------- Normal frame

NormalFrame::NormalFrame(std::shared_ptr<const ConnectionField> conn, const Vector& origin)
    : conn_(std::move(conn)), origin_(origin) {
  if (!conn_->affine())
    throw DomainError("normal coordinates need an affine connection; got '" + conn_->id() + "'");
  // Any vector works as the second argument of an affine connection.
  gamma0_ = conn_->coefficients(origin_, Metric(conn_->dim()).rest_velocity());
}

Vector NormalFrame::forward(const Vector& x) const {
  const Vector dx = x - origin_;
  return dx + 0.5 * gamma0_.contract(dx);
}

Matrix NormalFrame::jacobian(const Vector& x) const {
  const int d = gamma0_.dim();
  const Vector dx = x - origin_;
  Matrix J = Matrix::Identity(d, d);
  for (int a = 0; a < d; ++a)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k) J(a, j) += gamma0_(a, j, k) * dx[k];
  return J;
}

Vector NormalFrame::inverse(const Vector& xp) const {
  Vector x = origin_ + xp;
  for (int it = 0; it < 60; ++it) {
    const Vector r = forward(x) - xp;
    if (r.lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + xp.lpNorm<Eigen::Infinity>())) return x;
    x -= jacobian(x).partialPivLu().solve(r);
  }
  const Vector r = forward(x) - xp;
  if (r.lpNorm<Eigen::Infinity>() <= 1e-12 * (1.0 + xp.lpNorm<Eigen::Infinity>())) return x;
  throw DomainError("normal-frame inverse did not converge; point too far from the origin");
}

Rank3 NormalFrame::transformed_coefficients(const Vector& x) const {
  const int d = gamma0_.dim();
  const Matrix J = jacobian(x);
  const Matrix Jinv = J.inverse();
  const Rank3 G = conn_->coefficients(x, Metric(d).rest_velocity());
  // Γ'^a_bc = (J^a_i Γ^i_jk - Γ0^a_jk) Jinv^j_b Jinv^k_c
  Rank3 diff(d);
  for (int a = 0; a < d; ++a)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k) {
        double s = 0.0;
        for (int i = 0; i < d; ++i) s += J(a, i) * G(i, j, k);
        diff(a, j, k) = s - gamma0_(a, j, k);
      }
  Rank3 out(d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c) {
        double s = 0.0;
        for (int j = 0; j < d; ++j)
          for (int k = 0; k < d; ++k) s += diff(a, j, k) * Jinv(j, b) * Jinv(k, c);
        out(a, b, c) = s;
      }
  return out;
}

NormalFrame normal_frame(std::shared_ptr<const ConnectionField> conn, const Vector& origin) {
  return NormalFrame(std::move(conn), origin);
}

}  // namespace avl
