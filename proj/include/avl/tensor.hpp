#pragma once

#include <array>
#include <cassert>
#include <cstddef>

#include <Eigen/Dense>

namespace avl {

/// Largest spacetime dimension supported by the fixed-capacity storage.
inline constexpr int kMaxDim = 8;

/// Dynamically sized, statically bounded column vector (no heap traffic).
using Vector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

/// Rank-3 array T^i_jk (or T^{ijk}) of a fixed dimension.
class Rank3 {
 public:
  Rank3() = default;
  explicit Rank3(int dim) : dim_(dim) {
    assert(dim >= 1 && dim <= kMaxDim);
    data_.fill(0.0);
  }

  int dim() const { return dim_; }

  double& operator()(int i, int j, int k) { return data_[index(i, j, k)]; }
  double operator()(int i, int j, int k) const { return data_[index(i, j, k)]; }

  /// out^i = T^i_jk a^j b^k
  Vector contract(const Vector& a, const Vector& b) const {
    Vector out = Vector::Zero(dim_);
    for (int i = 0; i < dim_; ++i) {
      double s = 0.0;
      for (int j = 0; j < dim_; ++j) {
        double inner = 0.0;
        for (int k = 0; k < dim_; ++k) inner += (*this)(i, j, k) * b[k];
        s += a[j] * inner;
      }
      out[i] = s;
    }
    return out;
  }
  Vector contract(const Vector& y) const { return contract(y, y); }

  Rank3& operator+=(const Rank3& o) {
    for (std::size_t n = 0; n < size(); ++n) data_[n] += o.data_[n];
    return *this;
  }
  Rank3& operator*=(double s) {
    for (std::size_t n = 0; n < size(); ++n) data_[n] *= s;
    return *this;
  }

  double max_abs() const {
    double m = 0.0;
    for (std::size_t n = 0; n < size(); ++n) m = std::max(m, std::abs(data_[n]));
    return m;
  }

  bool operator==(const Rank3& o) const {
    if (dim_ != o.dim_) return false;
    for (std::size_t n = 0; n < size(); ++n)
      if (data_[n] != o.data_[n]) return false;
    return true;
  }

 private:
  std::size_t size() const { return static_cast<std::size_t>(dim_) * dim_ * dim_; }
  std::size_t index(int i, int j, int k) const {
    assert(i >= 0 && i < dim_ && j >= 0 && j < dim_ && k >= 0 && k < dim_);
    return (static_cast<std::size_t>(i) * dim_ + j) * dim_ + k;
  }

  int dim_ = 0;
  std::array<double, kMaxDim * kMaxDim * kMaxDim> data_{};
};

}  // namespace avl
