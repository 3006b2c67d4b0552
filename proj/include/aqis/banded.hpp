#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "aqis/error.hpp"

namespace aqis {

using complex = std::complex<double>;
using cvector = std::vector<complex>;

/// Real symmetric band matrix. Diagonal d holds A(i, i+d) for i < dim-d.
class BandedSymmetric {
 public:
  BandedSymmetric() = default;
  BandedSymmetric(std::size_t dim, std::size_t bandwidth)
      : dim_(dim), diags_(bandwidth + 1) {
    for (std::size_t d = 0; d <= bandwidth; ++d)
      diags_[d].assign(d < dim ? dim - d : 0, 0.0);
  }

  std::size_t dim() const { return dim_; }
  std::size_t bandwidth() const { return diags_.empty() ? 0 : diags_.size() - 1; }

  double operator()(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    const std::size_t d = j - i;
    if (d >= diags_.size()) return 0.0;
    return diags_[d][i];
  }

  /// Sets A(i,j) and A(j,i).
  void set(std::size_t i, std::size_t j, double value) {
    if (i > j) std::swap(i, j);
    const std::size_t d = j - i;
    if (d >= diags_.size() || j >= dim_)
      throw ShapeError("banded entry outside the band");
    diags_[d][i] = value;
  }

  std::span<const double> diagonal(std::size_t d) const { return diags_[d]; }

  /// this + scale * other, widening the band if needed.
  BandedSymmetric plus_scaled(double scale, const BandedSymmetric& other) const {
    if (other.dim_ != dim_) throw ShapeError("banded sum: dimension mismatch");
    BandedSymmetric out(dim_, std::max(bandwidth(), other.bandwidth()));
    for (std::size_t d = 0; d < diags_.size(); ++d)
      for (std::size_t i = 0; i < diags_[d].size(); ++i) out.diags_[d][i] = diags_[d][i];
    for (std::size_t d = 0; d < other.diags_.size(); ++d)
      for (std::size_t i = 0; i < other.diags_[d].size(); ++i)
        out.diags_[d][i] += scale * other.diags_[d][i];
    return out;
  }

  /// Max absolute row sum; an upper bound on the spectral norm.
  double inf_norm() const {
    std::vector<double> rows(dim_, 0.0);
    for (std::size_t d = 0; d < diags_.size(); ++d) {
      for (std::size_t i = 0; i < diags_[d].size(); ++i) {
        const double a = std::abs(diags_[d][i]);
        rows[i] += a;
        if (d > 0) rows[i + d] += a;
      }
    }
    double m = 0.0;
    for (double r : rows) m = std::max(m, r);
    return m;
  }

  /// y = A x
  template <typename T>
  void apply(std::span<const T> x, std::span<T> y) const {
    if (x.size() != dim_ || y.size() != dim_) throw ShapeError("banded apply: length mismatch");
    const auto& main = diags_[0];
    for (std::size_t i = 0; i < dim_; ++i) y[i] = main[i] * x[i];
    for (std::size_t d = 1; d < diags_.size(); ++d) {
      const auto& band = diags_[d];
      for (std::size_t i = 0; i < band.size(); ++i) {
        y[i] += band[i] * x[i + d];
        y[i + d] += band[i] * x[i];
      }
    }
  }

  template <typename T>
  std::vector<T> apply(const std::vector<T>& x) const {
    std::vector<T> y(dim_);
    apply<T>(std::span<const T>(x), std::span<T>(y));
    return y;
  }

  /// Row-major dense copy.
  std::vector<double> dense() const {
    std::vector<double> a(dim_ * dim_, 0.0);
    for (std::size_t d = 0; d < diags_.size(); ++d)
      for (std::size_t i = 0; i < diags_[d].size(); ++i) {
        a[i * dim_ + i + d] = diags_[d][i];
        a[(i + d) * dim_ + i] = diags_[d][i];
      }
    return a;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<std::vector<double>> diags_;
};

}  // namespace aqis
