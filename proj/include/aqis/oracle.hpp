#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "aqis/model.hpp"
#include "aqis/propagation.hpp"
#include "aqis/states.hpp"

namespace aqis {

/// Reference implementations for tests and `validate`. Nothing here calls the
/// banded, tridiagonal or RK4 kernels.

inline constexpr std::size_t kOracleMaxDimension = 512;

/// Row-major square matrix.
struct DenseMatrix {
  std::size_t n = 0;
  std::vector<double> a;

  DenseMatrix() = default;
  explicit DenseMatrix(std::size_t dim) : n(dim), a(dim * dim, 0.0) {}
  static DenseMatrix identity(std::size_t dim);

  double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
  double max_abs() const;
};

DenseMatrix operator*(const DenseMatrix& x, const DenseMatrix& y);

/// H(g) assembled from spin ladder operators (LMG) or Kronecker products of
/// boson and Pauli matrices (QRM).
DenseMatrix dense_hamiltonian(const ModelSpec& model, double g);

/// S_x (LMG) or x = (a + a^dag)/sqrt 2 (QRM), assembled the same way.
DenseMatrix dense_order_parameter(const ModelSpec& model);

/// (-1)^(excitation number) of basis state i.
int dense_parity(const ModelSpec& model, std::size_t i);

struct DenseEigen {
  std::vector<double> values;  ///< ascending
  DenseMatrix vectors;         ///< column k is eigenvector k
};

/// Cyclic Jacobi until the off-diagonal Frobenius norm is below 1e-13 ||A||.
/// Throws ShapeError for non-symmetric input or dimension above 512.
DenseEigen dense_eigensolve(const DenseMatrix& m);

/// Exact exponential of each constant piece: psi <- exp(-i dt_j H(g_j)) psi.
PureState piecewise_constant_propagate(const PureState& state, std::span<const double> g_values,
                                       std::span<const double> durations);

struct PiecewiseSchedule {
  std::vector<double> g;
  std::vector<double> dt;
};

/// Splits each leg into `segments_per_leg` segments and each segment into two
/// constant pieces placed by the fourth-order commutator-free rule.
PiecewiseSchedule ramp_schedule(const RampProtocol& protocol, std::size_t segments_per_leg);

struct OracleReport {
  std::string check;
  double deviation = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string error;  ///< set when the check threw
};

struct ValidationOptions {
  /// Perturbs one opposite-parity Hamiltonian entry before the parity check.
  bool inject_fault = false;
  std::size_t workers = 0;
};

/// Every oracle check on small instances, sorted by check name.
std::vector<OracleReport> run_validation_suite(const ValidationOptions& options = {});

}  // namespace aqis
