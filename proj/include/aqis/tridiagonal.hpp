#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace aqis {

/// Symmetric tridiagonal matrix: diag.size() == n, off.size() == n-1 (or 0 when n == 0).
struct SymTridiagonal {
  std::vector<double> diag;
  std::vector<double> off;

  std::size_t size() const { return diag.size(); }
  double inf_norm() const;
  /// y = T x
  void apply(std::span<const double> x, std::span<double> y) const;
};

/// Column-major eigenvector storage: column k is vectors[k*n .. k*n+n).
struct TridiagonalEigen {
  std::vector<double> values;
  std::vector<double> vectors;
  std::size_t n = 0;

  bool has_vectors() const { return !vectors.empty(); }
  std::span<const double> vector(std::size_t k) const { return {vectors.data() + k * n, n}; }
  std::span<double> vector(std::size_t k) { return {vectors.data() + k * n, n}; }
};

/// Ascending eigenvalues by implicit QL with Wilkinson shifts.
/// Throws NumericError if an eigenvalue needs more than `max_sweeps` sweeps.
std::vector<double> tridiagonal_eigenvalues(const SymTridiagonal& t, int max_sweeps = 60);

/// The lowest lower.size() eigenvalues, eigenvalue j known to lie in [lower[j], upper[j]].
/// Safeguarded Newton on the characteristic polynomial with Sturm-count bisection,
/// batched over eigenvalues. `guess[j]` seeds the iteration. Throws NumericError if
/// the brackets are inconsistent or the iteration stalls.
std::vector<double> tridiagonal_eigenvalues_bracketed(const SymTridiagonal& t,
                                                      std::span<const double> lower,
                                                      std::span<const double> upper,
                                                      std::span<const double> guess);

/// Full QL with accumulated rotations, O(n^3). Used for small blocks and as a fallback.
TridiagonalEigen tridiagonal_eigensystem_ql(const SymTridiagonal& t, int max_sweeps = 60);

/// Eigenvectors for the given (ascending, accurate) eigenvalues by inverse iteration.
/// Vectors whose eigenvalues lie within `cluster_tolerance * ||T||` of each other are
/// reorthogonalized against each other.
std::vector<double> inverse_iteration(const SymTridiagonal& t, std::span<const double> values,
                                      double cluster_tolerance = 1e-5);

/// Eigenvalues (ascending) and optionally eigenvectors. Vectors use inverse iteration
/// and fall back to accumulated QL if residual or orthogonality checks fail.
TridiagonalEigen eigensolve_tridiagonal(const SymTridiagonal& t, bool want_vectors);

/// max_k ||T v_k - lambda_k v_k|| / max(||T||, tiny)
double max_relative_residual(const SymTridiagonal& t, const TridiagonalEigen& eig);
/// max |V^T V - I|
double max_orthogonality_error(const TridiagonalEigen& eig);

}  // namespace aqis
