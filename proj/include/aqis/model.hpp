#pragma once

#include <cstddef>
#include <string>

#include "aqis/banded.hpp"

namespace aqis {

enum class ModelKind { lmg, qrm };

enum class Parity { even = 0, odd = 1 };

inline constexpr std::size_t index_of(Parity p) { return static_cast<std::size_t>(p); }
inline constexpr Parity opposite(Parity p) { return p == Parity::even ? Parity::odd : Parity::even; }
const char* parity_name(Parity p);

/// Which critical model and its size parameters.
///
/// LMG: H = -g S_z - S_x^2 / N in the J = N/2 Dicke sector. Physical index
/// i = M + J, so i runs over 0..N.
///
/// QRM: H = (ratio/2) sigma_z + a^dag a + g lambda_c (a + a^dag) sigma_x with
/// the boson frequency as the unit and lambda_c = sqrt(ratio)/2. Physical index
/// i = 2 n + s where s = 1 is spin up (sigma_z = +1) and n <= fock_cutoff.
struct ModelSpec {
  ModelKind kind = ModelKind::lmg;
  int spins = 0;
  double ratio = 0.0;
  int fock_cutoff = 0;

  static ModelSpec lmg(int spins);
  static ModelSpec qrm(double ratio, int fock_cutoff = 1000);

  /// Throws ModelError on odd N, non-positive cutoff or ratio.
  void validate() const;
  std::size_t dimension() const;
  /// J = N/2 for LMG.
  double spin() const { return 0.5 * spins; }
  /// lambda_c for QRM.
  double critical_scale() const;
  std::string describe() const;

  bool operator==(const ModelSpec&) const = default;
};

/// Parity eigenvalue of physical basis state i.
Parity parity_of_index(const ModelSpec& model, std::size_t i);

/// H(g) = constant + g * linear, both banded in the physical basis.
struct AffineHamiltonian {
  ModelSpec model;
  BandedSymmetric constant;
  BandedSymmetric linear;

  BandedSymmetric at(double g) const { return constant.plus_scaled(g, linear); }

  template <typename T>
  void apply(double g, std::span<const T> x, std::span<T> y, std::span<T> scratch) const {
    constant.apply<T>(x, y);
    linear.apply<T>(x, scratch);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += g * scratch[i];
  }
};

AffineHamiltonian build_hamiltonian(const ModelSpec& model);

void require_finite_coupling(double g);

}  // namespace aqis
