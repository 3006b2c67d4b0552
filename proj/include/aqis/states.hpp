#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "aqis/banded.hpp"
#include "aqis/distribution.hpp"
#include "aqis/model.hpp"
#include "aqis/spectrum.hpp"

namespace aqis {

enum class BasisKind { physical, eigen };

struct BasisTag {
  BasisKind kind = BasisKind::physical;
  ModelSpec model;
  double g = 0.0;  ///< coupling of the eigenbasis; unused for the physical basis

  bool operator==(const BasisTag&) const = default;
};

/// Coefficient vector in a tagged basis. Eigenbasis coefficients follow
/// SpectralDecomposition::flat_index ordering.
struct PureState {
  BasisTag basis;
  cvector coefficients;

  double norm() const;
};

struct EnsembleMember {
  double weight = 0.0;
  std::size_t label = 0;  ///< doublet index k for thermal members
  PureState state;
};

/// Weighted ensemble of pure states sharing one basis.
struct MixedState {
  std::vector<EnsembleMember> members;
  /// Boltzmann weight dropped because it sat on non-degenerate levels.
  double discarded_weight = 0.0;

  double total_weight() const;
};

/// (2 N_mc)^{-1/2} sum_{k < N_mc} (|k,+> + x_k |k,->), x_k = sign(m_k).
/// Throws StateError when N_mc exceeds the leading run of degenerate doublets or
/// some m_k vanishes.
PureState microcanonical_sb(const SpectralDecomposition& decomp, const DoubletTable& doublets,
                            std::size_t count);

/// Boltzmann mixture of maximally symmetry-broken doublet states. Only degenerate
/// doublets are kept; the weight of everything else is reported in
/// `discarded_weight` and must stay below `max_discarded`.
MixedState thermal_sb(const SpectralDecomposition& decomp, const DoubletTable& doublets,
                      double beta, double max_discarded = 1e-3);

enum class SpinDressing {
  bare,     ///< spin fixed in sigma_z = -1
  dressed,  ///< spin in the lower branch of (ratio/2) sigma_z + g lambda_c sqrt(2) x sigma_x at each x
};

/// |alpha> (x) spin. The dressed variant needs the coupling g it is dressed at.
PureState qrm_coherent(const ModelSpec& model, complex alpha,
                       SpinDressing dressing = SpinDressing::bare, double g = 0.0);

PureState expand_in_eigenbasis(const PureState& state, const SpectralDecomposition& decomp);
PureState to_physical_basis(const PureState& state, const SpectralDecomposition& decomp);

/// Eigen-decomposition of a banded observable whose couplings all sit on one
/// off-diagonal (Sx, x, Sx^2, diagonal ones). Computed once and reused.
class ObservableSpectrum {
 public:
  explicit ObservableSpectrum(const ObservableMatrix& obs);

  const ObservableMatrix& observable() const { return obs_; }
  /// Distribution of measurement outcomes for a physical-basis state.
  Distribution distribution(const PureState& state) const;
  Distribution distribution(const MixedState& state) const;
  std::vector<double> eigenvalues() const;

 private:
  struct Chain {
    std::vector<std::size_t> indices;
    TridiagonalEigen eig;
  };
  std::vector<std::pair<double, double>> weighted_pairs(const PureState& state, double weight) const;

  ObservableMatrix obs_;
  std::vector<Chain> chains_;
  double merge_tolerance_ = 0.0;
};

/// Per-doublet energies with summed parity weights; non-degenerate levels keep
/// their own entries.
Distribution energy_distribution(const PureState& eigen_state, const SpectralDecomposition& decomp,
                                 const DoubletTable& doublets);
Distribution energy_distribution(const MixedState& eigen_state, const SpectralDecomposition& decomp,
                                 const DoubletTable& doublets);

/// <psi|O|psi> / <psi|psi> for a physical-basis state.
double expectation(const PureState& state, const ObservableMatrix& obs);
double expectation(const MixedState& state, const ObservableMatrix& obs);
/// <psi|H(g)|psi> for a physical-basis state.
double energy_expectation(const PureState& state, const AffineHamiltonian& h, double g);

}  // namespace aqis
