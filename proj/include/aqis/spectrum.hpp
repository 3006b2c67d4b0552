#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aqis/banded.hpp"
#include "aqis/distribution.hpp"
#include "aqis/model.hpp"
#include "aqis/tridiagonal.hpp"

namespace aqis {

/// Even and odd parity sublattices of the physical basis, each carrying H(g)
/// restricted to it as an unreduced symmetric tridiagonal matrix.
struct ParityBlockLayout {
  std::array<std::vector<std::size_t>, 2> indices;
  std::array<SymTridiagonal, 2> blocks;

  const std::vector<std::size_t>& indices_of(Parity p) const { return indices[index_of(p)]; }
  const SymTridiagonal& block(Parity p) const { return blocks[index_of(p)]; }
};

/// Physical-basis index lists of the two parity sectors.
std::array<std::vector<std::size_t>, 2> parity_sublattices(const ModelSpec& model);

ParityBlockLayout build_parity_blocks(const ModelSpec& model, double g);

struct ParitySector {
  Parity parity = Parity::even;
  std::vector<std::size_t> indices;
  std::vector<double> energies;
  /// Column-major, block coordinates (entry i of vector k sits at physical index indices[i]).
  std::vector<double> vectors;

  std::size_t size() const { return energies.size(); }
  bool has_vectors() const { return !vectors.empty(); }
  std::span<const double> vector(std::size_t k) const {
    return {vectors.data() + k * indices.size(), indices.size()};
  }
};

/// Parity-resolved eigenpairs of H(g). Eigenbasis coordinates are flattened as
/// all even states (ascending) followed by all odd states (ascending).
struct SpectralDecomposition {
  ModelSpec model;
  double g = 0.0;
  std::array<ParitySector, 2> sectors;

  const ParitySector& sector(Parity p) const { return sectors[index_of(p)]; }
  std::size_t dimension() const { return sectors[0].size() + sectors[1].size(); }
  std::size_t flat_index(Parity p, std::size_t k) const {
    return p == Parity::even ? k : sectors[0].size() + k;
  }
  double energy(Parity p, std::size_t k) const { return sector(p).energies[k]; }
  bool has_vectors() const { return sectors[0].has_vectors() && sectors[1].has_vectors(); }
  std::vector<double> physical_vector(Parity p, std::size_t k) const;
  /// (E_max - E_min) / (dim - 1)
  double mean_level_spacing() const;
  /// Every eigenvalue, ascending.
  std::vector<double> all_energies() const;
};

/// Eigenvalues only, per parity; the kernel behind phase quadrature.
std::array<std::vector<double>, 2> parity_energies(const ModelSpec& model, double g);

/// Gauge: real vectors whose largest-magnitude component is positive
/// (ties within 1e-8 relative go to the lowest index).
SpectralDecomposition spectral_decomposition(const ModelSpec& model, double g,
                                             bool with_vectors = true);

void fix_gauge(std::span<double> v);

enum class ObservableKind { sx, sz, sx2, x, photons, sigma_z };
enum class ParityCharacter { odd, even };

struct ObservableMatrix {
  ObservableKind kind = ObservableKind::sx;
  ModelSpec model;
  BandedSymmetric matrix;
  ParityCharacter character = ParityCharacter::odd;
};

ObservableKind parse_observable(const std::string& name);
std::string observable_name(ObservableKind kind);
ObservableMatrix observable_matrix(const ModelSpec& model, ObservableKind kind);
/// S_x for LMG, x for QRM.
ObservableKind order_parameter_observable(const ModelSpec& model);

struct Doublet {
  std::size_t k = 0;
  double energy_even = 0.0;
  double energy_odd = 0.0;
  double gap = 0.0;
  /// <phi_{k,+}| O |phi_{k,-}>
  double coupling = 0.0;
  bool degenerate = false;

  double energy() const { return 0.5 * (energy_even + energy_odd); }
};

struct DoubletTable {
  std::vector<Doublet> rows;
  double threshold = 0.0;
  std::size_t unpaired_even = 0;
  std::size_t unpaired_odd = 0;

  /// Number of leading doublets (k = 0, 1, ...) that are all flagged degenerate.
  std::size_t leading_degenerate() const;
};

/// Relative threshold: degenerate iff gap < factor * mean level spacing.
inline constexpr double kDoubletThresholdFactor = 1e-6;

DoubletTable doublet_pairing(const SpectralDecomposition& decomp, const ObservableMatrix& obs);

/// <phi_a| O |phi_b> for sector states a and b.
double eigen_matrix_element(const SpectralDecomposition& decomp, const ObservableMatrix& obs,
                            Parity pa, std::size_t ka, Parity pb, std::size_t kb);

struct DensityOfStates {
  double lower = 0.0;
  double width = 0.0;
  Distribution histogram;  ///< support = bin centres, probabilities = fractions

  std::size_t peak_bin() const;
  bool bin_contains(std::size_t bin, double energy) const {
    return energy >= lower + width * static_cast<double>(bin) &&
           energy < lower + width * static_cast<double>(bin + 1);
  }
};

/// Normalised histogram of eigenvalues in [lower, upper) (whole spectrum when unset).
DensityOfStates density_of_states(const SpectralDecomposition& decomp, std::size_t bin_count,
                                  std::optional<double> lower = std::nullopt,
                                  std::optional<double> upper = std::nullopt);

/// Excited-state critical energy; nullopt when g lies outside the symmetry-breaking phase.
/// LMG: the classical saddle -g N/2 (g < 1). QRM: -ratio/2 (g > 1).
std::optional<double> critical_energy(const ModelSpec& model, double g);

}  // namespace aqis
