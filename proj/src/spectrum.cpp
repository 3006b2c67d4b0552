#include "aqis/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "aqis/error.hpp"

namespace aqis {

std::array<std::vector<std::size_t>, 2> parity_sublattices(const ModelSpec& model) {
  model.validate();
  std::array<std::vector<std::size_t>, 2> out;
  if (model.kind == ModelKind::lmg) {
    for (std::size_t i = 0; i < model.dimension(); ++i) out[i % 2].push_back(i);
  } else {
    // Spin slaved to Fock parity: even sector |n, s = n mod 2>, odd sector |n, s = 1 - n mod 2>.
    for (std::size_t n = 0; n <= static_cast<std::size_t>(model.fock_cutoff); ++n) {
      out[0].push_back(2 * n + n % 2);
      out[1].push_back(2 * n + (1 - n % 2));
    }
  }
  return out;
}

ParityBlockLayout build_parity_blocks(const ModelSpec& model, double g) {
  require_finite_coupling(g);
  const BandedSymmetric h = build_hamiltonian(model).at(g);
  ParityBlockLayout layout;
  layout.indices = parity_sublattices(model);
  for (std::size_t p = 0; p < 2; ++p) {
    const auto& idx = layout.indices[p];
    SymTridiagonal& t = layout.blocks[p];
    t.diag.resize(idx.size());
    t.off.resize(idx.empty() ? 0 : idx.size() - 1);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      t.diag[k] = h(idx[k], idx[k]);
      if (k + 1 < idx.size()) t.off[k] = h(idx[k], idx[k + 1]);
    }
  }
  return layout;
}

std::vector<double> SpectralDecomposition::physical_vector(Parity p, std::size_t k) const {
  const ParitySector& s = sector(p);
  if (!s.has_vectors()) throw ShapeError("spectral decomposition holds no eigenvectors");
  std::vector<double> v(model.dimension(), 0.0);
  const auto bv = s.vector(k);
  for (std::size_t i = 0; i < s.indices.size(); ++i) v[s.indices[i]] = bv[i];
  return v;
}

std::vector<double> SpectralDecomposition::all_energies() const {
  std::vector<double> e = sectors[0].energies;
  e.insert(e.end(), sectors[1].energies.begin(), sectors[1].energies.end());
  std::sort(e.begin(), e.end());
  return e;
}

double SpectralDecomposition::mean_level_spacing() const {
  const auto e = all_energies();
  if (e.size() < 2) return 0.0;
  return (e.back() - e.front()) / static_cast<double>(e.size() - 1);
}

std::array<std::vector<double>, 2> parity_energies(const ModelSpec& model, double g) {
  const ParityBlockLayout layout = build_parity_blocks(model, g);
  std::array<std::vector<double>, 2> out;
  for (std::size_t p = 0; p < 2; ++p) {
    try {
      out[p] = tridiagonal_eigenvalues(layout.blocks[p]);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at g=" + std::to_string(g));
    }
  }
  return out;
}

void fix_gauge(std::span<double> v) {
  double biggest = 0.0;
  for (double x : v) biggest = std::max(biggest, std::abs(x));
  if (biggest == 0.0) return;
  const double cut = biggest * (1.0 - 1e-8);
  for (double x : v) {
    if (std::abs(x) >= cut) {
      if (x < 0.0)
        for (double& y : v) y = -y;
      return;
    }
  }
}

SpectralDecomposition spectral_decomposition(const ModelSpec& model, double g, bool with_vectors) {
  const ParityBlockLayout layout = build_parity_blocks(model, g);
  SpectralDecomposition out;
  out.model = model;
  out.g = g;
  for (std::size_t p = 0; p < 2; ++p) {
    ParitySector& s = out.sectors[p];
    s.parity = static_cast<Parity>(p);
    s.indices = layout.indices[p];
    TridiagonalEigen eig;
    try {
      eig = eigensolve_tridiagonal(layout.blocks[p], with_vectors);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at g=" + std::to_string(g));
    }
    s.energies = std::move(eig.values);
    s.vectors = std::move(eig.vectors);
    for (std::size_t k = 0; with_vectors && k < s.size(); ++k)
      fix_gauge({s.vectors.data() + k * s.indices.size(), s.indices.size()});
  }
  return out;
}

ObservableKind parse_observable(const std::string& name) {
  if (name == "Sx" || name == "sx") return ObservableKind::sx;
  if (name == "Sz" || name == "sz") return ObservableKind::sz;
  if (name == "Sx2" || name == "sx2") return ObservableKind::sx2;
  if (name == "x") return ObservableKind::x;
  if (name == "n" || name == "n_phot" || name == "photons") return ObservableKind::photons;
  if (name == "sigma_z" || name == "sz_qubit") return ObservableKind::sigma_z;
  throw ModelError("unknown observable '" + name + "'");
}

std::string observable_name(ObservableKind kind) {
  switch (kind) {
    case ObservableKind::sx: return "Sx";
    case ObservableKind::sz: return "Sz";
    case ObservableKind::sx2: return "Sx2";
    case ObservableKind::x: return "x";
    case ObservableKind::photons: return "n_phot";
    case ObservableKind::sigma_z: return "sigma_z";
  }
  return "?";
}

ObservableKind order_parameter_observable(const ModelSpec& model) {
  return model.kind == ModelKind::lmg ? ObservableKind::sx : ObservableKind::x;
}

ObservableMatrix observable_matrix(const ModelSpec& model, ObservableKind kind) {
  model.validate();
  const std::size_t dim = model.dimension();
  ObservableMatrix obs;
  obs.kind = kind;
  obs.model = model;
  const bool lmg_kind = kind == ObservableKind::sx || kind == ObservableKind::sz ||
                        kind == ObservableKind::sx2;
  if (lmg_kind != (model.kind == ModelKind::lmg))
    throw ModelError("observable " + observable_name(kind) + " is not defined for " +
                     model.describe());
  const double j = model.spin();
  const double jj = j * (j + 1.0);
  switch (kind) {
    case ObservableKind::sx:
      obs.matrix = BandedSymmetric(dim, 1);
      for (std::size_t i = 0; i + 1 < dim; ++i) {
        const double m = static_cast<double>(i) - j;
        obs.matrix.set(i, i + 1, 0.5 * std::sqrt(jj - m * (m + 1.0)));
      }
      obs.character = ParityCharacter::odd;
      break;
    case ObservableKind::sz:
      obs.matrix = BandedSymmetric(dim, 0);
      for (std::size_t i = 0; i < dim; ++i) obs.matrix.set(i, i, static_cast<double>(i) - j);
      obs.character = ParityCharacter::even;
      break;
    case ObservableKind::sx2:
      obs.matrix = BandedSymmetric(dim, 2);
      for (std::size_t i = 0; i < dim; ++i) {
        const double m = static_cast<double>(i) - j;
        obs.matrix.set(i, i, 0.5 * (jj - m * m));
        if (i + 2 < dim)
          obs.matrix.set(i, i + 2,
                         0.25 * std::sqrt(jj - m * (m + 1.0)) *
                             std::sqrt(jj - (m + 1.0) * (m + 2.0)));
      }
      obs.character = ParityCharacter::even;
      break;
    case ObservableKind::x:
      obs.matrix = BandedSymmetric(dim, 2);
      for (std::size_t i = 0; i + 2 < dim; ++i) {
        const std::size_t n = i / 2;
        obs.matrix.set(i, i + 2, std::sqrt(static_cast<double>(n + 1) / 2.0));
      }
      obs.character = ParityCharacter::odd;
      break;
    case ObservableKind::photons:
      obs.matrix = BandedSymmetric(dim, 0);
      for (std::size_t i = 0; i < dim; ++i) obs.matrix.set(i, i, static_cast<double>(i / 2));
      obs.character = ParityCharacter::even;
      break;
    case ObservableKind::sigma_z:
      obs.matrix = BandedSymmetric(dim, 0);
      for (std::size_t i = 0; i < dim; ++i) obs.matrix.set(i, i, i % 2 == 1 ? 1.0 : -1.0);
      obs.character = ParityCharacter::even;
      break;
  }
  return obs;
}

double eigen_matrix_element(const SpectralDecomposition& decomp, const ObservableMatrix& obs,
                            Parity pa, std::size_t ka, Parity pb, std::size_t kb) {
  const auto vb = decomp.physical_vector(pb, kb);
  const auto ov = obs.matrix.apply(vb);
  const ParitySector& sa = decomp.sector(pa);
  const auto va = sa.vector(ka);
  double s = 0.0;
  for (std::size_t i = 0; i < sa.indices.size(); ++i) s += va[i] * ov[sa.indices[i]];
  return s;
}

std::size_t DoubletTable::leading_degenerate() const {
  std::size_t n = 0;
  while (n < rows.size() && rows[n].degenerate) ++n;
  return n;
}

DoubletTable doublet_pairing(const SpectralDecomposition& decomp, const ObservableMatrix& obs) {
  if (!(obs.model == decomp.model)) throw ShapeError("observable and spectrum belong to different models");
  if (obs.character != ParityCharacter::odd)
    throw ModelError("doublet pairing needs a parity-odd observable");
  const ParitySector& even = decomp.sector(Parity::even);
  const ParitySector& odd = decomp.sector(Parity::odd);
  const std::size_t pairs = std::min(even.size(), odd.size());
  DoubletTable table;
  table.threshold = kDoubletThresholdFactor * decomp.mean_level_spacing();
  table.unpaired_even = even.size() - pairs;
  table.unpaired_odd = odd.size() - pairs;
  table.rows.resize(pairs);
  const bool vectors = decomp.has_vectors();
  for (std::size_t k = 0; k < pairs; ++k) {
    Doublet& d = table.rows[k];
    d.k = k;
    d.energy_even = even.energies[k];
    d.energy_odd = odd.energies[k];
    d.gap = std::abs(d.energy_even - d.energy_odd);
    d.degenerate = d.gap < table.threshold;
    if (vectors) d.coupling = eigen_matrix_element(decomp, obs, Parity::even, k, Parity::odd, k);
  }
  return table;
}

std::size_t DensityOfStates::peak_bin() const {
  const auto& p = histogram.probabilities;
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

DensityOfStates density_of_states(const SpectralDecomposition& decomp, std::size_t bin_count,
                                  std::optional<double> lower, std::optional<double> upper) {
  if (bin_count < 10) throw ModelError("density of states needs at least 10 bins");
  const auto e = decomp.all_energies();
  DensityOfStates dos;
  const double lo = lower.value_or(e.front());
  double hi = upper.value_or(e.back());
  if (!upper) hi = std::nextafter(hi, hi + 1.0);
  if (!(hi > lo)) throw ModelError("density of states: empty energy window");
  dos.lower = lo;
  dos.width = (hi - lo) / static_cast<double>(bin_count);
  std::vector<double> counts(bin_count, 0.0);
  double inside = 0.0;
  for (double x : e) {
    if (x < lo || x >= hi) continue;
    auto b = static_cast<std::size_t>((x - lo) / dos.width);
    b = std::min(b, bin_count - 1);
    counts[b] += 1.0;
    inside += 1.0;
  }
  dos.histogram.support.resize(bin_count);
  dos.histogram.probabilities.resize(bin_count);
  for (std::size_t b = 0; b < bin_count; ++b) {
    dos.histogram.support[b] = lo + dos.width * (static_cast<double>(b) + 0.5);
    dos.histogram.probabilities[b] = inside > 0.0 ? counts[b] / inside : 0.0;
  }
  return dos;
}

std::optional<double> critical_energy(const ModelSpec& model, double g) {
  if (model.kind == ModelKind::lmg) {
    if (std::abs(g) < 1.0) return -std::abs(g) * model.spin();
    return std::nullopt;
  }
  if (std::abs(g) > 1.0) return -model.ratio / 2.0;
  return std::nullopt;
}

}  // namespace aqis
