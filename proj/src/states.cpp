#include "aqis/states.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "aqis/error.hpp"

namespace aqis {

namespace {

void require_basis(const PureState& s, BasisKind kind, const char* what) {
  if (s.basis.kind != kind)
    throw ShapeError(std::string(what) + ": state is in the wrong basis");
}

void require_eigen_of(const PureState& s, const SpectralDecomposition& decomp) {
  if (s.basis.kind != BasisKind::eigen || !(s.basis.model == decomp.model) || s.basis.g != decomp.g)
    throw ShapeError("state is not expressed in this eigenbasis");
  if (s.coefficients.size() != decomp.dimension())
    throw ShapeError("eigenbasis state length does not match the spectrum");
}

double norm_squared(const cvector& v) {
  double s = 0.0;
  for (const auto& c : v) s += std::norm(c);
  return s;
}

}  // namespace

double PureState::norm() const { return std::sqrt(norm_squared(coefficients)); }

double MixedState::total_weight() const {
  double s = 0.0;
  for (const auto& m : members) s += m.weight;
  return s;
}

PureState microcanonical_sb(const SpectralDecomposition& decomp, const DoubletTable& doublets,
                            std::size_t count) {
  if (count == 0) throw StateError("microcanonical state needs at least one doublet");
  if (!decomp.has_vectors()) throw ShapeError("microcanonical state needs eigenvectors");
  const std::size_t available = doublets.leading_degenerate();
  if (count > available)
    throw StateError("microcanonical state asks for " + std::to_string(count) +
                     " doublets but only " + std::to_string(available) +
                     " lie below the critical energy");
  double scale = 0.0;
  for (std::size_t k = 0; k < count; ++k) scale = std::max(scale, std::abs(doublets.rows[k].coupling));
  PureState s;
  s.basis = {BasisKind::eigen, decomp.model, decomp.g};
  s.coefficients.assign(decomp.dimension(), 0.0);
  const double amp = 1.0 / std::sqrt(2.0 * static_cast<double>(count));
  for (std::size_t k = 0; k < count; ++k) {
    const double m = doublets.rows[k].coupling;
    if (std::abs(m) <= 1e-10 * std::max(scale, 1.0))
      throw StateError("doublet " + std::to_string(k) +
                       " has a vanishing order-parameter coupling; sign choice is ambiguous");
    s.coefficients[decomp.flat_index(Parity::even, k)] = amp;
    s.coefficients[decomp.flat_index(Parity::odd, k)] = m > 0.0 ? amp : -amp;
  }
  return s;
}

MixedState thermal_sb(const SpectralDecomposition& decomp, const DoubletTable& doublets,
                      double beta, double max_discarded) {
  if (!(beta > 0.0)) throw StateError("inverse temperature must be positive");
  const auto all = decomp.all_energies();
  const double e0 = all.front();
  // Gibbs weights over every eigenstate, shifted by the ground energy.
  double total = 0.0;
  for (double e : all) total += std::exp(-beta * (e - e0));
  double kept = 0.0;
  for (const auto& d : doublets.rows)
    if (d.degenerate) kept += std::exp(-beta * (d.energy_even - e0)) + std::exp(-beta * (d.energy_odd - e0));
  MixedState out;
  out.discarded_weight = std::max(0.0, 1.0 - kept / total);
  if (out.discarded_weight > max_discarded)
    throw StateError("thermal state leaks weight " + std::to_string(out.discarded_weight) +
                     " onto levels above the critical energy");

  double wmax = 0.0;
  for (const auto& d : doublets.rows)
    if (d.degenerate) wmax = std::max(wmax, std::exp(-beta * (d.energy() - e0)));
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  double z = 0.0;
  for (const auto& d : doublets.rows) {
    if (!d.degenerate) continue;
    const double w = std::exp(-beta * (d.energy() - e0));
    if (w < 1e-12 * wmax) continue;
    if (d.coupling == 0.0)
      throw StateError("doublet " + std::to_string(d.k) + " has a vanishing order-parameter coupling");
    EnsembleMember m;
    m.weight = w;
    m.label = d.k;
    m.state.basis = {BasisKind::eigen, decomp.model, decomp.g};
    m.state.coefficients.assign(decomp.dimension(), 0.0);
    m.state.coefficients[decomp.flat_index(Parity::even, d.k)] = inv_sqrt2;
    m.state.coefficients[decomp.flat_index(Parity::odd, d.k)] = d.coupling > 0.0 ? inv_sqrt2 : -inv_sqrt2;
    out.members.push_back(std::move(m));
    z += w;
  }
  if (out.members.empty()) throw StateError("no degenerate doublets to populate");
  for (auto& m : out.members) m.weight /= z;
  return out;
}

PureState qrm_coherent(const ModelSpec& model, complex alpha, SpinDressing dressing, double g) {
  if (model.kind != ModelKind::qrm) throw ModelError("coherent states are defined for the QRM");
  model.validate();
  const std::size_t nmax = static_cast<std::size_t>(model.fock_cutoff);
  cvector fock(nmax + 1);
  fock[0] = std::exp(-0.5 * std::norm(alpha));
  for (std::size_t n = 0; n < nmax; ++n)
    fock[n + 1] = fock[n] * alpha / std::sqrt(static_cast<double>(n + 1));
  const double kept = norm_squared(fock);
  if (std::norm(fock[nmax]) >= 1e-10 || kept < 1.0 - 1e-10)
    throw StateError("Fock cutoff " + std::to_string(nmax) + " is too small for |alpha|^2 = " +
                     std::to_string(std::norm(alpha)));

  PureState s;
  s.basis = {BasisKind::physical, model, 0.0};
  s.coefficients.assign(model.dimension(), 0.0);
  if (dressing == SpinDressing::bare) {
    for (std::size_t n = 0; n <= nmax; ++n) s.coefficients[2 * n] = fock[n];
  } else {
    // Position eigenbasis of the truncated x = (a + a^dag)/sqrt(2).
    SymTridiagonal xt;
    xt.diag.assign(nmax + 1, 0.0);
    xt.off.resize(nmax);
    for (std::size_t n = 0; n < nmax; ++n) xt.off[n] = std::sqrt(static_cast<double>(n + 1) / 2.0);
    const TridiagonalEigen xe = eigensolve_tridiagonal(xt, true);
    const double half = model.ratio / 2.0;
    const double coupling = g * model.critical_scale() * std::sqrt(2.0);
    cvector up(nmax + 1, 0.0), down(nmax + 1, 0.0);
    for (std::size_t j = 0; j <= nmax; ++j) {
      const auto u = xe.vector(j);
      complex a = 0.0;
      for (std::size_t n = 0; n <= nmax; ++n) a += u[n] * fock[n];
      const double b = coupling * xe.values[j];
      const double r = std::sqrt(half * half + b * b);
      // Lower eigenvector of [[half, b], [b, -half]] in (up, down) order.
      double vu = -b, vd = half + r;
      const double nrm = std::sqrt(vu * vu + vd * vd);
      vu /= nrm;
      vd /= nrm;
      for (std::size_t n = 0; n <= nmax; ++n) {
        up[n] += u[n] * (a * vu);
        down[n] += u[n] * (a * vd);
      }
    }
    for (std::size_t n = 0; n <= nmax; ++n) {
      s.coefficients[2 * n] = down[n];
      s.coefficients[2 * n + 1] = up[n];
    }
    const double top = std::norm(up[nmax]) + std::norm(down[nmax]);
    if (top >= 1e-10) throw StateError("Fock cutoff too small for the dressed coherent state");
  }
  const double nrm = s.norm();
  for (auto& c : s.coefficients) c /= nrm;
  return s;
}

PureState expand_in_eigenbasis(const PureState& state, const SpectralDecomposition& decomp) {
  require_basis(state, BasisKind::physical, "expand_in_eigenbasis");
  if (!(state.basis.model == decomp.model) || state.coefficients.size() != decomp.model.dimension())
    throw ShapeError("expand_in_eigenbasis: model mismatch");
  if (!decomp.has_vectors()) throw ShapeError("expand_in_eigenbasis needs eigenvectors");
  PureState out;
  out.basis = {BasisKind::eigen, decomp.model, decomp.g};
  out.coefficients.assign(decomp.dimension(), 0.0);
  for (Parity p : {Parity::even, Parity::odd}) {
    const ParitySector& s = decomp.sector(p);
    for (std::size_t k = 0; k < s.size(); ++k) {
      const auto v = s.vector(k);
      complex c = 0.0;
      for (std::size_t i = 0; i < s.indices.size(); ++i) c += v[i] * state.coefficients[s.indices[i]];
      out.coefficients[decomp.flat_index(p, k)] = c;
    }
  }
  return out;
}

PureState to_physical_basis(const PureState& state, const SpectralDecomposition& decomp) {
  require_eigen_of(state, decomp);
  if (!decomp.has_vectors()) throw ShapeError("to_physical_basis needs eigenvectors");
  PureState out;
  out.basis = {BasisKind::physical, decomp.model, 0.0};
  out.coefficients.assign(decomp.model.dimension(), 0.0);
  for (Parity p : {Parity::even, Parity::odd}) {
    const ParitySector& s = decomp.sector(p);
    for (std::size_t k = 0; k < s.size(); ++k) {
      const complex c = state.coefficients[decomp.flat_index(p, k)];
      if (c == complex(0.0)) continue;
      const auto v = s.vector(k);
      for (std::size_t i = 0; i < s.indices.size(); ++i) out.coefficients[s.indices[i]] += c * v[i];
    }
  }
  return out;
}

ObservableSpectrum::ObservableSpectrum(const ObservableMatrix& obs) : obs_(obs) {
  const BandedSymmetric& a = obs.matrix;
  const std::size_t dim = a.dim();
  std::size_t offset = 0;
  for (std::size_t d = 1; d <= a.bandwidth(); ++d) {
    const auto band = a.diagonal(d);
    if (std::any_of(band.begin(), band.end(), [](double v) { return v != 0.0; })) {
      if (offset != 0) throw ShapeError("observable couples more than one off-diagonal");
      offset = d;
    }
  }
  const std::size_t stride = offset == 0 ? dim : offset;
  const std::size_t step = offset == 0 ? dim : offset;
  double scale = 1.0;
  for (std::size_t r = 0; r < stride && r < dim; ++r) {
    Chain c;
    for (std::size_t i = r; i < dim; i += step) c.indices.push_back(i);
    if (offset == 0) c.indices = {r};
    SymTridiagonal t;
    t.diag.resize(c.indices.size());
    t.off.resize(c.indices.size() - 1);
    for (std::size_t k = 0; k < c.indices.size(); ++k) {
      t.diag[k] = a(c.indices[k], c.indices[k]);
      if (k + 1 < c.indices.size()) t.off[k] = a(c.indices[k], c.indices[k + 1]);
    }
    c.eig = eigensolve_tridiagonal(t, true);
    for (double v : c.eig.values) scale = std::max(scale, std::abs(v));
    chains_.push_back(std::move(c));
  }
  merge_tolerance_ = 1e-9 * scale;
}

std::vector<double> ObservableSpectrum::eigenvalues() const {
  std::vector<double> out;
  for (const auto& c : chains_) out.insert(out.end(), c.eig.values.begin(), c.eig.values.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::pair<double, double>> ObservableSpectrum::weighted_pairs(const PureState& state,
                                                                           double weight) const {
  require_basis(state, BasisKind::physical, "observable_distribution");
  if (!(state.basis.model == obs_.model)) throw ShapeError("observable_distribution: model mismatch");
  const double nrm2 = norm_squared(state.coefficients);
  std::vector<std::pair<double, double>> pairs;
  for (const auto& c : chains_) {
    for (std::size_t k = 0; k < c.eig.values.size(); ++k) {
      const auto v = c.eig.vector(k);
      complex amp = 0.0;
      for (std::size_t i = 0; i < c.indices.size(); ++i) amp += v[i] * state.coefficients[c.indices[i]];
      pairs.emplace_back(c.eig.values[k], weight * std::norm(amp) / nrm2);
    }
  }
  return pairs;
}

Distribution ObservableSpectrum::distribution(const PureState& state) const {
  return Distribution::from_pairs(weighted_pairs(state, 1.0), merge_tolerance_);
}

Distribution ObservableSpectrum::distribution(const MixedState& state) const {
  std::vector<std::pair<double, double>> pairs;
  const double total = state.total_weight();
  for (const auto& m : state.members) {
    auto p = weighted_pairs(m.state, m.weight / total);
    pairs.insert(pairs.end(), p.begin(), p.end());
  }
  return Distribution::from_pairs(std::move(pairs), merge_tolerance_);
}

namespace {

void append_energy_pairs(const PureState& s, double weight, const SpectralDecomposition& decomp,
                         const DoubletTable& doublets, std::vector<std::pair<double, double>>& out) {
  require_eigen_of(s, decomp);
  const double nrm2 = norm_squared(s.coefficients);
  const auto& c = s.coefficients;
  auto push = [&](double e, double p) {
    if (p > 0.0) out.emplace_back(e, weight * p / nrm2);
  };
  for (const auto& d : doublets.rows) {
    const double pe = std::norm(c[decomp.flat_index(Parity::even, d.k)]);
    const double po = std::norm(c[decomp.flat_index(Parity::odd, d.k)]);
    if (d.degenerate) {
      push(d.energy(), pe + po);
    } else {
      push(d.energy_even, pe);
      push(d.energy_odd, po);
    }
  }
  const std::size_t paired = doublets.rows.size();
  for (Parity p : {Parity::even, Parity::odd}) {
    const ParitySector& sec = decomp.sector(p);
    for (std::size_t k = paired; k < sec.size(); ++k) push(sec.energies[k], std::norm(c[decomp.flat_index(p, k)]));
  }
}

}  // namespace

Distribution energy_distribution(const PureState& eigen_state, const SpectralDecomposition& decomp,
                                 const DoubletTable& doublets) {
  std::vector<std::pair<double, double>> pairs;
  append_energy_pairs(eigen_state, 1.0, decomp, doublets, pairs);
  return Distribution::from_pairs(std::move(pairs), 0.0);
}

Distribution energy_distribution(const MixedState& eigen_state, const SpectralDecomposition& decomp,
                                 const DoubletTable& doublets) {
  std::vector<std::pair<double, double>> pairs;
  const double total = eigen_state.total_weight();
  for (const auto& m : eigen_state.members)
    append_energy_pairs(m.state, m.weight / total, decomp, doublets, pairs);
  return Distribution::from_pairs(std::move(pairs), 0.0);
}

double expectation(const PureState& state, const ObservableMatrix& obs) {
  require_basis(state, BasisKind::physical, "expectation");
  if (!(state.basis.model == obs.model)) throw ShapeError("expectation: model mismatch");
  const cvector ov = obs.matrix.apply(state.coefficients);
  complex s = 0.0;
  for (std::size_t i = 0; i < ov.size(); ++i) s += std::conj(state.coefficients[i]) * ov[i];
  return s.real() / norm_squared(state.coefficients);
}

double expectation(const MixedState& state, const ObservableMatrix& obs) {
  double s = 0.0;
  for (const auto& m : state.members) s += m.weight * expectation(m.state, obs);
  return s / state.total_weight();
}

double energy_expectation(const PureState& state, const AffineHamiltonian& h, double g) {
  require_basis(state, BasisKind::physical, "energy_expectation");
  const std::size_t n = state.coefficients.size();
  cvector y(n), scratch(n);
  h.apply<complex>(g, state.coefficients, y, scratch);
  complex s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::conj(state.coefficients[i]) * y[i];
  return s.real() / norm_squared(state.coefficients);
}

}  // namespace aqis
