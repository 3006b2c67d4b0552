#include "aqis/model.hpp"

#include <cmath>
#include <sstream>

namespace aqis {

const char* parity_name(Parity p) { return p == Parity::even ? "even" : "odd"; }

ModelSpec ModelSpec::lmg(int spins) {
  ModelSpec m;
  m.kind = ModelKind::lmg;
  m.spins = spins;
  m.validate();
  return m;
}

ModelSpec ModelSpec::qrm(double ratio, int fock_cutoff) {
  ModelSpec m;
  m.kind = ModelKind::qrm;
  m.ratio = ratio;
  m.fock_cutoff = fock_cutoff;
  m.validate();
  return m;
}

void ModelSpec::validate() const {
  if (kind == ModelKind::lmg) {
    if (spins <= 0 || spins % 2 != 0)
      throw ModelError("LMG requires an even positive spin count, got " + std::to_string(spins));
  } else {
    if (!(ratio > 0.0) || !std::isfinite(ratio))
      throw ModelError("QRM requires a positive finite frequency ratio");
    if (fock_cutoff <= 0)
      throw ModelError("QRM requires a positive Fock cutoff, got " + std::to_string(fock_cutoff));
  }
}

std::size_t ModelSpec::dimension() const {
  return kind == ModelKind::lmg ? static_cast<std::size_t>(spins) + 1
                                : 2 * (static_cast<std::size_t>(fock_cutoff) + 1);
}

double ModelSpec::critical_scale() const { return std::sqrt(ratio) / 2.0; }

std::string ModelSpec::describe() const {
  std::ostringstream os;
  if (kind == ModelKind::lmg)
    os << "LMG(N=" << spins << ")";
  else
    os << "QRM(ratio=" << ratio << ", n_max=" << fock_cutoff << ")";
  return os.str();
}

Parity parity_of_index(const ModelSpec& model, std::size_t i) {
  // LMG: (-1)^(J+M) with J+M = i.  QRM: (-1)^(n + s), excitation number.
  std::size_t excitations = i;
  if (model.kind == ModelKind::qrm) excitations = i / 2 + i % 2;
  return excitations % 2 == 0 ? Parity::even : Parity::odd;
}

void require_finite_coupling(double g) {
  if (!std::isfinite(g)) throw ModelError("coupling must be finite");
}

AffineHamiltonian build_hamiltonian(const ModelSpec& model) {
  model.validate();
  const std::size_t dim = model.dimension();
  AffineHamiltonian h{model, BandedSymmetric(dim, 2), BandedSymmetric(dim, 3)};
  if (model.kind == ModelKind::lmg) {
    h.linear = BandedSymmetric(dim, 0);
    const double j = model.spin();
    const double n = model.spins;
    const double jj = j * (j + 1.0);
    for (std::size_t i = 0; i < dim; ++i) {
      const double m = static_cast<double>(i) - j;
      h.linear.set(i, i, -m);
      h.constant.set(i, i, -(jj - m * m) / (2.0 * n));
      if (i + 2 < dim) {
        // <M+2| S_x^2 |M> = sqrt(jj - M(M+1)) sqrt(jj - (M+1)(M+2)) / 4
        const double a = std::sqrt(jj - m * (m + 1.0)) * std::sqrt(jj - (m + 1.0) * (m + 2.0));
        h.constant.set(i, i + 2, -a / (4.0 * n));
      }
    }
  } else {
    h.constant = BandedSymmetric(dim, 0);
    const double half = model.ratio / 2.0;
    const double lc = model.critical_scale();
    for (std::size_t i = 0; i < dim; ++i) {
      const std::size_t n = i / 2;
      const double sz = (i % 2 == 1) ? 1.0 : -1.0;
      h.constant.set(i, i, static_cast<double>(n) + half * sz);
      // (a + a^dag) sigma_x: |n, s> <-> |n+1, 1-s>
      if (n < static_cast<std::size_t>(model.fock_cutoff)) {
        const std::size_t s = i % 2;
        const std::size_t target = 2 * (n + 1) + (1 - s);
        h.linear.set(i, target, lc * std::sqrt(static_cast<double>(n + 1)));
      }
    }
  }
  return h;
}

}  // namespace aqis
