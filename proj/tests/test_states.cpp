#include <doctest.h>

#include <cmath>

#include "aqis/error.hpp"
#include "aqis/metrics.hpp"
#include "aqis/spectrum.hpp"
#include "aqis/states.hpp"

using namespace aqis;

namespace {

struct Lmg {
  SpectralDecomposition decomp;
  ObservableMatrix sx;
  DoubletTable doublets;

  Lmg(int n, double g)
      : decomp(spectral_decomposition(ModelSpec::lmg(n), g)),
        sx(observable_matrix(decomp.model, ObservableKind::sx)),
        doublets(doublet_pairing(decomp, sx)) {}
};

}  // namespace

TEST_CASE("microcanonical N_mc=1 carries <Sx> = J") {
  Lmg s(100, 0.0);
  const PureState psi = microcanonical_sb(s.decomp, s.doublets, 1);
  CHECK(expectation(to_physical_basis(psi, s.decomp), s.sx) == doctest::Approx(50.0).epsilon(1e-12));
}

TEST_CASE("microcanonical energy weights are uniform") {
  Lmg s(100, 0.0);
  const PureState psi = microcanonical_sb(s.decomp, s.doublets, 10);
  const Distribution p = energy_distribution(psi, s.decomp, s.doublets);
  REQUIRE(p.support.size() == 10);
  for (double w : p.probabilities) CHECK(w == doctest::Approx(0.1).epsilon(1e-13));
  CHECK(p.total() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("microcanonical state lives on the positive Sx branch") {
  Lmg s(100, 0.0);
  const PureState psi = to_physical_basis(microcanonical_sb(s.decomp, s.doublets, 10), s.decomp);
  const Distribution p = ObservableSpectrum(s.sx).distribution(psi);
  CHECK(p.total() == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t i = 0; i < p.support.size(); ++i)
    if (p.support[i] < 0.0) CHECK(p.probabilities[i] < 1e-6);
}

TEST_CASE("microcanonical refuses more doublets than are degenerate") {
  Lmg s(20, 0.0);
  CHECK_THROWS_AS(microcanonical_sb(s.decomp, s.doublets, 11), StateError);
  CHECK_THROWS_AS(microcanonical_sb(s.decomp, s.doublets, 0), StateError);
}

TEST_CASE("cold thermal state collapses onto the ground doublet") {
  Lmg s(100, 0.0);
  const MixedState rho = thermal_sb(s.decomp, s.doublets, 1e3);
  double top = 0.0;
  for (const auto& m : rho.members) top = std::max(top, m.weight / rho.total_weight());
  CHECK(top > 1.0 - 1e-12);
  MixedState phys = rho;
  for (auto& m : phys.members) m.state = to_physical_basis(m.state, s.decomp);
  CHECK(expectation(phys, s.sx) == doctest::Approx(50.0).epsilon(1e-9));
}

TEST_CASE("thermal populations decay exponentially and sit on one branch") {
  Lmg s(1000, 0.0);
  const double beta = 0.02;
  const MixedState rho = thermal_sb(s.decomp, s.doublets, beta);
  CHECK(rho.discarded_weight < 1e-3);
  const double z = rho.total_weight();
  const double e0 = s.doublets.rows[rho.members.front().label].energy();
  const double w0 = rho.members.front().weight / z;
  for (const auto& m : rho.members) {
    const double e = s.doublets.rows[m.label].energy();
    CHECK(m.weight / z == doctest::Approx(w0 * std::exp(-beta * (e - e0))).epsilon(1e-10));
  }
  MixedState phys = rho;
  for (auto& m : phys.members) m.state = to_physical_basis(m.state, s.decomp);
  const Distribution p = ObservableSpectrum(s.sx).distribution(phys);
  CHECK(p.mass_below(0.0) < 1e-6);
  CHECK(expectation(phys, s.sx) > 0.0);
}

TEST_CASE("QRM coherent state moments") {
  const ModelSpec m = ModelSpec::qrm(100.0, 200);
  const PureState psi = qrm_coherent(m, 5.0);
  CHECK(expectation(psi, observable_matrix(m, ObservableKind::photons)) == doctest::Approx(25.0).epsilon(1e-10));
  CHECK(expectation(psi, observable_matrix(m, ObservableKind::x)) == doctest::Approx(std::sqrt(2.0) * 5.0).epsilon(1e-10));
  CHECK(expectation(psi, observable_matrix(m, ObservableKind::sigma_z)) == doctest::Approx(-1.0).epsilon(1e-14));
  const PureState vac = qrm_coherent(m, 0.0);
  CHECK(energy_expectation(vac, build_hamiltonian(m), 0.0) == doctest::Approx(-50.0).epsilon(1e-14));
}

TEST_CASE("eigenbasis expansion") {
  Lmg s(40, 0.3);
  PureState phi;
  phi.basis = {BasisKind::physical, s.decomp.model, 0.0};
  const auto v = s.decomp.physical_vector(Parity::even, 3);
  phi.coefficients.assign(v.begin(), v.end());
  const PureState c = expand_in_eigenbasis(phi, s.decomp);
  for (std::size_t i = 0; i < c.coefficients.size(); ++i) {
    const double want = i == s.decomp.flat_index(Parity::even, 3) ? 1.0 : 0.0;
    CHECK(std::abs(c.coefficients[i] - want) < 1e-12);
  }

  const ModelSpec q = ModelSpec::qrm(100.0, 300);
  const auto dq = spectral_decomposition(q, 2.0);
  const PureState coh = qrm_coherent(q, {2.0, 1.0});
  const PureState e = expand_in_eigenbasis(coh, dq);
  CHECK(e.norm() == doctest::Approx(coh.norm()).epsilon(1e-10));
  const PureState back = to_physical_basis(e, dq);
  double err = 0.0;
  for (std::size_t i = 0; i < back.coefficients.size(); ++i)
    err = std::max(err, std::abs(back.coefficients[i] - coh.coefficients[i]));
  CHECK(err < 1e-10);
  CHECK_THROWS_AS(expand_in_eigenbasis(e, dq), ShapeError);
}

TEST_CASE("symmetric states have symmetric observable distributions") {
  Lmg s(60, 0.2);
  PureState phi;
  phi.basis = {BasisKind::eigen, s.decomp.model, 0.2};
  phi.coefficients.assign(s.decomp.dimension(), 0.0);
  phi.coefficients[s.decomp.flat_index(Parity::odd, 4)] = 1.0;
  const PureState phys = to_physical_basis(phi, s.decomp);
  CHECK(std::abs(expectation(phys, s.sx)) < 1e-10);
  const Distribution p = ObservableSpectrum(s.sx).distribution(phys);
  CHECK(p.total() == doctest::Approx(1.0).epsilon(1e-12));
  const std::size_t n = p.support.size();
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(p.support[i] == doctest::Approx(-p.support[n - 1 - i]).epsilon(1e-12));
    CHECK(std::abs(p.probabilities[i] - p.probabilities[n - 1 - i]) < 1e-10);
  }
}

TEST_CASE("energy distribution ignores the symmetry-breaking signs") {
  Lmg s(100, 0.0);
  const PureState psi = microcanonical_sb(s.decomp, s.doublets, 10);
  PureState flipped = psi;
  for (std::size_t k = 0; k < s.decomp.sector(Parity::odd).size(); ++k) {
    auto& c = flipped.coefficients[s.decomp.flat_index(Parity::odd, k)];
    c = -c;
  }
  const Distribution a = energy_distribution(psi, s.decomp, s.doublets);
  const Distribution b = energy_distribution(flipped, s.decomp, s.doublets);
  CHECK(a.support == b.support);
  CHECK(a.probabilities == b.probabilities);
  CHECK(expectation(to_physical_basis(flipped, s.decomp), s.sx) ==
        doctest::Approx(-expectation(to_physical_basis(psi, s.decomp), s.sx)).epsilon(1e-12));
}

TEST_CASE("distribution helpers") {
  const Distribution a = Distribution::from_pairs({{1.0, 0.5}, {0.0, 0.25}, {1.0 + 1e-13, 0.25}}, 1e-9);
  REQUIRE(a.support.size() == 2);
  CHECK(a.probabilities[1] == doctest::Approx(0.75));
  CHECK(a.mean() == doctest::Approx(0.75));
  CHECK(a.mass_below(0.5) == doctest::Approx(0.25));
  const Distribution b = Distribution::from_pairs({{0.0, 0.5}, {2.0, 0.5}}, 1e-9);
  CHECK(total_variation(a, b, 1e-9) == doctest::Approx(0.75));
  CHECK(total_variation(a, a, 1e-9) == 0.0);
}
