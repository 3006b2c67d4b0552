#include <doctest.h>

#include <cmath>

#include "aqis/error.hpp"
#include "aqis/metrics.hpp"
#include "aqis/oracle.hpp"
#include "aqis/propagation.hpp"
#include "aqis/spectrum.hpp"
#include "aqis/states.hpp"

using namespace aqis;

namespace {

double distance(const PureState& a, const PureState& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.coefficients.size(); ++i) s += std::norm(a.coefficients[i] - b.coefficients[i]);
  return std::sqrt(s);
}

PhaseTable zero_table(const ModelSpec& m, const RampProtocol& p) {
  PhaseTable t;
  t.model = m;
  t.protocol = p;
  const auto e = parity_energies(m, p.g0);
  for (std::size_t s = 0; s < 2; ++s) t.rates[s].assign(e[s].size(), 0.0);
  return t;
}

}  // namespace

TEST_CASE("triangular ramp") {
  const RampProtocol p{0.0, 1.25, 500.0};
  CHECK(ramp_value(p, 250.0) == doctest::Approx(0.625));
  CHECK(ramp_value(p, 750.0) == doctest::Approx(0.625));
  CHECK(ramp_value(p, 1000.0) == 0.0);
  CHECK(ramp_value(p, 500.0) == 1.25);
  CHECK_THROWS_AS(RampProtocol({0.0, 1.0, -1.0}).validate(), ModelError);
}

TEST_CASE("eigenstate under a constant protocol stays put") {
  const ModelSpec m = ModelSpec::lmg(30);
  const auto d = spectral_decomposition(m, 0.4);
  PureState phi;
  phi.basis = {BasisKind::eigen, m, 0.4};
  phi.coefficients.assign(d.dimension(), 0.0);
  phi.coefficients[d.flat_index(Parity::even, 2)] = 1.0;
  IntegratorControls c;
  c.sample_interval = 1.0;
  const Trajectory t = evolve_exact(to_physical_basis(phi, d), {0.4, 0.4, 10.0}, c);
  const auto& a = t.samples.front();
  for (const auto& s : t.samples) {
    CHECK(std::abs(s.order - a.order) < 1e-8);
    CHECK(std::abs(s.even - a.even) < 1e-8);
    CHECK(std::abs(s.energy - a.energy) < 1e-8);
    CHECK(std::abs(s.norm - 1.0) < 1e-8);
  }
}

TEST_CASE("RK4 ramp agrees with the piecewise-constant oracle at N=20") {
  const ModelSpec m = ModelSpec::lmg(20);
  const auto d = spectral_decomposition(m, 0.0);
  const auto doublets = doublet_pairing(d, observable_matrix(m, ObservableKind::sx));
  const PureState psi = to_physical_basis(microcanonical_sb(d, doublets, 3), d);
  const RampProtocol p{0.0, 1.25, 10.0};
  const Trajectory t = evolve_exact(psi, p);
  const auto sched = ramp_schedule(p, 256);
  const PureState ref = piecewise_constant_propagate(psi, sched.g, sched.dt);
  CHECK(distance(t.final_state, ref) < 1e-6);
}

TEST_CASE("exact propagation rejects eigenbasis input") {
  const ModelSpec m = ModelSpec::lmg(10);
  const auto d = spectral_decomposition(m, 0.0);
  PureState phi;
  phi.basis = {BasisKind::eigen, m, 0.0};
  phi.coefficients.assign(d.dimension(), 0.0);
  phi.coefficients[0] = 1.0;
  CHECK_THROWS_AS(evolve_exact(phi, {0.0, 1.0, 5.0}), ShapeError);
}

TEST_CASE("constant spectrum integrates exactly") {
  const ModelSpec m = ModelSpec::lmg(40);
  const RampProtocol p{0.3, 0.3, 123.0};
  const PhaseTable t = phase_table(m, p);
  const auto e = parity_energies(m, 0.3);
  for (Parity par : {Parity::even, Parity::odd})
    for (std::size_t k = 0; k < e[index_of(par)].size(); ++k)
      CHECK(t.phase(par, k) == doctest::Approx(2.0 * 123.0 * e[index_of(par)][k]).epsilon(1e-13));
}

TEST_CASE("Simpson rates match a fine reference for a real ramp") {
  const ModelSpec m = ModelSpec::lmg(60);
  const RampProtocol p{0.0, 1.25, 1000.0};
  QuadratureControls q;
  q.tolerance = 1e-6;
  const PhaseTable t = phase_table(m, p, q);
  // Composite trapezoid with Richardson extrapolation as an independent reference.
  auto trap = [&](std::size_t n) {
    std::array<std::vector<double>, 2> acc;
    for (std::size_t i = 0; i <= n; ++i) {
      const double g = p.g0 + (p.g1 - p.g0) * static_cast<double>(i) / static_cast<double>(n);
      const auto e = parity_energies(m, g);
      const double w = (i == 0 || i == n) ? 0.5 : 1.0;
      for (std::size_t s = 0; s < 2; ++s) {
        acc[s].resize(e[s].size(), 0.0);
        for (std::size_t k = 0; k < e[s].size(); ++k) acc[s][k] += w * e[s][k] / static_cast<double>(n);
      }
    }
    return acc;
  };
  const auto a = trap(4000);
  const auto b = trap(8000);
  double worst = 0.0;
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t k = 0; k < a[s].size(); ++k) {
      const double ref = (4.0 * b[s][k] - a[s][k]) / 3.0;
      worst = std::max(worst, 2.0 * p.tau * std::abs(t.rates[s][k] - ref));
    }
  CHECK(worst < 1e-3);
}

TEST_CASE("SB-confined ramp accumulates no doublet phase difference") {
  const ModelSpec m = ModelSpec::lmg(100);
  const PhaseTable t = phase_table(m, {0.0, 0.1, 1000.0});
  const auto d = spectral_decomposition(m, 0.0);
  const auto doublets = doublet_pairing(d, observable_matrix(m, ObservableKind::sx));
  const auto dphi = t.delta_phi();
  for (const auto& r : doublets.rows)
    if (r.degenerate && r.energy() < *critical_energy(m, 0.1)) CHECK(std::abs(dphi[r.k]) < 1e-3);
}

TEST_CASE("adiabatic cycle") {
  const ModelSpec m = ModelSpec::lmg(50);
  const auto d = spectral_decomposition(m, 0.0);
  const auto sx = observable_matrix(m, ObservableKind::sx);
  const auto doublets = doublet_pairing(d, sx);
  const RampProtocol p{0.0, 1.25, 300.0};

  SUBCASE("zero phases are the identity") {
    const PureState psi = microcanonical_sb(d, doublets, 5);
    const PureState out = adiabatic_cycle(psi, zero_table(m, p));
    CHECK(distance(psi, out) == 0.0);
  }
  SUBCASE("single doublet follows the cosine law") {
    const PureState psi = microcanonical_sb(d, doublets, 1);
    const PhaseTable t = phase_table(m, p);
    const double o0 = expectation(to_physical_basis(psi, d), sx);
    const double o = expectation(to_physical_basis(adiabatic_cycle(psi, t), d), sx);
    CHECK(std::abs(o - std::cos(t.delta_phi()[0]) * o0) < 1e-10 * std::abs(o0));
  }
  SUBCASE("energy distribution is untouched") {
    const PureState psi = microcanonical_sb(d, doublets, 8);
    const PhaseTable t = phase_table(m, p);
    const Distribution a = energy_distribution(psi, d, doublets);
    const Distribution b = energy_distribution(adiabatic_cycle(psi, t), d, doublets);
    CHECK(a.support == b.support);
    for (std::size_t i = 0; i < a.probabilities.size(); ++i)
      CHECK(std::abs(a.probabilities[i] - b.probabilities[i]) < 1e-15);
  }
}

TEST_CASE("hold evolution") {
  const ModelSpec m = ModelSpec::lmg(30);
  const auto d = spectral_decomposition(m, 0.0);
  const auto sx = observable_matrix(m, ObservableKind::sx);
  const PureState psi = microcanonical_sb(d, doublet_pairing(d, sx), 4);
  CHECK(distance(hold_evolution(psi, d, 0.0), psi) == 0.0);
  CHECK(distance(hold_evolution(hold_evolution(psi, d, 0.7), d, 1.9), hold_evolution(psi, d, 2.6)) < 1e-12);

  PureState one = psi;
  for (auto& c : one.coefficients) c = 0.0;
  one.coefficients[d.flat_index(Parity::even, 3)] = 1.0;
  const PureState held = hold_evolution(one, d, 12.3);
  CHECK(std::abs(std::abs(held.coefficients[d.flat_index(Parity::even, 3)]) - 1.0) < 1e-15);
}
