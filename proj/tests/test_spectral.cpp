#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "aqis/error.hpp"
#include "aqis/model.hpp"
#include "aqis/oracle.hpp"
#include "aqis/spectrum.hpp"
#include "aqis/tridiagonal.hpp"

using namespace aqis;

TEST_CASE("LMG N=2 parity blocks at g=0") {
  const auto layout = build_parity_blocks(ModelSpec::lmg(2), 0.0);
  const auto& even = layout.block(Parity::even);
  const auto& odd = layout.block(Parity::odd);
  REQUIRE(layout.indices_of(Parity::even) == std::vector<std::size_t>{0, 2});
  REQUIRE(layout.indices_of(Parity::odd) == std::vector<std::size_t>{1});
  CHECK(even.diag[0] == doctest::Approx(-0.25).epsilon(1e-15));
  CHECK(even.diag[1] == doctest::Approx(-0.25).epsilon(1e-15));
  CHECK(std::abs(even.off[0]) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(odd.diag[0] == doctest::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("LMG diagonal matches the closed form") {
  for (int n : {2, 8, 31 * 2}) {
    const ModelSpec m = ModelSpec::lmg(n);
    const double g = 0.7;
    const BandedSymmetric h = build_hamiltonian(m).at(g);
    const double j = m.spin();
    for (std::size_t i = 0; i < m.dimension(); ++i) {
      const double mm = static_cast<double>(i) - j;
      CHECK(h(i, i) == doctest::Approx(-g * mm - (j * (j + 1) - mm * mm) / (2.0 * n)).epsilon(1e-14));
    }
  }
}

TEST_CASE("QRM coupling entries are g lambda_c sqrt(n+1)") {
  const ModelSpec m = ModelSpec::qrm(100.0, 40);
  CHECK(m.critical_scale() == doctest::Approx(5.0));
  const BandedSymmetric h = build_hamiltonian(m).at(1.0);
  for (std::size_t n = 0; n < 40; ++n)
    for (std::size_t s = 0; s < 2; ++s) {
      const std::size_t i = 2 * n + s;
      const std::size_t j = 2 * (n + 1) + (1 - s);
      CHECK(h(i, j) / std::sqrt(n + 1.0) == doctest::Approx(5.0).epsilon(1e-14));
      CHECK(h(i, 2 * (n + 1) + s) == 0.0);
    }
}

TEST_CASE("parity never couples opposite sectors") {
  for (const ModelSpec m : {ModelSpec::lmg(20), ModelSpec::qrm(4.0, 30)}) {
    const BandedSymmetric h = build_hamiltonian(m).at(0.9);
    for (std::size_t i = 0; i < m.dimension(); ++i)
      for (std::size_t j = 0; j < m.dimension(); ++j)
        if (parity_of_index(m, i) != parity_of_index(m, j)) CHECK(h(i, j) == 0.0);
  }
}

TEST_CASE("model validation") {
  CHECK_THROWS_AS(ModelSpec::lmg(3).validate(), ModelError);
  CHECK_THROWS_AS(ModelSpec::lmg(0).validate(), ModelError);
  CHECK_THROWS_AS(ModelSpec::qrm(-1.0, 10).validate(), ModelError);
  CHECK_THROWS_AS(ModelSpec::qrm(10.0, 0).validate(), ModelError);
  CHECK_THROWS_AS(require_finite_coupling(std::nan("")), ModelError);
}

TEST_CASE("tiny tridiagonal closed forms") {
  SymTridiagonal one{{-0.5}, {}};
  CHECK(tridiagonal_eigenvalues(one) == std::vector<double>{-0.5});
  SymTridiagonal two{{-0.25, -0.25}, {-0.25}};
  const auto v = tridiagonal_eigenvalues(two);
  CHECK(v[0] == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(std::abs(v[1]) < 1e-15);
}

TEST_CASE("LMG N=8 g=0.5 blocks match the dense oracle") {
  const ModelSpec m = ModelSpec::lmg(8);
  const auto dense = dense_eigensolve(dense_hamiltonian(m, 0.5));
  const auto decomp = spectral_decomposition(m, 0.5);
  const auto mine = decomp.all_energies();
  REQUIRE(mine.size() == dense.values.size());
  for (std::size_t i = 0; i < mine.size(); ++i) CHECK(std::abs(mine[i] - dense.values[i]) <= 1e-12);
}

TEST_CASE("eigenvectors: residual and orthogonality") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  SymTridiagonal t;
  for (int i = 0; i < 300; ++i) t.diag.push_back(nd(rng));
  for (int i = 0; i < 299; ++i) t.off.push_back(nd(rng));
  const auto eig = eigensolve_tridiagonal(t, true);
  CHECK(max_relative_residual(t, eig) < 1e-12);
  CHECK(max_orthogonality_error(eig) < 1e-10);
}

TEST_CASE("bracketed Newton kernel reproduces QL") {
  const ModelSpec m = ModelSpec::lmg(400);
  const auto layout = build_parity_blocks(m, 0.8);
  const auto& t = layout.block(Parity::even);
  const auto ref = tridiagonal_eigenvalues(t);
  const std::size_t want = 60;
  std::vector<double> lo(want), hi(want), guess(want);
  for (std::size_t j = 0; j < want; ++j) {
    lo[j] = ref[j] - 0.3;
    hi[j] = ref[j] + 0.3;
    guess[j] = ref[j] + 0.05;
  }
  const auto got = tridiagonal_eigenvalues_bracketed(t, lo, hi, guess);
  REQUIRE(got.size() == want);
  for (std::size_t j = 0; j < want; ++j) CHECK(std::abs(got[j] - ref[j]) < 1e-9 * t.inf_norm());
}

TEST_CASE("bracketed kernel rejects brackets that miss the eigenvalue") {
  SymTridiagonal t{{0.0, 1.0, 2.0}, {0.0, 0.0}};
  std::vector<double> lo{5.0}, hi{6.0}, guess{5.5};
  CHECK_THROWS_AS(tridiagonal_eigenvalues_bracketed(t, lo, hi, guess), NumericError);
}

TEST_CASE("LMG N=2 spectrum at g=0") {
  const auto d = spectral_decomposition(ModelSpec::lmg(2), 0.0);
  CHECK(d.energy(Parity::even, 0) == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(d.energy(Parity::odd, 0) == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(std::abs(d.energy(Parity::even, 1)) < 1e-15);
  const auto doublets = doublet_pairing(d, observable_matrix(d.model, ObservableKind::sx));
  REQUIRE(doublets.rows.size() == 1);
  CHECK(doublets.rows[0].gap == 0.0);
  CHECK(std::abs(doublets.rows[0].coupling) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("QRM at g=0 is a decoupled oscillator and qubit") {
  const ModelSpec m = ModelSpec::qrm(100.0, 200);
  const auto e = spectral_decomposition(m, 0.0, false).all_energies();
  CHECK(e.front() == doctest::Approx(-50.0).epsilon(1e-14));
  std::vector<double> expect;
  for (int n = 0; n <= 200; ++n) {
    expect.push_back(n - 50.0);
    expect.push_back(n + 50.0);
  }
  std::sort(expect.begin(), expect.end());
  for (std::size_t i = 0; i < e.size(); ++i) CHECK(std::abs(e[i] - expect[i]) < 1e-10);
}

TEST_CASE("LMG N=100 g=0 doublets below E_c are degenerate") {
  const auto d = spectral_decomposition(ModelSpec::lmg(100), 0.0);
  const auto t = doublet_pairing(d, observable_matrix(d.model, ObservableKind::sx));
  for (const auto& r : t.rows) {
    if (r.energy() < 0.0) CHECK(r.degenerate);
    if (r.k < 10) CHECK(r.gap < 1e-8);
  }
  CHECK(t.leading_degenerate() >= 40);
}

TEST_CASE("LMG N=300 g=1.25 has no degenerate doublets") {
  const auto d = spectral_decomposition(ModelSpec::lmg(300), 1.25);
  const auto t = doublet_pairing(d, observable_matrix(d.model, ObservableKind::sx));
  for (const auto& r : t.rows) CHECK_FALSE(r.degenerate);
}

TEST_CASE("observable matrices") {
  const ModelSpec m2 = ModelSpec::lmg(2);
  const auto sx = observable_matrix(m2, ObservableKind::sx);
  CHECK(sx.matrix(1, 0) == doctest::Approx(std::sqrt(2.0) / 2).epsilon(1e-15));
  CHECK(sx.matrix(1, 2) == doctest::Approx(std::sqrt(2.0) / 2).epsilon(1e-15));
  CHECK(sx.character == ParityCharacter::odd);
  const ModelSpec m = ModelSpec::lmg(10);
  const auto sz = observable_matrix(m, ObservableKind::sz);
  for (std::size_t i = 0; i < m.dimension(); ++i) CHECK(sz.matrix(i, i) == static_cast<double>(i) - 5.0);
  CHECK(sz.character == ParityCharacter::even);
  CHECK(parse_observable("Sx") == ObservableKind::sx);
}

TEST_CASE("density of states peaks at the critical energy") {
  {
    const auto d = spectral_decomposition(ModelSpec::lmg(2000), 0.5, false);
    const auto dos = density_of_states(d, 100);
    double total = 0.0;
    for (double p : dos.histogram.probabilities) total += p;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(dos.bin_contains(dos.peak_bin(), -500.0));
  }
  {
    const auto d = spectral_decomposition(ModelSpec::qrm(100.0, 1000), 2.0, false);
    const auto dos = density_of_states(d, 60, -250.0, 50.0);
    CHECK(std::abs(dos.histogram.support[dos.peak_bin()] + 50.0) <= 1.5 * dos.width);
  }
}

TEST_CASE("critical energies") {
  CHECK(*critical_energy(ModelSpec::lmg(1000), 0.5) == doctest::Approx(-250.0));
  CHECK(*critical_energy(ModelSpec::lmg(64), 0.0) == 0.0);
  CHECK(*critical_energy(ModelSpec::qrm(100.0), 2.0) == doctest::Approx(-50.0));
  CHECK_FALSE(critical_energy(ModelSpec::lmg(64), 1.25).has_value());
  CHECK_FALSE(critical_energy(ModelSpec::qrm(100.0), 0.5).has_value());
}
