#include "aqis/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <functional>
#include <numeric>

#include "aqis/error.hpp"
#include "aqis/metrics.hpp"
#include "aqis/parallel.hpp"
#include "aqis/spectrum.hpp"

namespace aqis {

DenseMatrix DenseMatrix::identity(std::size_t dim) {
  DenseMatrix m(dim);
  for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
  return m;
}

double DenseMatrix::max_abs() const {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

DenseMatrix operator*(const DenseMatrix& x, const DenseMatrix& y) {
  if (x.n != y.n) throw ShapeError("dense product: dimension mismatch");
  DenseMatrix out(x.n);
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t k = 0; k < x.n; ++k) {
      const double xik = x(i, k);
      if (xik == 0.0) continue;
      for (std::size_t j = 0; j < x.n; ++j) out(i, j) += xik * y(k, j);
    }
  return out;
}

namespace {

DenseMatrix scaled_sum(double a, const DenseMatrix& x, double b, const DenseMatrix& y) {
  DenseMatrix out(x.n);
  for (std::size_t i = 0; i < out.a.size(); ++i) out.a[i] = a * x.a[i] + b * y.a[i];
  return out;
}

// Kronecker product with the right factor varying fastest.
DenseMatrix kron(const DenseMatrix& x, const DenseMatrix& y) {
  DenseMatrix out(x.n * y.n);
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t j = 0; j < x.n; ++j)
      for (std::size_t k = 0; k < y.n; ++k)
        for (std::size_t l = 0; l < y.n; ++l) out(i * y.n + k, j * y.n + l) = x(i, j) * y(k, l);
  return out;
}

DenseMatrix transpose(const DenseMatrix& x) {
  DenseMatrix out(x.n);
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t j = 0; j < x.n; ++j) out(j, i) = x(i, j);
  return out;
}

void check_size(std::size_t dim) {
  if (dim > kOracleMaxDimension)
    throw ShapeError("oracle dimension " + std::to_string(dim) + " exceeds " +
                     std::to_string(kOracleMaxDimension));
}

// S_+ with |M> at index M + J.
DenseMatrix raising(double j_spin, std::size_t dim) {
  DenseMatrix sp(dim);
  for (std::size_t i = 0; i + 1 < dim; ++i) {
    const double m = static_cast<double>(i) - j_spin;
    sp(i + 1, i) = std::sqrt(j_spin * (j_spin + 1.0) - m * (m + 1.0));
  }
  return sp;
}

DenseMatrix annihilation(std::size_t levels) {
  DenseMatrix a(levels);
  for (std::size_t n = 1; n < levels; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

}  // namespace

DenseMatrix dense_hamiltonian(const ModelSpec& model, double g) {
  model.validate();
  const std::size_t dim = model.dimension();
  check_size(dim);
  if (model.kind == ModelKind::lmg) {
    const double j = model.spin();
    const DenseMatrix sp = raising(j, dim);
    const DenseMatrix sx = scaled_sum(0.5, sp, 0.5, transpose(sp));
    DenseMatrix sz(dim);
    for (std::size_t i = 0; i < dim; ++i) sz(i, i) = static_cast<double>(i) - j;
    return scaled_sum(-g, sz, -1.0 / static_cast<double>(model.spins), sx * sx);
  }
  const std::size_t levels = static_cast<std::size_t>(model.fock_cutoff) + 1;
  const DenseMatrix a = annihilation(levels);
  const DenseMatrix ad = transpose(a);
  DenseMatrix sigma_z(2), sigma_x(2);
  sigma_z(0, 0) = -1.0;
  sigma_z(1, 1) = 1.0;
  sigma_x(0, 1) = sigma_x(1, 0) = 1.0;
  const DenseMatrix spin_part = kron(DenseMatrix::identity(levels), sigma_z);
  const DenseMatrix boson_part = kron(ad * a, DenseMatrix::identity(2));
  const DenseMatrix coupling = kron(scaled_sum(1.0, a, 1.0, ad), sigma_x);
  const double lambda = 0.5 * std::sqrt(model.ratio);
  DenseMatrix h = scaled_sum(0.5 * model.ratio, spin_part, 1.0, boson_part);
  return scaled_sum(1.0, h, g * lambda, coupling);
}

DenseMatrix dense_order_parameter(const ModelSpec& model) {
  model.validate();
  const std::size_t dim = model.dimension();
  check_size(dim);
  if (model.kind == ModelKind::lmg) {
    const DenseMatrix sp = raising(model.spin(), dim);
    return scaled_sum(0.5, sp, 0.5, transpose(sp));
  }
  const std::size_t levels = static_cast<std::size_t>(model.fock_cutoff) + 1;
  const DenseMatrix a = annihilation(levels);
  const double s = 1.0 / std::sqrt(2.0);
  return kron(scaled_sum(s, a, s, transpose(a)), DenseMatrix::identity(2));
}

int dense_parity(const ModelSpec& model, std::size_t i) {
  const std::size_t quanta = model.kind == ModelKind::lmg ? i : (i / 2) + (i % 2);
  return quanta % 2 == 0 ? 1 : -1;
}

DenseEigen dense_eigensolve(const DenseMatrix& m) {
  const std::size_t n = m.n;
  check_size(n);
  const double scale = std::max(m.max_abs(), std::numeric_limits<double>::min());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(m(i, j) - m(j, i)) > 1e-14 * scale) throw ShapeError("dense eigensolve: matrix is not symmetric");

  DenseMatrix a = m;
  DenseMatrix v = DenseMatrix::identity(n);
  double frob = 0.0;
  for (double x : a.a) frob += x * x;
  frob = std::sqrt(frob);
  const double target = 1e-13 * frob;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += 2.0 * a(i, j) * a(i, j);
    if (std::sqrt(off) < target) {
      DenseEigen out;
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });
      out.vectors = DenseMatrix(n);
      for (std::size_t k = 0; k < n; ++k) {
        out.values.push_back(a(order[k], order[k]));
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
      }
      return out;
    }
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  throw NumericError("Jacobi eigensolver did not converge");
}

PureState piecewise_constant_propagate(const PureState& state, std::span<const double> g_values,
                                       std::span<const double> durations) {
  if (state.basis.kind != BasisKind::physical) throw ShapeError("oracle propagation needs a physical-basis state");
  if (g_values.size() != durations.size()) throw ShapeError("one duration per coupling value required");
  const ModelSpec& model = state.basis.model;
  const std::size_t n = model.dimension();
  if (state.coefficients.size() != n) throw ShapeError("state length does not match the model dimension");
  PureState out = state;
  cvector proj(n);
  for (std::size_t s = 0; s < g_values.size(); ++s) {
    const DenseEigen eig = dense_eigensolve(dense_hamiltonian(model, g_values[s]));
    for (std::size_t k = 0; k < n; ++k) {
      complex acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += eig.vectors(i, k) * out.coefficients[i];
      proj[k] = acc * std::polar(1.0, -eig.values[k] * durations[s]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      complex acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += eig.vectors(i, k) * proj[k];
      out.coefficients[i] = acc;
    }
  }
  return out;
}

PiecewiseSchedule ramp_schedule(const RampProtocol& protocol, std::size_t segments_per_leg) {
  protocol.validate();
  if (segments_per_leg == 0) throw ModelError("at least one segment per leg required");
  const double r3 = std::sqrt(3.0);
  const double a1 = (3.0 - 2.0 * r3) / 12.0;
  const double a2 = (3.0 + 2.0 * r3) / 12.0;
  const double c1 = 0.5 - r3 / 6.0;
  const double c2 = 0.5 + r3 / 6.0;
  PiecewiseSchedule out;
  const double h = protocol.tau / static_cast<double>(segments_per_leg);
  for (int leg = 0; leg < 2; ++leg) {
    for (std::size_t s = 0; s < segments_per_leg; ++s) {
      const double t0 = leg * protocol.tau + static_cast<double>(s) * h;
      const double g1 = ramp_value(protocol, t0 + c1 * h);
      const double g2 = ramp_value(protocol, t0 + c2 * h);
      out.g.push_back(2.0 * (a2 * g1 + a1 * g2));
      out.dt.push_back(0.5 * h);
      out.g.push_back(2.0 * (a1 * g1 + a2 * g2));
      out.dt.push_back(0.5 * h);
    }
  }
  return out;
}

namespace {

OracleReport make_report(std::string check, double deviation, double tolerance) {
  return {std::move(check), deviation, tolerance, deviation <= tolerance, {}};
}

std::string tag(const ModelSpec& m) {
  return m.kind == ModelKind::lmg ? "lmg_N" + std::to_string(m.spins) : "qrm_n" + std::to_string(m.fock_cutoff);
}

double residual_norm(const DenseMatrix& h, std::span<const double> v, double e) {
  double r = 0.0;
  for (std::size_t i = 0; i < h.n; ++i) {
    double acc = -e * v[i];
    for (std::size_t j = 0; j < h.n; ++j) acc += h(i, j) * v[j];
    r += acc * acc;
  }
  return std::sqrt(r);
}

double dense_inf_norm(const DenseMatrix& h) {
  double m = 0.0;
  for (std::size_t i = 0; i < h.n; ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < h.n; ++j) r += std::abs(h(i, j));
    m = std::max(m, r);
  }
  return m;
}

double state_distance(const PureState& a, const PureState& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.coefficients.size(); ++i) d += std::norm(a.coefficients[i] - b.coefficients[i]);
  return std::sqrt(d);
}

double dense_expectation(const DenseMatrix& m, const cvector& psi) {
  complex acc = 0.0;
  for (std::size_t i = 0; i < m.n; ++i) {
    complex row = 0.0;
    for (std::size_t j = 0; j < m.n; ++j) row += m(i, j) * psi[j];
    acc += std::conj(psi[i]) * row;
  }
  return acc.real();
}

const ModelSpec kLmg20 = ModelSpec::lmg(20);

// Microcanonical symmetry-broken state on the lowest doublets.
struct SbSetup {
  SpectralDecomposition decomp;
  ObservableMatrix obs;
  DoubletTable doublets;
  PureState eigen_state;
};

SbSetup sb_setup(const ModelSpec& model, double g0, std::size_t count) {
  SbSetup s{spectral_decomposition(model, g0), observable_matrix(model, order_parameter_observable(model)), {}, {}};
  s.doublets = doublet_pairing(s.decomp, s.obs);
  s.eigen_state = microcanonical_sb(s.decomp, s.doublets, count);
  return s;
}

std::vector<double> random_phases(std::size_t n, double scale) {
  std::vector<double> phi(n);
  // Golden-ratio sequence: deterministic and incommensurate.
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  for (std::size_t i = 0; i < n; ++i) phi[i] = scale * std::fmod(golden * static_cast<double>(i + 1), 1.0);
  return phi;
}

using Check = std::function<std::vector<OracleReport>()>;

std::vector<OracleReport> parity_checks(bool inject_fault) {
  std::vector<OracleReport> out;
  for (const ModelSpec& m : {ModelSpec::lmg(2), ModelSpec::lmg(8), ModelSpec::lmg(20), ModelSpec::lmg(64),
                             ModelSpec::qrm(100.0, 32), ModelSpec::qrm(100.0, 64)}) {
    BandedSymmetric h = build_hamiltonian(m).at(m.kind == ModelKind::lmg ? 0.7 : 1.3);
    if (inject_fault) h.set(0, 1, h(0, 1) + 1e-3);
    double worst = 0.0;
    for (std::size_t i = 0; i < h.dim(); ++i)
      for (std::size_t j = i; j < std::min(h.dim(), i + h.bandwidth() + 1); ++j)
        if (dense_parity(m, i) != dense_parity(m, j)) worst = std::max(worst, std::abs(h(i, j)));
    out.push_back(make_report("parity_commutation_" + tag(m), worst, 0.0));
  }
  return out;
}

std::vector<OracleReport> closed_form_checks() {
  std::vector<OracleReport> out;
  const ModelSpec m2 = ModelSpec::lmg(2);
  auto worst = [](const std::vector<double>& got, std::vector<double> want) {
    std::sort(want.begin(), want.end());
    double d = 0.0;
    for (std::size_t i = 0; i < want.size(); ++i) d = std::max(d, std::abs(got[i] - want[i]));
    return d;
  };
  out.push_back(make_report("dense_closed_form_lmg_N2_g0",
                            worst(dense_eigensolve(dense_hamiltonian(m2, 0.0)).values, {-0.5, -0.5, 0.0}), 1e-14));
  const double r = std::sqrt(1.0 + 1.0 / 16.0);
  out.push_back(make_report("dense_closed_form_lmg_N2_g1",
                            worst(dense_eigensolve(dense_hamiltonian(m2, 1.0)).values, {-0.25 - r, -0.25 + r, -0.5}),
                            1e-14));
  out.push_back(make_report("dense_closed_form_identity",
                            worst(dense_eigensolve(DenseMatrix::identity(16)).values, std::vector<double>(16, 1.0)), 0.0));
  return out;
}

std::vector<OracleReport> eigen_checks(const ModelSpec& m, double g) {
  const DenseMatrix h = dense_hamiltonian(m, g);
  const DenseEigen dense = dense_eigensolve(h);
  const SpectralDecomposition decomp = spectral_decomposition(m, g);
  const auto main = decomp.all_energies();
  double d = 0.0;
  for (std::size_t i = 0; i < main.size(); ++i) d = std::max(d, std::abs(main[i] - dense.values[i]));
  const double norm = dense_inf_norm(h);
  const double tol = m.dimension() <= 64 ? 1e-12 : 1e-12 * norm;
  double res = 0.0;
  for (Parity p : {Parity::even, Parity::odd})
    for (std::size_t k = 0; k < decomp.sector(p).size(); ++k)
      res = std::max(res, residual_norm(h, decomp.physical_vector(p, k), decomp.energy(p, k)));
  char gbuf[32];
  std::snprintf(gbuf, sizeof gbuf, "_g%g", g);
  return {make_report("eigenvalues_vs_dense_" + tag(m) + gbuf, d, tol),
          make_report("eigenvector_residual_" + tag(m) + gbuf, res, 1e-10 * norm)};
}

std::vector<OracleReport> propagation_checks() {
  const RampProtocol protocol{0.0, 1.25, 50.0};
  const SbSetup s = sb_setup(kLmg20, protocol.g0, 2);
  const PureState psi0 = to_physical_basis(s.eigen_state, s.decomp);
  const auto coarse = ramp_schedule(protocol, 512);
  const auto fine = ramp_schedule(protocol, 1024);
  const PureState a = piecewise_constant_propagate(psi0, coarse.g, coarse.dt);
  const PureState b = piecewise_constant_propagate(psi0, fine.g, fine.dt);
  const Trajectory rk4 = evolve_exact(psi0, protocol);
  return {make_report("rk4_vs_piecewise_lmg_N20_tau50", state_distance(rk4.final_state, b), 1e-6),
          make_report("piecewise_segment_doubling_lmg_N20_tau50", state_distance(a, b), 1e-7)};
}

std::vector<OracleReport> cycle_checks() {
  std::vector<OracleReport> out;
  const SbSetup s = sb_setup(kLmg20, 0.0, 3);
  const EigenbasisObservable obs(s.decomp, s.obs, 1);
  const std::size_t dim = s.decomp.dimension();

  {
    const SbSetup one = sb_setup(kLmg20, 0.0, 1);
    const EigenbasisObservable obs1(one.decomp, one.obs, 1);
    const DenseMatrix sx = dense_order_parameter(kLmg20);
    const DenseEigen dense = dense_eigensolve(dense_hamiltonian(kLmg20, 0.0));
    // Lowest two dense eigenvectors span the k = 0 doublet; |m| is basis independent.
    double m00 = 0.0, m01 = 0.0, m11 = 0.0;
    for (std::size_t i = 0; i < dense.vectors.n; ++i)
      for (std::size_t j = 0; j < dense.vectors.n; ++j) {
        m00 += dense.vectors(i, 0) * sx(i, j) * dense.vectors(j, 0);
        m01 += dense.vectors(i, 0) * sx(i, j) * dense.vectors(j, 1);
        m11 += dense.vectors(i, 1) * sx(i, j) * dense.vectors(j, 1);
      }
    const double coupling = std::sqrt(0.25 * (m00 - m11) * (m00 - m11) + m01 * m01);
    double worst = 0.0;
    for (double dphi : {0.0, 0.3, 1.1, 2.0, 3.0, 4.5, 6.0}) {
      std::vector<double> phi(dim, 0.0);
      phi[one.decomp.flat_index(Parity::even, 0)] = 0.7 + dphi;
      phi[one.decomp.flat_index(Parity::odd, 0)] = 0.7;
      const double v = expectation_after_phases(as_ensemble(one.eigen_state), phi, obs1);
      worst = std::max(worst, std::abs(v - coupling * std::cos(dphi)));
    }
    out.push_back(make_report("single_doublet_cosine_lmg_N20", worst, 1e-10));
  }

  {
    PureState flipped = s.eigen_state;
    for (std::size_t k = 0; k < 3; k += 2) {
      auto& c = flipped.coefficients[s.decomp.flat_index(Parity::odd, k)];
      c = -c;
    }
    const Distribution p = energy_distribution(s.eigen_state, s.decomp, s.doublets);
    const Distribution q = energy_distribution(flipped, s.decomp, s.doublets);
    double d = p.probabilities.size() == q.probabilities.size() ? 0.0 : 1.0;
    for (std::size_t i = 0; i < std::min(p.probabilities.size(), q.probabilities.size()); ++i)
      d = std::max({d, std::abs(p.probabilities[i] - q.probabilities[i]), std::abs(p.support[i] - q.support[i])});
    out.push_back(make_report("energy_distribution_flip_invariance", d, 0.0));
  }

  {
    const std::vector<double> freqs = random_phases(dim, 5.0);
    std::vector<double> dts;
    for (int i = 0; i <= 200; ++i) dts.push_back(0.1 * i);
    const EchoCurve curve = loschmidt_adiabatic(s.eigen_state, freqs, dts, EchoForm::phase_rate);
    out.push_back(make_report("echo_at_zero", std::abs(curve.values.front() - 1.0), 0.0));
    double excess = 0.0;
    for (double v : curve.values) excess = std::max(excess, v - 1.0);
    out.push_back(make_report("echo_bounded_by_one", excess, 0.0));
  }

  {
    const PureState phys = to_physical_basis(s.eigen_state, s.decomp);
    const DenseMatrix sx = dense_order_parameter(kLmg20);
    const DenseMatrix sx2 = sx * sx;
    const double direct = dense_expectation(sx2 * sx2, phys.coefficients);
    const complex o = otoc_adiabatic(s.eigen_state, std::vector<double>(dim, 0.0), obs);
    out.push_back(make_report("otoc_equal_time_identity", std::abs(o - direct) / std::abs(direct), 1e-10));
  }

  {
    const auto phi = random_phases(dim, 1e3);
    auto shifted = phi;
    for (auto& x : shifted) x += 17.25;
    const MixedState mixed = as_ensemble(s.eigen_state);
    const double a = expectation_after_phases(mixed, phi, obs);
    const double b = expectation_after_phases(mixed, shifted, obs);
    out.push_back(make_report("global_phase_invariance", std::abs(a - b), 1e-12));

    const double full = expectation_after_phases(mixed, phi, obs, CycleSum::full);
    const double doublet = expectation_after_phases(mixed, phi, obs, CycleSum::doublet);
    const double scale = std::abs(s.doublets.rows[0].coupling);
    out.push_back(make_report("full_vs_doublet_sum_lmg_N20_g0", std::abs(full - doublet) / scale, 1e-6));
  }
  return out;
}

// Exact echo under the hold convention, compared with the three adiabatic forms.
std::vector<OracleReport> echo_interpretation_check() {
  const ModelSpec m = ModelSpec::lmg(100);
  const RampProtocol protocol{0.0, 1.25, 2000.0};
  const SbSetup s = sb_setup(m, protocol.g0, 10);
  const PureState psi0 = to_physical_basis(s.eigen_state, s.decomp);
  const auto sched = ramp_schedule(protocol, 1024);
  const PureState psi = piecewise_constant_propagate(psi0, sched.g, sched.dt);

  const DenseEigen hold = dense_eigensolve(dense_hamiltonian(m, protocol.g0));
  std::vector<double> weights(hold.values.size());
  for (std::size_t k = 0; k < weights.size(); ++k) {
    complex acc = 0.0;
    for (std::size_t i = 0; i < hold.vectors.n; ++i) acc += hold.vectors(i, k) * psi.coefficients[i];
    weights[k] = std::norm(acc);
  }
  std::vector<double> dts;
  for (int i = 0; i <= 200; ++i) dts.push_back(0.1 * i);
  std::vector<double> exact;
  for (double dt : dts) {
    complex acc = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) acc += weights[k] * std::polar(1.0, dt * hold.values[k]);
    exact.push_back(std::abs(acc));
  }

  QuadratureControls q;
  q.workers = 1;
  const PhaseTable table = phase_table(m, protocol, q);
  std::string best;
  double best_dev = 1e300;
  for (EchoForm form : {EchoForm::phase_rate, EchoForm::hold, EchoForm::literal}) {
    const EchoCurve curve =
        loschmidt_adiabatic(s.eigen_state, echo_frequencies(table, s.decomp, form), dts, form);
    double d = 0.0;
    for (std::size_t i = 0; i < dts.size(); ++i) d = std::max(d, std::abs(curve.values[i] - exact[i]));
    if (d < best_dev) {
      best_dev = d;
      best = echo_form_name(form);
    }
  }
  return {make_report("loschmidt_interpretation_lmg_N100:" + best, best_dev, 3e-2)};
}

}  // namespace

std::vector<OracleReport> run_validation_suite(const ValidationOptions& options) {
  std::vector<std::pair<std::string, Check>> checks;
  checks.emplace_back("parity", [&] { return parity_checks(options.inject_fault); });
  checks.emplace_back("closed_form", closed_form_checks);
  for (int n : {2, 8, 20, 64})
    for (double g : {0.5, 1.25}) {
      const ModelSpec m = ModelSpec::lmg(n);
      checks.emplace_back("eigen", [m, g] { return eigen_checks(m, g); });
    }
  for (int n : {31, 32, 64})
    for (double g : {0.5, 2.0}) {
      const ModelSpec m = ModelSpec::qrm(100.0, n);
      checks.emplace_back("eigen", [m, g] { return eigen_checks(m, g); });
    }
  checks.emplace_back("propagation", propagation_checks);
  checks.emplace_back("cycle", cycle_checks);
  checks.emplace_back("echo_interpretation", echo_interpretation_check);

  std::vector<std::vector<OracleReport>> results(checks.size());
  parallel_for(checks.size(), worker_count(options.workers), [&](std::size_t i) {
    try {
      results[i] = checks[i].second();
    } catch (const std::exception& e) {
      results[i] = {OracleReport{checks[i].first, 0.0, 0.0, false, e.what()}};
    }
  });
  std::vector<OracleReport> out;
  for (auto& r : results) out.insert(out.end(), r.begin(), r.end());
  std::stable_sort(out.begin(), out.end(), [](const OracleReport& a, const OracleReport& b) { return a.check < b.check; });
  return out;
}

}  // namespace aqis
