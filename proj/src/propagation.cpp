#include "aqis/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include "aqis/error.hpp"
#include "aqis/parallel.hpp"
#include "aqis/spectrum.hpp"
#include "aqis/tridiagonal.hpp"

namespace aqis {

void RampProtocol::validate() const {
  require_finite_coupling(g0);
  require_finite_coupling(g1);
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ModelError("ramp duration tau must be positive");
}

double ramp_value(const RampProtocol& protocol, double t) {
  if (!(t >= 0.0 && t <= 2.0 * protocol.tau))
    throw ModelError("time " + std::to_string(t) + " lies outside the cycle [0, 2 tau]");
  const double s = t <= protocol.tau ? t : 2.0 * protocol.tau - t;
  return protocol.g0 + (protocol.g1 - protocol.g0) * (s / protocol.tau);
}

namespace {

double norm2(const cvector& v) {
  double s = 0.0;
  for (const auto& c : v) s += std::norm(c);
  return s;
}

Trajectory integrate(const PureState& state, const RampProtocol& protocol,
                     const IntegratorControls& controls, std::size_t leg_steps) {
  const ModelSpec& model = state.basis.model;
  const AffineHamiltonian h = build_hamiltonian(model);
  const ObservableMatrix order = observable_matrix(model, order_parameter_observable(model));
  const ObservableMatrix even =
      observable_matrix(model, model.kind == ModelKind::lmg ? ObservableKind::sz : ObservableKind::sigma_z);
  const std::size_t n = model.dimension();
  const double dt = protocol.tau / static_cast<double>(leg_steps);
  const std::size_t total = 2 * leg_steps;
  const std::size_t stride =
      controls.sample_interval > 0.0
          ? std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(controls.sample_interval / dt)))
          : total;

  cvector psi = state.coefficients;
  cvector k1(n), k2(n), k3(n), k4(n), tmp(n), scratch(n), hpsi(n);
  double theta = 0.0;

  Trajectory out;
  out.dt = dt;
  out.steps = total;

  auto gate = [&](std::size_t step) {
    const double t = protocol.tau * static_cast<double>(step) / static_cast<double>(leg_steps);
    return ramp_value(protocol, std::min(t, 2.0 * protocol.tau));
  };
  auto record = [&](std::size_t step) {
    const double nrm = norm2(psi);
    out.max_norm_drift = std::max(out.max_norm_drift, std::abs(std::sqrt(nrm) - 1.0));
    TrajectorySample s;
    s.t = dt * static_cast<double>(step);
    s.g = gate(step);
    PureState cur{{BasisKind::physical, model, 0.0}, psi};
    s.order = expectation(cur, order);
    s.even = expectation(cur, even);
    s.energy = energy_expectation(cur, h, s.g);
    s.norm = std::sqrt(nrm);
    out.samples.push_back(s);
  };
  // f = -i (H(g) - c) x
  auto deriv = [&](double g, double c, const cvector& x, cvector& y) {
    h.apply<complex>(g, x, y, scratch);
    for (std::size_t i = 0; i < n; ++i) y[i] = complex(0.0, -1.0) * (y[i] - c * x[i]);
  };

  record(0);
  for (std::size_t step = 0; step < total; ++step) {
    // Steps never straddle t = tau, so g is linear within each step.
    const double ga = gate(step);
    const double gb = gate(step + 1);
    const double gm = 0.5 * (ga + gb);
    h.apply<complex>(ga, psi, hpsi, scratch);
    complex e = 0.0;
    for (std::size_t i = 0; i < n; ++i) e += std::conj(psi[i]) * hpsi[i];
    const double c = e.real() / norm2(psi);
    for (std::size_t i = 0; i < n; ++i) k1[i] = complex(0.0, -1.0) * (hpsi[i] - c * psi[i]);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = psi[i] + 0.5 * dt * k1[i];
    deriv(gm, c, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = psi[i] + 0.5 * dt * k2[i];
    deriv(gm, c, tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = psi[i] + dt * k3[i];
    deriv(gb, c, tmp, k4);
    for (std::size_t i = 0; i < n; ++i) psi[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    theta += c * dt;
    if ((step + 1) % stride == 0 || step + 1 == total) {
      // Put the tracked global phase back before sampling.
      const complex rot = std::polar(1.0, -theta);
      for (auto& x : psi) x *= rot;
      theta = 0.0;
      record(step + 1);
      if (out.max_norm_drift > controls.drift_tolerance)
        throw NumericError("norm drift " + std::to_string(out.max_norm_drift) +
                           " exceeds tolerance; step too large");
    }
  }
  out.final_state = {{BasisKind::physical, model, 0.0}, std::move(psi)};
  return out;
}

}  // namespace

Trajectory evolve_exact(const PureState& state, const RampProtocol& protocol,
                        const IntegratorControls& controls) {
  protocol.validate();
  if (state.basis.kind != BasisKind::physical) throw ShapeError("evolve_exact needs a physical-basis state");
  if (state.coefficients.size() != state.basis.model.dimension())
    throw ShapeError("state length does not match the model dimension");
  if (!(controls.max_step_norm > 0.0)) throw ModelError("max_step_norm must be positive");
  const AffineHamiltonian h = build_hamiltonian(state.basis.model);
  const double hmax = std::max(h.at(protocol.g0).inf_norm(), h.at(protocol.g1).inf_norm());
  std::size_t leg = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(protocol.tau * hmax / controls.max_step_norm)));

  Trajectory coarse = integrate(state, protocol, controls, leg);
  if (!controls.convergence_gate) {
    coarse.gate_difference = -1.0;
    return coarse;
  }
  for (int attempt = 0; attempt <= controls.max_halvings; ++attempt) {
    leg *= 2;
    Trajectory fine = integrate(state, protocol, controls, leg);
    double diff = 0.0;
    for (std::size_t i = 0; i < fine.final_state.coefficients.size(); ++i)
      diff += std::norm(fine.final_state.coefficients[i] - coarse.final_state.coefficients[i]);
    diff = std::sqrt(diff);
    if (diff < controls.gate_tolerance) {
      coarse.gate_difference = diff;
      return coarse;
    }
    coarse = std::move(fine);
  }
  throw NumericError("step-halving check did not converge");
}

PhaseTable PhaseTable::with_tau(double tau) const {
  PhaseTable t = *this;
  t.protocol.tau = tau;
  t.protocol.validate();
  return t;
}

std::vector<double> PhaseTable::flat_rates() const {
  std::vector<double> out = rates[0];
  out.insert(out.end(), rates[1].begin(), rates[1].end());
  return out;
}

std::vector<double> PhaseTable::flat_phases() const {
  auto out = flat_rates();
  for (auto& r : out) r *= 2.0 * protocol.tau;
  return out;
}

std::vector<double> PhaseTable::delta_phi() const {
  const std::size_t n = std::min(rates[0].size(), rates[1].size());
  std::vector<double> out(n);
  // Difference of rates first keeps the tiny splittings accurate at large tau.
  for (std::size_t k = 0; k < n; ++k) out[k] = 2.0 * protocol.tau * (rates[0][k] - rates[1][k]);
  return out;
}

namespace {

using Energies = std::array<std::vector<double>, 2>;
using NodeKey = std::pair<long long, long long>;

NodeKey reduce(long long num, long long den) {
  const long long d = std::gcd(num, den);
  return {num / d, den / d};
}

// Energies at quadrature nodes. A node with cached neighbours on both sides is
// solved by bracketed Newton: Weyl's inequality bounds how far each eigenvalue can
// move from a neighbour, |dE_k| <= |dg| ||L||. Nodes without neighbours are solved
// in short chains whose first member uses QL.
class NodeCache {
 public:
  NodeCache(const ModelSpec& model, const RampProtocol& protocol, std::size_t workers)
      : model_(model), protocol_(protocol), workers_(workers) {
    const auto at0 = build_parity_blocks(model, 0.0);
    const auto at1 = build_parity_blocks(model, 1.0);
    for (std::size_t p = 0; p < 2; ++p) {
      SymTridiagonal lin = at1.blocks[p];
      for (std::size_t i = 0; i < lin.diag.size(); ++i) lin.diag[i] -= at0.blocks[p].diag[i];
      for (std::size_t i = 0; i < lin.off.size(); ++i) lin.off[i] -= at0.blocks[p].off[i];
      linear_norm_[p] = lin.inf_norm();
    }
  }

  double g_of(NodeKey key) const { return g_at(fraction(key)); }

  /// Solves missing nodes for at most `limit` levels per sector.
  void ensure(const std::vector<NodeKey>& keys, std::size_t limit) {
    std::vector<double> missing;
    for (const auto& k : keys) {
      const double t = fraction(k);
      if (!cache_.count(t)) missing.push_back(t);
    }
    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    if (missing.empty()) return;

    std::vector<Energies> results(missing.size());
    std::vector<std::size_t> bridged, loose;
    for (std::size_t i = 0; i < missing.size(); ++i) {
      auto right = cache_.lower_bound(missing[i]);
      (right != cache_.end() && right != cache_.begin() ? bridged : loose).push_back(i);
    }
    parallel_for(bridged.size(), workers_, [&](std::size_t b) {
      const std::size_t i = bridged[b];
      const double t = missing[i];
      auto right = cache_.lower_bound(t);
      auto left = std::prev(right);
      results[i] = between(t, left->first, left->second, right->first, right->second, limit);
    });

    constexpr std::size_t chain = 16;
    std::vector<std::pair<std::size_t, std::size_t>> chunks;
    for (std::size_t c = 0; c < loose.size(); c += chain)
      chunks.emplace_back(c, std::min(loose.size(), c + chain));
    parallel_for(chunks.size(), workers_, [&](std::size_t c) {
      const auto [begin, end] = chunks[c];
      for (std::size_t m = begin; m < end; ++m) {
        const std::size_t i = loose[m];
        const double t = missing[i];
        if (m == begin) {
          results[i] = parity_energies(model_, g_at(t));
          for (auto& e : results[i])
            if (e.size() > limit) e.resize(limit);
        } else if (m == begin + 1) {
          const std::size_t a = loose[m - 1];
          results[i] = between(t, missing[a], results[a], missing[a], results[a], limit);
        } else {
          const std::size_t a = loose[m - 2], b = loose[m - 1];
          results[i] = extrapolate(t, missing[a], results[a], missing[b], results[b], limit);
        }
      }
    });
    for (std::size_t i = 0; i < missing.size(); ++i) cache_.emplace(missing[i], std::move(results[i]));
  }

  const Energies& at(NodeKey key) const { return cache_.at(fraction(key)); }
  std::size_t size() const { return cache_.size(); }

 private:
  static double fraction(NodeKey key) {
    return static_cast<double>(key.first) / static_cast<double>(key.second);
  }
  double g_at(double t) const { return protocol_.g0 + (protocol_.g1 - protocol_.g0) * t; }

  double radius(std::size_t p, double dt) const {
    return std::abs(protocol_.g1 - protocol_.g0) * std::abs(dt) * linear_norm_[p];
  }

  Energies solve(double t, const std::array<std::vector<double>, 2>& lower,
                 const std::array<std::vector<double>, 2>& upper,
                 const std::array<std::vector<double>, 2>& guess) const {
    const double g = g_at(t);
    const ParityBlockLayout layout = build_parity_blocks(model_, g);
    Energies out;
    for (std::size_t p = 0; p < 2; ++p) {
      try {
        out[p] = tridiagonal_eigenvalues_bracketed(layout.blocks[p], lower[p], upper[p], guess[p]);
        bool ok = true;
        for (std::size_t k = 1; k < out[p].size() && ok; ++k) ok = out[p][k] >= out[p][k - 1];
        if (ok) continue;
      } catch (const NumericError&) {
      }
      try {
        out[p] = tridiagonal_eigenvalues(layout.blocks[p]);
        out[p].resize(lower[p].size());
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at g=" + std::to_string(g));
      }
    }
    return out;
  }

  double slack(const std::vector<double>& e) const {
    const double scale = e.empty() ? 1.0 : std::max({1.0, std::abs(e.front()), std::abs(e.back())});
    return 1e3 * std::numeric_limits<double>::epsilon() * scale;
  }

  Energies between(double t, double ta, const Energies& ea, double tb, const Energies& eb,
                   std::size_t limit) const {
    std::array<std::vector<double>, 2> lo, hi, guess;
    for (std::size_t p = 0; p < 2; ++p) {
      const std::size_t n = std::min({ea[p].size(), eb[p].size(), limit});
      lo[p].resize(n);
      hi[p].resize(n);
      guess[p].resize(n);
      const double ra = radius(p, t - ta) + slack(ea[p]);
      const double rb = radius(p, tb - t) + slack(eb[p]);
      const double w = tb > ta ? (t - ta) / (tb - ta) : 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        lo[p][k] = std::max(ea[p][k] - ra, eb[p][k] - rb);
        hi[p][k] = std::min(ea[p][k] + ra, eb[p][k] + rb);
        guess[p][k] = (1.0 - w) * ea[p][k] + w * eb[p][k];
      }
    }
    return solve(t, lo, hi, guess);
  }

  Energies extrapolate(double t, double ta, const Energies& ea, double tb, const Energies& eb,
                       std::size_t limit) const {
    std::array<std::vector<double>, 2> lo, hi, guess;
    for (std::size_t p = 0; p < 2; ++p) {
      const std::size_t n = std::min({ea[p].size(), eb[p].size(), limit});
      lo[p].resize(n);
      hi[p].resize(n);
      guess[p].resize(n);
      const double r = radius(p, t - tb) + slack(eb[p]);
      const double w = (t - tb) / (tb - ta);
      for (std::size_t k = 0; k < n; ++k) {
        lo[p][k] = eb[p][k] - r;
        hi[p][k] = eb[p][k] + r;
        guess[p][k] = eb[p][k] + w * (eb[p][k] - ea[p][k]);
      }
    }
    return solve(t, lo, hi, guess);
  }

  ModelSpec model_;
  RampProtocol protocol_;
  std::size_t workers_;
  std::array<double, 2> linear_norm_{};
  std::map<double, Energies> cache_;
};

std::size_t count_below(const std::vector<double>& e, std::size_t tracked, std::optional<double> ec) {
  if (!ec) return 0;
  const std::size_t n = std::min(tracked, e.size());
  return static_cast<std::size_t>(std::lower_bound(e.begin(), e.begin() + static_cast<long>(n), *ec) -
                                  e.begin());
}

struct Pass {
  Energies rates;
  std::size_t nodes = 0;
};

// Levels at or above `limit` are left out of the pass.
Pass simpson_pass(NodeCache& cache, const ModelSpec& model, long long intervals,
                  const QuadratureControls& controls, std::size_t tracked, std::size_t limit) {
  std::vector<NodeKey> base;
  for (long long i = 0; i <= intervals; ++i) base.push_back(reduce(i, intervals));
  cache.ensure(base, limit);

  const long long panels = intervals / 2;
  std::vector<bool> refined(static_cast<std::size_t>(panels), false);
  if (controls.local_refinement) {
    for (long long p = 0; p < panels; ++p) {
      bool crosses = false;
      for (std::size_t s = 0; s < 2 && !crosses; ++s) {
        std::size_t first = 0;
        for (long long j = 0; j <= 2; ++j) {
          const NodeKey key = reduce(2 * p + j, intervals);
          const std::size_t c = count_below(cache.at(key)[s], tracked, critical_energy(model, cache.g_of(key)));
          if (j == 0) first = c;
          else if (c != first) crosses = true;
        }
      }
      refined[static_cast<std::size_t>(p)] = crosses;
    }
    std::vector<NodeKey> extra;
    for (long long p = 0; p < panels; ++p)
      if (refined[static_cast<std::size_t>(p)])
        for (long long j = 1; j < 8; ++j) extra.push_back(reduce(8 * p + j, 4 * intervals));
    cache.ensure(extra, limit);
  }

  Pass out;
  std::size_t distinct = base.size();
  const double h = 1.0 / static_cast<double>(intervals);
  for (std::size_t s = 0; s < 2; ++s) {
    const std::size_t levels = std::min(limit, cache.at(base.front())[s].size());
    std::vector<double> acc(levels, 0.0);
    auto add = [&](NodeKey key, double w) {
      const auto& e = cache.at(key)[s];
      for (std::size_t k = 0; k < levels; ++k) acc[k] += w * e[k];
    };
    for (long long p = 0; p < panels; ++p) {
      if (refined[static_cast<std::size_t>(p)]) {
        const double hs = h / 4.0;
        for (long long j = 0; j <= 8; ++j) {
          const double w = (j == 0 || j == 8) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
          add(reduce(8 * p + j, 4 * intervals), w * hs / 3.0);
        }
        if (s == 0) distinct += 6;
      } else {
        add(reduce(2 * p, intervals), h / 3.0);
        add(reduce(2 * p + 1, intervals), 4.0 * h / 3.0);
        add(reduce(2 * p + 2, intervals), h / 3.0);
      }
    }
    out.rates[s] = std::move(acc);
  }
  out.nodes = distinct;
  return out;
}

}  // namespace

PhaseTable phase_table(const ModelSpec& model, const RampProtocol& protocol,
                       const QuadratureControls& controls) {
  protocol.validate();
  model.validate();
  PhaseTable table;
  table.model = model;
  table.protocol = protocol;
  if (protocol.g1 == protocol.g0) {
    table.rates = parity_energies(model, protocol.g0);
    table.nodes = 1;
    return table;
  }
  if (controls.nodes < 3 || controls.nodes % 2 == 0)
    throw ModelError("quadrature node count must be odd and at least 3");
  if (!(controls.tolerance > 0.0)) throw ModelError("quadrature tolerance must be positive");
  const double tau_max = controls.tau_max > 0.0 ? controls.tau_max : protocol.tau;
  const std::size_t tracked = controls.tracked_levels == 0 ? model.dimension() : controls.tracked_levels;

  NodeCache cache(model, protocol, controls.workers);
  long long intervals = static_cast<long long>(controls.nodes) - 1;
  const Pass base = simpson_pass(cache, model, intervals, controls, tracked, model.dimension());
  Pass prev = base;
  for (;;) {
    if (static_cast<std::size_t>(2 * intervals + 1) > controls.max_nodes)
      throw NumericError("phase quadrature did not converge below " + std::to_string(controls.max_nodes) +
                         " nodes; worst level k=" + std::to_string(table.worst_level) + " (" +
                         parity_name(table.worst_parity) + "), error " +
                         std::to_string(table.estimated_error) + " rad");
    intervals *= 2;
    Pass next = simpson_pass(cache, model, intervals, controls, tracked, tracked);
    double worst = 0.0;
    for (std::size_t s = 0; s < 2; ++s) {
      const std::size_t n = std::min(tracked, next.rates[s].size());
      for (std::size_t k = 0; k < n; ++k) {
        const double d = 2.0 * tau_max * std::abs(next.rates[s][k] - prev.rates[s][k]);
        if (d > worst) {
          worst = d;
          table.worst_level = k;
          table.worst_parity = static_cast<Parity>(s);
        }
      }
    }
    table.estimated_error = worst;
    if (worst < controls.tolerance) {
      // Untracked levels keep their base-grid rates.
      for (std::size_t s = 0; s < 2; ++s) {
        table.rates[s] = base.rates[s];
        std::copy(next.rates[s].begin(), next.rates[s].end(), table.rates[s].begin());
      }
      table.nodes = next.nodes;
      return table;
    }
    prev = std::move(next);
  }
}

namespace {

void require_table_fits(const PureState& s, const PhaseTable& phases) {
  if (s.basis.kind != BasisKind::eigen || !(s.basis.model == phases.model) ||
      s.basis.g != phases.protocol.g0)
    throw ShapeError("phase table does not belong to this state's eigenbasis");
  if (s.coefficients.size() != phases.dimension()) throw ShapeError("phase table size mismatch");
}

}  // namespace

PureState adiabatic_cycle(const PureState& eigen_state, const PhaseTable& phases) {
  require_table_fits(eigen_state, phases);
  PureState out = eigen_state;
  const auto phi = phases.flat_phases();
  for (std::size_t i = 0; i < phi.size(); ++i) out.coefficients[i] *= std::polar(1.0, -phi[i]);
  return out;
}

MixedState adiabatic_cycle(const MixedState& eigen_state, const PhaseTable& phases) {
  MixedState out = eigen_state;
  for (auto& m : out.members) m.state = adiabatic_cycle(m.state, phases);
  return out;
}

PureState hold_evolution(const PureState& eigen_state, const SpectralDecomposition& decomp, double dt) {
  if (!(dt >= 0.0)) throw ModelError("hold duration must be non-negative");
  if (eigen_state.basis.kind != BasisKind::eigen || eigen_state.coefficients.size() != decomp.dimension())
    throw ShapeError("hold_evolution needs an eigenbasis state of this spectrum");
  PureState out = eigen_state;
  for (Parity p : {Parity::even, Parity::odd}) {
    const auto& e = decomp.sector(p).energies;
    for (std::size_t k = 0; k < e.size(); ++k)
      out.coefficients[decomp.flat_index(p, k)] *= std::polar(1.0, -e[k] * dt);
  }
  return out;
}

}  // namespace aqis
