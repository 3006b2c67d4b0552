#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "aqis/model.hpp"
#include "aqis/spectrum.hpp"
#include "aqis/states.hpp"

namespace aqis {

/// Triangular cycle g0 -> g1 over [0, tau], mirrored back over [tau, 2 tau].
struct RampProtocol {
  double g0 = 0.0;
  double g1 = 0.0;
  double tau = 1.0;

  void validate() const;
  double duration() const { return 2.0 * tau; }
  RampProtocol with_tau(double t) const { return {g0, g1, t}; }
};

/// g(t); throws ModelError outside [0, 2 tau].
double ramp_value(const RampProtocol& protocol, double t);

struct IntegratorControls {
  double max_step_norm = 0.05;     ///< ||H||_inf dt
  double sample_interval = 0.0;    ///< time between samples; 0 keeps only the endpoints
  bool convergence_gate = true;
  double gate_tolerance = 1e-6;    ///< ||psi_dt - psi_{dt/2}||
  double drift_tolerance = 1e-6;   ///< | ||psi|| - 1 |
  int max_halvings = 3;
};

struct TrajectorySample {
  double t = 0.0;
  double g = 0.0;
  double order = 0.0;   ///< <Sx> or <x>
  double even = 0.0;    ///< <Sz> or <sigma_z>
  double energy = 0.0;  ///< <H(g(t))>
  double norm = 1.0;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  PureState final_state;
  double dt = 0.0;
  std::size_t steps = 0;
  double gate_difference = 0.0;  ///< negative when the gate was skipped
  double max_norm_drift = 0.0;
};

/// RK4 integration of i d/dt psi = H(g(t)) psi over the full cycle.
Trajectory evolve_exact(const PureState& state, const RampProtocol& protocol,
                        const IntegratorControls& controls = {});

struct QuadratureControls {
  std::size_t nodes = 1025;       ///< initial uniform grid, odd
  double tolerance = 1e-3;        ///< radians, on unwrapped phase change between refinements
  double tau_max = 0.0;           ///< tau used for the tolerance; 0 means the protocol's tau
  std::size_t max_nodes = 16385;  ///< cap on the uniform grid
  /// Lowest levels per sector that are refined and convergence-checked; the rest
  /// are integrated on the initial grid only. 0 = all.
  std::size_t tracked_levels = 0;
  bool local_refinement = true;   ///< 4x density in panels where a tracked level crosses E_c(g)
  std::size_t workers = 0;
};

struct PhaseTable {
  ModelSpec model;
  RampProtocol protocol;
  /// Path-averaged energies per parity, ascending within each sector.
  std::array<std::vector<double>, 2> rates;
  std::size_t nodes = 0;           ///< distinct g values evaluated in the accepted pass
  double estimated_error = 0.0;    ///< radians at tau_max
  std::size_t worst_level = 0;
  Parity worst_parity = Parity::even;

  double phase(Parity p, std::size_t k) const { return 2.0 * protocol.tau * rates[index_of(p)][k]; }
  std::size_t dimension() const { return rates[0].size() + rates[1].size(); }
  /// Same rates, different half-cycle duration.
  PhaseTable with_tau(double tau) const;
  /// Rates in eigenbasis flat order (even sector first).
  std::vector<double> flat_rates() const;
  std::vector<double> flat_phases() const;
  /// delta phi_k = phi_{k,+} - phi_{k,-} for k below the shorter sector.
  std::vector<double> delta_phi() const;
};

/// Phase rates by composite Simpson quadrature of eigenvalues along g0 -> g1.
PhaseTable phase_table(const ModelSpec& model, const RampProtocol& protocol,
                       const QuadratureControls& controls = {});

/// c_{k,p} -> c_{k,p} exp(-i phi_{k,p}).
PureState adiabatic_cycle(const PureState& eigen_state, const PhaseTable& phases);
MixedState adiabatic_cycle(const MixedState& eigen_state, const PhaseTable& phases);

/// c_{k,p} -> c_{k,p} exp(-i E_{k,p}(g0) dt).
PureState hold_evolution(const PureState& eigen_state, const SpectralDecomposition& decomp, double dt);

}  // namespace aqis
