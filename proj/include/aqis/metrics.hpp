#pragma once

#include <complex>
#include <cstddef>
#include <utility>
#include <vector>

#include "aqis/distribution.hpp"
#include "aqis/propagation.hpp"
#include "aqis/spectrum.hpp"
#include "aqis/states.hpp"

namespace aqis {

/// Parity-odd observable in the eigenbasis at g0, stored as the dense even x odd
/// block B(i, j) = <phi_{i,+}| O |phi_{j,-}>.
class EigenbasisObservable {
 public:
  EigenbasisObservable(const SpectralDecomposition& decomp, const ObservableMatrix& obs,
                       std::size_t workers = 0);

  std::size_t even_size() const { return n_even_; }
  std::size_t odd_size() const { return n_odd_; }
  std::size_t dimension() const { return n_even_ + n_odd_; }
  double operator()(std::size_t i, std::size_t j) const { return block_[i * n_odd_ + j]; }
  const ModelSpec& model() const { return model_; }
  double g() const { return g_; }
  /// y = V x on flat eigenbasis vectors.
  void apply(const cvector& x, cvector& y) const;

 private:
  ModelSpec model_;
  double g_ = 0.0;
  std::size_t n_even_ = 0;
  std::size_t n_odd_ = 0;
  std::vector<double> block_;
};

/// Bilinear sum over every eigenstate pair, or only the k = k doublet terms.
enum class CycleSum { full, doublet };

/// Wraps a pure state as a one-member ensemble.
MixedState as_ensemble(const PureState& state);

/// <O> after c -> c exp(-i phi) with flat phases phi.
double expectation_after_phases(const MixedState& eigen_state, const std::vector<double>& flat_phases,
                                const EigenbasisObservable& obs, CycleSum form = CycleSum::full);

double post_cycle_expectation(const MixedState& eigen_state, const PhaseTable& phases,
                              const EigenbasisObservable& obs, CycleSum form = CycleSum::full);
double post_cycle_expectation(const PureState& eigen_state, const PhaseTable& phases,
                              const EigenbasisObservable& obs, CycleSum form = CycleSum::full);

/// `count` equally spaced values in [tau0, tau1], both ends included.
std::vector<double> tau_grid(double tau0, double tau1, std::size_t count);

struct TauSweepSeries {
  std::vector<double> taus;
  std::vector<double> values;
  double mean = 0.0;
  double variance = 0.0;  ///< population convention
};

/// Post-cycle expectation for each tau, reusing the tau-independent rates.
TauSweepSeries tau_sweep(const MixedState& eigen_state, const PhaseTable& phases,
                         const EigenbasisObservable& obs, const std::vector<double>& taus,
                         CycleSum form = CycleSum::full);

TauSweepSeries make_series(std::vector<double> taus, std::vector<double> values);
double scrambling_sigma(const TauSweepSeries& series);

struct ScalingFit {
  double exponent = 0.0;
  double prefactor = 0.0;
  double residual = 0.0;  ///< RMS deviation in log space
};

/// Least squares of log sigma against log N_mc.
ScalingFit scaling_fit(const std::vector<std::pair<double, double>>& points);

/// Which frequencies multiply dt in the adiabatic echo.
enum class EchoForm {
  phase_rate,  ///< path-averaged energies; a cycle stretched by dt
  hold,        ///< E(g0); the protocol holds g0 for dt after 2 tau
  literal,     ///< phi = 2 tau E-bar, tau-dependent
};

const char* echo_form_name(EchoForm form);

struct EchoCurve {
  std::vector<double> dts;
  std::vector<double> values;
  EchoForm form = EchoForm::phase_rate;
};

/// Frequencies in flat eigenbasis order for the chosen form.
std::vector<double> echo_frequencies(const PhaseTable& phases, const SpectralDecomposition& decomp,
                                     EchoForm form);

/// L(dt) = |sum |c|^2 exp(i dt w)| / sum |c|^2.
EchoCurve loschmidt_adiabatic(const PureState& eigen_state, const std::vector<double>& frequencies,
                              const std::vector<double>& dts, EchoForm form);

struct EchoDecay {
  double onset = 0.0;        ///< first dt where the upper envelope drops to 1/2
  double slope = 0.0;        ///< log-log slope of the envelope over [onset, 10 onset]
  std::size_t fit_points = 0;
  double max_revival = 0.0;  ///< largest L after its first local minimum
};

/// Decay summary of an echo curve on an increasing dt grid. The upper envelope is
/// max over dt' >= dt of L. Throws NumericError when the envelope never reaches
/// 1/2 or fewer than 3 grid points fall in the fit decade.
EchoDecay echo_decay(const EchoCurve& curve);

struct ExactEcho {
  std::vector<double> dts;
  std::vector<double> hold;       ///< protocol held at g0 for dt
  std::vector<double> stretched;  ///< overlap with a cycle of half-duration tau + dt/2
};

/// Exact propagation for small models; `decomp` is the spectrum at g0.
ExactEcho loschmidt_exact_small(const PureState& state, const RampProtocol& protocol,
                                const SpectralDecomposition& decomp, const std::vector<double>& dts,
                                const IntegratorControls& controls = {});

/// <psi| O^4 |psi> for a physical-basis state.
double otoc_equal_time(const PureState& state, const ObservableMatrix& obs);

/// <psi0| Phi^dag V Phi V Phi^dag V Phi V |psi0> with Phi = diag(exp(-i phi)).
complex otoc_adiabatic(const PureState& eigen_state, const std::vector<double>& flat_phases,
                       const EigenbasisObservable& obs);

struct OtocPoint {
  double tau = 0.0;
  complex value;
  double rescaled = 0.0;  ///< |O| / O(0)
};

struct OtocSeries {
  std::vector<OtocPoint> points;
  double o0 = 0.0;
};

OtocSeries otoc_series(const PureState& eigen_state, const PhaseTable& phases,
                       const EigenbasisObservable& obs, const std::vector<double>& taus, double o0);

struct UniformityReport {
  std::vector<double> sample;  ///< delta phi mod 2 pi
  double ks = 0.0;
  Distribution histogram;      ///< bin centres in [0, 2 pi)
  std::vector<std::pair<double, double>> circle;
};

/// One-sample Kolmogorov-Smirnov statistic of values in [0, 1) against U(0, 1).
double ks_uniform(std::vector<double> values);

/// Uniformity of delta phi_k mod 2 pi for k in [k_begin, k_end).
UniformityReport phase_uniformity(const std::vector<double>& delta_phi, std::size_t k_begin,
                                  std::size_t k_end, std::size_t bins = 20);

struct OrderParameterRow {
  double g1 = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
  double mean_abs = 0.0;
  std::size_t nodes = 0;
};

/// tau-averaged post-cycle order parameter for each g1.
std::vector<OrderParameterRow> order_parameter_curve(const MixedState& eigen_state,
                                                     const EigenbasisObservable& obs,
                                                     const std::vector<double>& g1_values,
                                                     const std::vector<double>& taus,
                                                     const QuadratureControls& quadrature = {},
                                                     CycleSum form = CycleSum::full);

/// Highest within-sector level carrying weight above `cutoff`, plus one.
std::size_t populated_levels(const MixedState& eigen_state, const SpectralDecomposition& decomp,
                             double cutoff = 1e-14);

}  // namespace aqis
