#include "aqis/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "aqis/error.hpp"
#include "aqis/parallel.hpp"

namespace aqis {

EigenbasisObservable::EigenbasisObservable(const SpectralDecomposition& decomp, const ObservableMatrix& obs,
                                           std::size_t workers)
    : model_(decomp.model), g_(decomp.g) {
  if (!(obs.model == decomp.model)) throw ShapeError("observable and spectrum belong to different models");
  if (obs.character != ParityCharacter::odd)
    throw ModelError("eigenbasis observable block needs a parity-odd observable");
  if (!decomp.has_vectors()) throw ShapeError("eigenbasis observable needs eigenvectors");
  const ParitySector& even = decomp.sector(Parity::even);
  const ParitySector& odd = decomp.sector(Parity::odd);
  n_even_ = even.size();
  n_odd_ = odd.size();
  block_.assign(n_even_ * n_odd_, 0.0);
  parallel_for(n_odd_, workers, [&](std::size_t j) {
    const auto w = obs.matrix.apply(decomp.physical_vector(Parity::odd, j));
    std::vector<double> we(even.indices.size());
    for (std::size_t r = 0; r < we.size(); ++r) we[r] = w[even.indices[r]];
    for (std::size_t i = 0; i < n_even_; ++i) {
      const auto v = even.vector(i);
      double s = 0.0;
      for (std::size_t r = 0; r < we.size(); ++r) s += v[r] * we[r];
      block_[i * n_odd_ + j] = s;
    }
  });
}

void EigenbasisObservable::apply(const cvector& x, cvector& y) const {
  if (x.size() != dimension()) throw ShapeError("eigenbasis observable: length mismatch");
  y.assign(dimension(), 0.0);
  for (std::size_t i = 0; i < n_even_; ++i) {
    const double* row = block_.data() + i * n_odd_;
    complex s = 0.0;
    const complex xi = x[i];
    for (std::size_t j = 0; j < n_odd_; ++j) {
      s += row[j] * x[n_even_ + j];
      y[n_even_ + j] += row[j] * xi;
    }
    y[i] = s;
  }
}

MixedState as_ensemble(const PureState& state) {
  MixedState m;
  m.members.push_back({1.0, 0, state});
  return m;
}

namespace {

void require_eigen_fit(const PureState& s, const EigenbasisObservable& obs) {
  if (s.basis.kind != BasisKind::eigen || !(s.basis.model == obs.model()) || s.basis.g != obs.g())
    throw ShapeError("state is not in the observable's eigenbasis");
  if (s.coefficients.size() != obs.dimension()) throw ShapeError("eigenbasis dimension mismatch");
}

double member_value(const PureState& s, const std::vector<double>& phi, const EigenbasisObservable& obs,
                    CycleSum form) {
  require_eigen_fit(s, obs);
  const std::size_t ne = obs.even_size();
  const auto& c = s.coefficients;
  double nrm = 0.0;
  std::size_t ref = c.size();
  for (std::size_t i = 0; i < c.size(); ++i) {
    nrm += std::norm(c[i]);
    if (ref == c.size() && c[i] != complex(0.0)) ref = i;
  }
  if (ref == c.size()) throw StateError("zero state");
  // Phases relative to one populated level; only differences enter.
  std::vector<std::pair<std::size_t, complex>> a, b;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i] == complex(0.0)) continue;
    const complex z = c[i] * std::polar(1.0, -(phi[i] - phi[ref]));
    if (i < ne) a.emplace_back(i, z);
    else b.emplace_back(i - ne, z);
  }
  complex sum = 0.0;
  if (form == CycleSum::full) {
    for (const auto& [i, ai] : a) {
      complex inner = 0.0;
      for (const auto& [j, bj] : b) inner += obs(i, j) * bj;
      sum += std::conj(ai) * inner;
    }
  } else {
    std::size_t q = 0;
    for (const auto& [i, ai] : a) {
      while (q < b.size() && b[q].first < i) ++q;
      if (q < b.size() && b[q].first == i) sum += std::conj(ai) * obs(i, i) * b[q].second;
    }
  }
  return 2.0 * sum.real() / nrm;
}

}  // namespace

double expectation_after_phases(const MixedState& eigen_state, const std::vector<double>& flat_phases,
                                const EigenbasisObservable& obs, CycleSum form) {
  if (flat_phases.size() != obs.dimension()) throw ShapeError("phase vector length mismatch");
  double total = 0.0, weight = 0.0;
  for (const auto& m : eigen_state.members) {
    total += m.weight * member_value(m.state, flat_phases, obs, form);
    weight += m.weight;
  }
  return total / weight;
}

double post_cycle_expectation(const MixedState& eigen_state, const PhaseTable& phases,
                              const EigenbasisObservable& obs, CycleSum form) {
  if (!(phases.model == obs.model()) || phases.protocol.g0 != obs.g())
    throw ShapeError("phase table and observable belong to different setups");
  return expectation_after_phases(eigen_state, phases.flat_phases(), obs, form);
}

double post_cycle_expectation(const PureState& eigen_state, const PhaseTable& phases,
                              const EigenbasisObservable& obs, CycleSum form) {
  return post_cycle_expectation(as_ensemble(eigen_state), phases, obs, form);
}

std::vector<double> tau_grid(double tau0, double tau1, std::size_t count) {
  if (count < 2) throw ModelError("tau grid needs at least two samples");
  if (!(tau0 > 0.0) || !(tau1 > tau0)) throw ModelError("tau grid needs 0 < tau0 < tau1");
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = tau0 + (tau1 - tau0) * static_cast<double>(i) / static_cast<double>(count - 1);
  return out;
}

TauSweepSeries make_series(std::vector<double> taus, std::vector<double> values) {
  if (values.empty() || taus.size() != values.size()) throw ShapeError("tau series needs matching, non-empty data");
  TauSweepSeries s;
  s.taus = std::move(taus);
  s.values = std::move(values);
  double mean = 0.0;
  for (double v : s.values) mean += v;
  mean /= static_cast<double>(s.values.size());
  double var = 0.0;
  for (double v : s.values) var += (v - mean) * (v - mean);
  s.mean = mean;
  s.variance = var / static_cast<double>(s.values.size());
  return s;
}

TauSweepSeries tau_sweep(const MixedState& eigen_state, const PhaseTable& phases,
                         const EigenbasisObservable& obs, const std::vector<double>& taus, CycleSum form) {
  if (taus.empty()) throw ModelError("tau sweep needs at least one tau");
  std::vector<double> values;
  values.reserve(taus.size());
  for (double tau : taus) values.push_back(post_cycle_expectation(eigen_state, phases.with_tau(tau), obs, form));
  return make_series(taus, std::move(values));
}

double scrambling_sigma(const TauSweepSeries& series) {
  if (series.values.empty()) throw ShapeError("empty tau series");
  return std::sqrt(series.variance);
}

ScalingFit scaling_fit(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 4) throw ModelError("scaling fit needs at least four points");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(points.size());
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0)) throw ModelError("scaling fit needs positive data");
    const double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double det = n * sxx - sx * sx;
  if (det <= 0.0) throw ModelError("scaling fit needs at least two distinct N_mc values");
  ScalingFit fit;
  fit.exponent = (n * sxy - sx * sy) / det;
  const double intercept = (sy - fit.exponent * sx) / n;
  fit.prefactor = std::exp(intercept);
  double r = 0.0;
  for (const auto& [x, y] : points) {
    const double d = std::log(y) - (intercept + fit.exponent * std::log(x));
    r += d * d;
  }
  fit.residual = std::sqrt(r / n);
  return fit;
}

const char* echo_form_name(EchoForm form) {
  switch (form) {
    case EchoForm::phase_rate: return "phase_rate";
    case EchoForm::hold: return "hold";
    case EchoForm::literal: return "literal";
  }
  return "?";
}

std::vector<double> echo_frequencies(const PhaseTable& phases, const SpectralDecomposition& decomp,
                                     EchoForm form) {
  switch (form) {
    case EchoForm::phase_rate: return phases.flat_rates();
    case EchoForm::literal: return phases.flat_phases();
    case EchoForm::hold: {
      std::vector<double> out = decomp.sector(Parity::even).energies;
      const auto& odd = decomp.sector(Parity::odd).energies;
      out.insert(out.end(), odd.begin(), odd.end());
      return out;
    }
  }
  return {};
}

EchoCurve loschmidt_adiabatic(const PureState& eigen_state, const std::vector<double>& frequencies,
                              const std::vector<double>& dts, EchoForm form) {
  if (eigen_state.basis.kind != BasisKind::eigen) throw ShapeError("echo needs an eigenbasis state");
  if (frequencies.size() != eigen_state.coefficients.size()) throw ShapeError("echo frequency length mismatch");
  std::vector<std::pair<double, double>> pw;
  double total = 0.0;
  for (std::size_t i = 0; i < frequencies.size(); ++i) {
    const double p = std::norm(eigen_state.coefficients[i]);
    if (p == 0.0) continue;
    pw.emplace_back(p, frequencies[i]);
    total += p;
  }
  if (pw.empty()) throw StateError("zero state");
  const double w0 = pw.front().second;
  EchoCurve curve;
  curve.form = form;
  curve.dts = dts;
  for (double dt : dts) {
    complex s = 0.0;
    for (const auto& [p, w] : pw) s += p * std::polar(1.0, dt * (w - w0));
    curve.values.push_back(std::min(1.0, std::abs(s) / total));
  }
  return curve;
}

EchoDecay echo_decay(const EchoCurve& curve) {
  const auto& x = curve.dts;
  const auto& y = curve.values;
  if (x.size() != y.size() || x.size() < 3) throw ShapeError("echo curve needs at least 3 points");
  EchoDecay out;
  std::size_t first_min = x.size();
  for (std::size_t i = 1; i + 1 < y.size(); ++i)
    if (y[i] < y[i - 1] && y[i] <= y[i + 1]) {
      first_min = i;
      break;
    }
  for (std::size_t i = first_min + 1; i < y.size(); ++i) out.max_revival = std::max(out.max_revival, y[i]);

  std::vector<double> envelope(y.size());
  double run = 0.0;
  for (std::size_t i = y.size(); i-- > 0;) {
    run = std::max(run, y[i]);
    envelope[i] = run;
  }
  std::size_t start = x.size();
  for (std::size_t i = 0; i < x.size(); ++i)
    if (envelope[i] <= 0.5 && x[i] > 0.0) {
      start = i;
      break;
    }
  if (start == x.size()) throw NumericError("echo envelope never decays to 1/2 on this grid");
  out.onset = x[start];
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = start; i < x.size() && x[i] <= 10.0 * out.onset * (1.0 + 1e-12); ++i)
    if (envelope[i] > 0.0) pts.emplace_back(std::log(x[i]), std::log(envelope[i]));
  if (pts.size() < 3) throw NumericError("too few echo points in the first decade of decay");
  double mx = 0.0, my = 0.0;
  for (auto [a, b] : pts) {
    mx += a;
    my += b;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxy = 0.0, sxx = 0.0;
  for (auto [a, b] : pts) {
    sxy += (a - mx) * (b - my);
    sxx += (a - mx) * (a - mx);
  }
  out.slope = sxy / sxx;
  out.fit_points = pts.size();
  return out;
}

ExactEcho loschmidt_exact_small(const PureState& state, const RampProtocol& protocol,
                                const SpectralDecomposition& decomp, const std::vector<double>& dts,
                                const IntegratorControls& controls) {
  if (decomp.g != protocol.g0 || !(decomp.model == state.basis.model))
    throw ShapeError("echo spectrum must be taken at g0 of the same model");
  IntegratorControls c = controls;
  c.sample_interval = 0.0;
  const PureState final_state = evolve_exact(state, protocol, c).final_state;
  const PureState eig = expand_in_eigenbasis(final_state, decomp);
  const std::vector<double> e0 = [&] {
    std::vector<double> out = decomp.sector(Parity::even).energies;
    const auto& odd = decomp.sector(Parity::odd).energies;
    out.insert(out.end(), odd.begin(), odd.end());
    return out;
  }();
  ExactEcho out;
  out.dts = dts;
  out.hold = loschmidt_adiabatic(eig, e0, dts, EchoForm::hold).values;
  for (double dt : dts) {
    if (dt == 0.0) {
      out.stretched.push_back(1.0);
      continue;
    }
    const PureState other = evolve_exact(state, protocol.with_tau(protocol.tau + 0.5 * dt), c).final_state;
    complex s = 0.0;
    for (std::size_t i = 0; i < other.coefficients.size(); ++i)
      s += std::conj(other.coefficients[i]) * final_state.coefficients[i];
    out.stretched.push_back(std::abs(s) / (other.norm() * final_state.norm()));
  }
  return out;
}

double otoc_equal_time(const PureState& state, const ObservableMatrix& obs) {
  if (state.basis.kind != BasisKind::physical) throw ShapeError("equal-time OTOC needs a physical-basis state");
  const cvector once = obs.matrix.apply(state.coefficients);
  const cvector twice = obs.matrix.apply(once);
  double s = 0.0;
  for (const auto& z : twice) s += std::norm(z);
  const double n = state.norm();
  return s / (n * n);
}

complex otoc_adiabatic(const PureState& eigen_state, const std::vector<double>& flat_phases,
                       const EigenbasisObservable& obs) {
  require_eigen_fit(eigen_state, obs);
  if (flat_phases.size() != obs.dimension()) throw ShapeError("phase vector length mismatch");
  const std::size_t n = obs.dimension();
  cvector phase(n);
  for (std::size_t i = 0; i < n; ++i) phase[i] = std::polar(1.0, -flat_phases[i]);
  cvector a = eigen_state.coefficients, b;
  auto v = [&] {
    obs.apply(a, b);
    a.swap(b);
  };
  auto phi = [&](bool dagger) {
    for (std::size_t i = 0; i < n; ++i) a[i] *= dagger ? std::conj(phase[i]) : phase[i];
  };
  v();
  phi(false);
  v();
  phi(true);
  v();
  phi(false);
  v();
  phi(true);
  complex s = 0.0;
  double nrm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s += std::conj(eigen_state.coefficients[i]) * a[i];
    nrm += std::norm(eigen_state.coefficients[i]);
  }
  return s / nrm;
}

OtocSeries otoc_series(const PureState& eigen_state, const PhaseTable& phases,
                       const EigenbasisObservable& obs, const std::vector<double>& taus, double o0) {
  if (!(o0 > 0.0)) throw ModelError("OTOC normalisation must be positive");
  OtocSeries out;
  out.o0 = o0;
  for (double tau : taus) {
    OtocPoint p;
    p.tau = tau;
    p.value = otoc_adiabatic(eigen_state, phases.with_tau(tau).flat_phases(), obs);
    p.rescaled = std::abs(p.value) / o0;
    out.points.push_back(p);
  }
  return out;
}

double ks_uniform(std::vector<double> values) {
  if (values.empty()) throw ModelError("KS statistic of an empty sample");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double u = std::clamp(values[i], 0.0, 1.0);
    d = std::max({d, static_cast<double>(i + 1) / n - u, u - static_cast<double>(i) / n});
  }
  return d;
}

UniformityReport phase_uniformity(const std::vector<double>& delta_phi, std::size_t k_begin, std::size_t k_end,
                                  std::size_t bins) {
  if (k_end > delta_phi.size()) throw ModelError("phase range exceeds the table");
  if (k_begin >= k_end) throw ModelError("empty phase range");
  if (bins == 0) throw ModelError("histogram needs at least one bin");
  constexpr double two_pi = 2.0 * std::numbers::pi;
  UniformityReport r;
  std::vector<double> unit;
  std::vector<double> counts(bins, 0.0);
  for (std::size_t k = k_begin; k < k_end; ++k) {
    double x = std::fmod(delta_phi[k], two_pi);
    if (x < 0.0) x += two_pi;
    if (x >= two_pi) x = 0.0;
    r.sample.push_back(x);
    unit.push_back(x / two_pi);
    r.circle.emplace_back(std::cos(x), std::sin(x));
    counts[std::min(bins - 1, static_cast<std::size_t>(x / two_pi * static_cast<double>(bins)))] += 1.0;
  }
  r.ks = ks_uniform(unit);
  const double n = static_cast<double>(r.sample.size());
  for (std::size_t b = 0; b < bins; ++b) {
    r.histogram.support.push_back(two_pi * (static_cast<double>(b) + 0.5) / static_cast<double>(bins));
    r.histogram.probabilities.push_back(counts[b] / n);
  }
  return r;
}

std::vector<OrderParameterRow> order_parameter_curve(const MixedState& eigen_state,
                                                     const EigenbasisObservable& obs,
                                                     const std::vector<double>& g1_values,
                                                     const std::vector<double>& taus,
                                                     const QuadratureControls& quadrature, CycleSum form) {
  if (g1_values.empty() || taus.empty()) throw ModelError("order-parameter curve needs g1 and tau values");
  const double tau_max = *std::max_element(taus.begin(), taus.end());
  std::vector<OrderParameterRow> rows;
  for (double g1 : g1_values) {
    QuadratureControls q = quadrature;
    if (q.tau_max <= 0.0) q.tau_max = tau_max;
    const PhaseTable table = phase_table(obs.model(), {obs.g(), g1, tau_max}, q);
    const TauSweepSeries series = tau_sweep(eigen_state, table, obs, taus, form);
    OrderParameterRow row;
    row.g1 = g1;
    row.mean = series.mean;
    row.stddev = std::sqrt(series.variance);
    for (double v : series.values) row.mean_abs += std::abs(v);
    row.mean_abs /= static_cast<double>(series.values.size());
    row.nodes = table.nodes;
    rows.push_back(row);
  }
  return rows;
}

std::size_t populated_levels(const MixedState& eigen_state, const SpectralDecomposition& decomp, double cutoff) {
  std::size_t top = 0;
  for (const auto& m : eigen_state.members) {
    if (m.state.coefficients.size() != decomp.dimension()) throw ShapeError("eigenbasis dimension mismatch");
    for (Parity p : {Parity::even, Parity::odd})
      for (std::size_t k = 0; k < decomp.sector(p).size(); ++k)
        if (std::norm(m.state.coefficients[decomp.flat_index(p, k)]) > cutoff) top = std::max(top, k + 1);
  }
  return top;
}

}  // namespace aqis
