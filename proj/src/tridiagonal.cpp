#include "aqis/tridiagonal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>

#include "aqis/error.hpp"

namespace aqis {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

inline double pythag(double a, double b) {
  const double aa = std::abs(a), ab = std::abs(b);
  if (aa > ab) {
    const double r = ab / aa;
    return aa * std::sqrt(1.0 + r * r);
  }
  if (ab == 0.0) return 0.0;
  const double r = aa / ab;
  return ab * std::sqrt(1.0 + r * r);
}

// Implicit QL sweeps on (d, e). e has length n with e[n-1] == 0 on entry.
// When z is non-null it holds n column-major columns that receive the rotations.
void ql_implicit(std::vector<double>& d, std::vector<double>& e, double* z, int max_sweeps) {
  const std::size_t n = d.size();
  for (std::size_t l = 0; l < n; ++l) {
    int iter = 0;
    std::size_t m = l;
    do {
      for (m = l; m + 1 < n; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= kEps * dd) break;
      }
      if (m != l) {
        if (iter++ == max_sweeps)
          throw NumericError("tridiagonal QL did not converge (block size " + std::to_string(n) +
                             ", eigenvalue index " + std::to_string(l) + ")");
        // Wilkinson shift from the leading 2x2.
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = pythag(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0, c = 1.0, p = 0.0;
        bool underflow = false;
        std::size_t i = m;
        while (i-- > l) {
          const double f = s * e[i];
          const double b = c * e[i];
          r = pythag(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            underflow = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          if (z != nullptr) {
            double* zi = z + i * n;
            double* zi1 = z + (i + 1) * n;
            for (std::size_t k = 0; k < n; ++k) {
              const double t = zi1[k];
              zi1[k] = s * zi[k] + c * t;
              zi[k] = c * zi[k] - s * t;
            }
          }
        }
        if (underflow) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
}

// Gaussian elimination with partial pivoting for (T - lambda I), stored so that
// repeated solves cost O(n). Row i of U has entries u0[i] (diag), u1[i], u2[i].
struct ShiftedFactor {
  std::vector<double> u0, u1, u2, mult;
  std::vector<char> swapped;
  double tiny = 0.0;

  void factor(const SymTridiagonal& t, double lambda, double pivot_floor) {
    const std::size_t n = t.size();
    u0.assign(n, 0.0);
    u1.assign(n, 0.0);
    u2.assign(n, 0.0);
    mult.assign(n, 0.0);
    swapped.assign(n, 0);
    tiny = pivot_floor;
    if (n == 0) return;
    // Working row i: (a, b, c) at columns i, i+1, i+2.
    double a = t.diag[0] - lambda;
    double b = n > 1 ? t.off[0] : 0.0;
    double c = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double sub = t.off[i];
      const double nd = t.diag[i + 1] - lambda;
      const double nsup = (i + 2 < n) ? t.off[i + 1] : 0.0;
      if (std::abs(a) >= std::abs(sub)) {
        if (a == 0.0) a = tiny;
        const double l = sub / a;
        mult[i] = l;
        u0[i] = a;
        u1[i] = b;
        u2[i] = c;
        a = nd - l * b;
        b = nsup - l * c;
        c = 0.0;
      } else {
        const double l = a / sub;
        mult[i] = l;
        swapped[i] = 1;
        u0[i] = sub;
        u1[i] = nd;
        u2[i] = nsup;
        const double na = b - l * nd;
        const double nb = c - l * nsup;
        a = na;
        b = nb;
        c = 0.0;
      }
    }
    if (a == 0.0) a = tiny;
    u0[n - 1] = a;
  }

  // Solves in place; pivots smaller than tiny are replaced to avoid overflow.
  void solve(std::vector<double>& x) const {
    const std::size_t n = x.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (swapped[i]) {
        const double t = x[i];
        x[i] = x[i + 1];
        x[i + 1] = t - mult[i] * x[i];
      } else {
        x[i + 1] -= mult[i] * x[i];
      }
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double v = x[ii];
      if (ii + 1 < n) v -= u1[ii] * x[ii + 1];
      if (ii + 2 < n) v -= u2[ii] * x[ii + 2];
      double piv = u0[ii];
      if (std::abs(piv) < tiny) piv = std::copysign(tiny, piv == 0.0 ? 1.0 : piv);
      x[ii] = v / piv;
    }
  }
};

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Deterministic start vector in [-1, 1).
void start_vector(std::vector<double>& x, std::size_t seed) {
  std::uint64_t state = 0x9E3779B97F4A7C15ull ^ (seed * 0xBF58476D1CE4E5B9ull);
  for (double& v : x) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    z ^= z >> 31;
    v = static_cast<double>(z >> 11) * 0x1.0p-52 - 1.0;
  }
}

double residual(const SymTridiagonal& t, std::span<const double> v, double lambda,
                std::vector<double>& work) {
  work.resize(v.size());
  t.apply(v, work);
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double r = work[i] - lambda * v[i];
    s += r * r;
  }
  return std::sqrt(s);
}

}  // namespace

double SymTridiagonal::inf_norm() const {
  const std::size_t n = size();
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = std::abs(diag[i]);
    if (i > 0) r += std::abs(off[i - 1]);
    if (i + 1 < n) r += std::abs(off[i]);
    m = std::max(m, r);
  }
  return m;
}

void SymTridiagonal::apply(std::span<const double> x, std::span<double> y) const {
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) {
    double v = diag[i] * x[i];
    if (i > 0) v += off[i - 1] * x[i - 1];
    if (i + 1 < n) v += off[i] * x[i + 1];
    y[i] = v;
  }
}

std::vector<double> tridiagonal_eigenvalues(const SymTridiagonal& t, int max_sweeps) {
  std::vector<double> d = t.diag;
  std::vector<double> e(d.size(), 0.0);
  std::copy(t.off.begin(), t.off.end(), e.begin());
  ql_implicit(d, e, nullptr, max_sweeps);
  std::sort(d.begin(), d.end());
  return d;
}

std::vector<double> tridiagonal_eigenvalues_bracketed(const SymTridiagonal& t,
                                                      std::span<const double> lower,
                                                      std::span<const double> upper,
                                                      std::span<const double> guess) {
  const std::size_t n = t.size();
  const std::size_t wanted = lower.size();
  if (upper.size() != wanted || guess.size() != wanted || wanted > n)
    throw ShapeError("bracketed eigenvalues: one bracket per eigenvalue required");
  if (wanted == 0) return {};
  const double tnorm = std::max(t.inf_norm(), std::numeric_limits<double>::min());
  std::vector<double> e2(n, 0.0);
  double emax = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    e2[i] = t.off[i] * t.off[i];
    emax = std::max(emax, e2[i]);
  }
  const double pivmin = std::numeric_limits<double>::min() * std::max(1.0, emax) * 4.0;
  const double tol = 256.0 * kEps * tnorm;

  std::vector<double> x(guess.begin(), guess.end());
  std::vector<double> lo(lower.begin(), lower.end());
  std::vector<double> hi(upper.begin(), upper.end());
  for (std::size_t j = 0; j < wanted; ++j) {
    if (!(lo[j] <= hi[j])) throw NumericError("bracketed eigenvalues: empty bracket");
    if (!(x[j] > lo[j] && x[j] < hi[j])) x[j] = 0.5 * (lo[j] + hi[j]);
  }
  // Eigenvalues of T below x.
  auto sturm_count = [&](double xv) {
    std::size_t c = 0;
    double qq = t.diag[0] - xv;
    for (std::size_t i = 0;; ++i) {
      qq = std::abs(qq) < pivmin ? -pivmin : qq;
      c += qq < 0.0 ? 1 : 0;
      if (i + 1 == n) return c;
      qq = t.diag[i + 1] - xv - e2[i] / qq;
    }
  };
  std::vector<char> done(wanted, 0);
  std::vector<char> stage(wanted, 0);
  std::vector<char> lo_seen(wanted, 0), hi_seen(wanted, 0);
  std::vector<double> candidate = x;
  std::vector<std::size_t> active;
  std::vector<double> xa, q, dq, r, dsum, cnt;
  for (int iter = 0; iter < 200; ++iter) {
    active.clear();
    for (std::size_t j = 0; j < wanted; ++j)
      if (!done[j]) active.push_back(j);
    if (active.empty()) return x;
    const std::size_t m = active.size();
    xa.resize(m);
    q.resize(m);
    dq.resize(m);
    r.resize(m);
    dsum.resize(m);
    cnt.resize(m);
    for (std::size_t a = 0; a < m; ++a) xa[a] = x[active[a]];
    {
      const double d0 = t.diag[0];
      for (std::size_t a = 0; a < m; ++a) {
        double qq = d0 - xa[a];
        qq = std::abs(qq) < pivmin ? -pivmin : qq;
        q[a] = qq;
        dq[a] = -1.0;
        r[a] = 1.0 / qq;
        dsum[a] = -r[a];
        cnt[a] = qq < 0.0 ? 1.0 : 0.0;
      }
    }
    // Sturm recurrence with its x-derivative, vectorised across eigenvalues.
    for (std::size_t i = 1; i < n; ++i) {
      const double di = t.diag[i];
      const double ei = e2[i - 1];
      double* __restrict qp = q.data();
      double* __restrict dqp = dq.data();
      double* __restrict rp = r.data();
      double* __restrict sp = dsum.data();
      double* __restrict cp = cnt.data();
      const double* __restrict xp = xa.data();
      for (std::size_t a = 0; a < m; ++a) {
        const double tt = ei * rp[a];
        double qn = di - xp[a] - tt;
        const double dqn = -1.0 + tt * rp[a] * dqp[a];
        qn = std::abs(qn) < pivmin ? -pivmin : qn;
        const double rn = 1.0 / qn;
        sp[a] += dqn * rn;
        cp[a] += qn < 0.0 ? 1.0 : 0.0;
        qp[a] = qn;
        dqp[a] = dqn;
        rp[a] = rn;
      }
    }
    for (std::size_t a = 0; a < m; ++a) {
      const std::size_t j = active[a];
      const double xj = xa[a];
      const bool below = cnt[a] <= static_cast<double>(j);
      if (below) {
        if (xj >= lo[j]) lo_seen[j] = 1;
        lo[j] = std::max(lo[j], xj);
      } else {
        if (xj <= hi[j]) hi_seen[j] = 1;
        hi[j] = std::min(hi[j], xj);
      }
      if (hi[j] - lo[j] <= 2.5 * tol) {
        if ((!lo_seen[j] && sturm_count(lo[j]) > j) || (!hi_seen[j] && sturm_count(hi[j]) <= j))
          throw NumericError("bracketed eigenvalues: eigenvalue " + std::to_string(j) + " lies outside its bracket");
        x[j] = std::clamp(candidate[j], lo[j], hi[j]);
        done[j] = 1;
        continue;
      }
      // A converged Newton iterate is accepted only once Sturm counts at
      // candidate -/+ tol confirm it is root j.
      if (stage[j] == 1) {
        if (!below) {
          stage[j] = 2;
          x[j] = candidate[j] - tol;
          continue;
        }
        stage[j] = 0;
      } else if (stage[j] == 2) {
        stage[j] = 0;
        if (below) {
          x[j] = candidate[j];
          done[j] = 1;
          continue;
        }
      }
      const double step = std::isfinite(dsum[a]) && dsum[a] != 0.0 ? -1.0 / dsum[a] : 0.0;
      const double xn = xj + step;
      if (std::isfinite(dsum[a]) && std::abs(step) <= tol) {
        candidate[j] = std::clamp(xn, lo[j], hi[j]);
        stage[j] = 1;
        x[j] = std::min(candidate[j] + tol, hi[j]);
      } else if (step != 0.0 && xn > lo[j] && xn < hi[j]) {
        x[j] = xn;
      } else {
        x[j] = 0.5 * (lo[j] + hi[j]);
        candidate[j] = x[j];
      }
    }
  }
  throw NumericError("bracketed eigenvalue iteration did not converge (block size " + std::to_string(n) + ")");
}

TridiagonalEigen tridiagonal_eigensystem_ql(const SymTridiagonal& t, int max_sweeps) {
  const std::size_t n = t.size();
  std::vector<double> d = t.diag;
  std::vector<double> e(n, 0.0);
  std::copy(t.off.begin(), t.off.end(), e.begin());
  std::vector<double> z(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) z[i * n + i] = 1.0;
  ql_implicit(d, e, z.data(), max_sweeps);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
  TridiagonalEigen out;
  out.n = n;
  out.values.resize(n);
  out.vectors.resize(n * n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = d[order[k]];
    std::copy_n(z.begin() + order[k] * n, n, out.vectors.begin() + k * n);
  }
  return out;
}

std::vector<double> inverse_iteration(const SymTridiagonal& t, std::span<const double> values,
                                      double cluster_tolerance) {
  const std::size_t n = t.size();
  const std::size_t count = values.size();
  std::vector<double> vectors(n * count, 0.0);
  if (n == 0) return vectors;
  const double tnorm = std::max(t.inf_norm(), std::numeric_limits<double>::min());
  const double cluster_gap = cluster_tolerance * tnorm;
  const double pivot_floor = kEps * tnorm;
  const double target = 1e-13 * tnorm + 8.0 * kEps * tnorm * std::sqrt(static_cast<double>(n));

  ShiftedFactor lu;
  std::vector<double> x(n), work(n);
  std::size_t cluster_begin = 0;
  double previous_shift = 0.0;
  for (std::size_t j = 0; j < count; ++j) {
    double shift = values[j];
    if (j > 0 && shift - values[j - 1] > cluster_gap) cluster_begin = j;
    // Separate numerically coincident shifts so the iterations stay distinct.
    if (j > cluster_begin && shift <= previous_shift + 10.0 * kEps * tnorm)
      shift = previous_shift + 10.0 * kEps * tnorm;
    previous_shift = shift;

    lu.factor(t, shift, pivot_floor);
    start_vector(x, j);
    double* out = vectors.data() + j * n;
    bool converged = false;
    for (int it = 0; it < 12; ++it) {
      lu.solve(x);
      for (std::size_t c = cluster_begin; c < j; ++c) {
        const double* vc = vectors.data() + c * n;
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += vc[i] * x[i];
        for (std::size_t i = 0; i < n; ++i) x[i] -= dot * vc[i];
      }
      const double nrm = norm2(x);
      if (!(nrm > 0.0) || !std::isfinite(nrm)) {
        start_vector(x, j + 7919 * (it + 1));
        continue;
      }
      for (double& v : x) v /= nrm;
      if (it >= 1 && residual(t, x, values[j], work) <= target) {
        converged = true;
        break;
      }
    }
    std::copy(x.begin(), x.end(), out);
    if (!converged && residual(t, x, values[j], work) > 1e-10 * tnorm)
      throw NumericError("inverse iteration did not converge (block size " + std::to_string(n) +
                         ", eigenvalue index " + std::to_string(j) + ")");
  }
  return vectors;
}

double max_relative_residual(const SymTridiagonal& t, const TridiagonalEigen& eig) {
  const double tnorm = std::max(t.inf_norm(), std::numeric_limits<double>::min());
  std::vector<double> work;
  double worst = 0.0;
  for (std::size_t k = 0; k < eig.values.size(); ++k)
    worst = std::max(worst, residual(t, eig.vector(k), eig.values[k], work) / tnorm);
  return worst;
}

double max_orthogonality_error(const TridiagonalEigen& eig) {
  const std::size_t n = eig.n;
  const std::size_t count = eig.values.size();
  double worst = 0.0;
  for (std::size_t a = 0; a < count; ++a) {
    const auto va = eig.vector(a);
    for (std::size_t b = a; b < count; ++b) {
      const auto vb = eig.vector(b);
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += va[i] * vb[i];
      worst = std::max(worst, std::abs(dot - (a == b ? 1.0 : 0.0)));
    }
  }
  return worst;
}

namespace {

// Orthogonality among near neighbours only; O(n^2 * window).
double neighbour_orthogonality_error(const TridiagonalEigen& eig, std::size_t window) {
  const std::size_t n = eig.n;
  const std::size_t count = eig.values.size();
  double worst = 0.0;
  for (std::size_t a = 0; a < count; ++a) {
    const auto va = eig.vector(a);
    for (std::size_t b = a + 1; b < std::min(count, a + 1 + window); ++b) {
      const auto vb = eig.vector(b);
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += va[i] * vb[i];
      worst = std::max(worst, std::abs(dot));
    }
  }
  return worst;
}

}  // namespace

TridiagonalEigen eigensolve_tridiagonal(const SymTridiagonal& t, bool want_vectors) {
  const std::size_t n = t.size();
  if (t.off.size() + 1 != n && !(n == 0 && t.off.empty()))
    throw ShapeError("tridiagonal: off-diagonal length must be n-1");
  TridiagonalEigen out;
  out.n = n;
  if (!want_vectors) {
    out.values = tridiagonal_eigenvalues(t);
    return out;
  }
  if (n <= 48) {
    out = tridiagonal_eigensystem_ql(t);
    return out;
  }
  out.values = tridiagonal_eigenvalues(t);
  out.vectors = inverse_iteration(t, out.values);
  if (max_relative_residual(t, out) > 1e-11 || neighbour_orthogonality_error(out, 4) > 1e-11)
    out = tridiagonal_eigensystem_ql(t);
  return out;
}

}  // namespace aqis
