#pragma once

// Module invariants as measurable properties. Each property returns the worst
// observed value, compared against its bound by the caller.

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oscil/oscil.hpp"
#include "support/quad_oracle.hpp"

namespace oscil::props {

struct Property {
  std::string module;
  std::string name;
  double bound = 0.0;
  bool at_least = false;  // pass when value >= bound instead of <= bound
  std::function<double()> measure;

  [[nodiscard]] bool passes(double value) const { return at_least ? value >= bound : value <= bound; }
};

// ---------------------------------------------------------------------------
// Fixtures

inline DenseMatrix random_matrix(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  DenseMatrix m(n, n);
  for (double& x : m.data()) x = dist(rng);
  return m;
}

inline Vector random_vector(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Vector v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

/// Random orthogonal matrix from Gram-Schmidt on a random matrix.
inline DenseMatrix random_orthogonal(std::mt19937_64& rng, std::size_t n) {
  DenseMatrix a = random_matrix(rng, n);
  for (std::size_t j = 0; j < n; ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t l = 0; l < j; ++l) {
        double d = 0.0;
        for (std::size_t i = 0; i < n; ++i) d += a(i, j) * a(i, l);
        for (std::size_t i = 0; i < n; ++i) a(i, j) -= d * a(i, l);
      }
    }
    double nrm = 0.0;
    for (std::size_t i = 0; i < n; ++i) nrm += a(i, j) * a(i, j);
    nrm = std::sqrt(nrm);
    for (std::size_t i = 0; i < n; ++i) a(i, j) /= nrm;
  }
  return a;
}

/// Q diag(lambda) Q^T
inline DenseMatrix with_spectrum(const DenseMatrix& q, std::span<const double> lambda) {
  return q * DenseMatrix::diagonal(lambda) * q.transposed();
}

/// q'' = -B^2 q in scaled first-order form, with ||B|| = omega.
struct LinearOscillator {
  DenseMatrix B;
  HamiltonianSystem sys;
};

inline LinearOscillator linear_oscillator(std::size_t m, double omega, unsigned seed = 7) {
  std::mt19937_64 rng(seed);
  Vector lambda(m);
  for (std::size_t i = 0; i < m; ++i) lambda[i] = omega * (0.2 + 0.8 * static_cast<double>(i + 1) / static_cast<double>(m));
  LinearOscillator lo;
  lo.B = with_spectrum(random_orthogonal(rng, m), lambda);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < i; ++j) lo.B(i, j) = lo.B(j, i);
  lo.sys.half_dim = m;
  lo.sys.A = kron(DenseMatrix::identity(2), lo.B);
  lo.sys.hamiltonian = [a = lo.sys.A](std::span<const double> y) {
    const Vector ay = a * y;
    double h = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) h += 0.5 * y[i] * ay[i];
    return h;
  };
  lo.sys.omega = omega;
  return lo;
}

/// exp(t J (I (x) B)) y0 = (cos(tB) q + sin(tB) p, -sin(tB) q + cos(tB) p).
inline Vector rotation(const DenseMatrix& b, std::span<const double> y0, double t) {
  const std::size_t m = b.rows();
  const SymEig eig = sym_eig(b);
  const DenseMatrix c = eig.apply_function([t](double l) { return std::cos(t * l); });
  const DenseMatrix s = eig.apply_function([t](double l) { return std::sin(t * l); });
  const Vector cq = c * y0.first(m), sp = s * y0.subspan(m, m);
  const Vector sq = s * y0.first(m), cp = c * y0.subspan(m, m);
  Vector y(2 * m);
  for (std::size_t i = 0; i < m; ++i) {
    y[i] = cq[i] + sp[i];
    y[m + i] = cp[i] - sq[i];
  }
  return y;
}

inline double rel_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d / std::max(norm_inf(b), std::numeric_limits<double>::min());
}

struct RunErrors {
  double e_q = 0.0;
  double e_H = 0.0;
};

/// HBVM(k,s) on a closed-form problem, errors against the exact solution.
inline RunErrors hbvm_errors(const ProblemInstance& p, std::size_t s, std::size_t k, std::size_t N,
                             double t_end = 0.0) {
  const double T = t_end > 0.0 ? t_end : p.t_end;
  const double h = T / static_cast<double>(N);
  ErrorAccumulator acc(p.sys.half_dim);
  integrate_observed(p.sys, p.y0, h, N, fixed_params(s, k, p.sys.omega * h), [&](std::size_t n, std::span<const double> y) {
    acc.add_energy(p.sys.hamiltonian(y));
    acc.add_state(y, p.exact(static_cast<double>(n) * h));
  });
  return {acc.summary().e_q, acc.summary().e_H};
}

/// max |rate - expected| over consecutive dyadic refinements.
inline double worst_rate_deviation(const std::vector<double>& errors, double expected) {
  double worst = 0.0;
  for (std::size_t i = 1; i < errors.size(); ++i)
    worst = std::max(worst, std::abs(std::log2(errors[i - 1] / errors[i]) - expected));
  return worst;
}

inline ProblemInstance mild_duffing() { return duffing_instance(0.07, 5.0); }

// ---------------------------------------------------------------------------
// linalg

inline double lu_round_trip_worst() {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int c = 0; c < 50; ++c) {
    const std::size_t n = 1 + static_cast<std::size_t>(c) % 32;
    DenseMatrix m = random_matrix(rng, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) += static_cast<double>(n);  // diagonally dominant
    const Vector x = random_vector(rng, n);
    const Vector b = m * std::span<const double>(x);
    const Vector y = lu_solve(lu_factor(m), b);
    worst = std::max(worst, rel_diff(y, x));
  }
  return worst;
}

inline double sym_eig_worst() {
  std::mt19937_64 rng(11);
  std::vector<DenseMatrix> cases;
  cases.push_back(fpu_default().A * fpu_default().A);
  for (std::size_t n : {2u, 5u, 9u, 16u}) {
    DenseMatrix a = random_matrix(rng, n);
    cases.push_back(a + a.transposed());
  }
  double worst = 0.0;
  for (const DenseMatrix& a : cases) {
    const SymEig e = sym_eig(a);
    const DenseMatrix recon = with_spectrum(e.eigenvectors, e.eigenvalues);
    worst = std::max(worst, max_abs_entry(recon - a) / max_abs_entry(a));
    const DenseMatrix qtq = e.eigenvectors.transposed() * e.eigenvectors;
    worst = std::max(worst, max_abs_entry(qtq - DenseMatrix::identity(a.rows())));
    for (std::size_t i = 1; i < e.eigenvalues.size(); ++i)
      if (e.eigenvalues[i] < e.eigenvalues[i - 1]) return 1.0;
  }
  return worst;
}

inline double kron_apply_worst() {
  std::mt19937_64 rng(5);
  double worst = 0.0;
  for (std::size_t s = 1; s <= 6; ++s) {
    for (std::size_t n = 1; n <= 8; ++n) {
      const DenseMatrix m = random_matrix(rng, s);
      const Vector v = random_vector(rng, s * n);
      const Vector fast = kron_apply(m, v);
      const Vector slow = kron(m, DenseMatrix::identity(n)) * std::span<const double>(v);
      for (std::size_t i = 0; i < fast.size(); ++i) worst = std::max(worst, std::abs(fast[i] - slow[i]));
    }
  }
  return worst;
}

inline double spectral_norm_worst() {
  std::mt19937_64 rng(17);
  double worst = 0.0;
  for (std::size_t n : {1u, 3u, 6u, 12u}) {
    const Vector lambda = random_vector(rng, n, 0.5, 10.0);
    const DenseMatrix a = with_spectrum(random_orthogonal(rng, n), lambda);
    const double expected = *std::max_element(lambda.begin(), lambda.end());
    worst = std::max(worst, std::abs(spectral_norm(a) - expected) / expected);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// polybasis

inline double orthonormality_worst() {
  const QuadratureRule rule = gauss_rule(40);
  DenseMatrix gram(20, 20);
  for (std::size_t i = 0; i < rule.k; ++i) {
    const Vector p = legendre_all(20, rule.nodes[i]);
    for (std::size_t a = 0; a < 20; ++a)
      for (std::size_t b = 0; b < 20; ++b) gram(a, b) += rule.weights[i] * p[a] * p[b];
  }
  return max_abs_entry(gram - DenseMatrix::identity(20));
}

/// Worst relative monomial error for j <= 2k-1, k = 1..64.
inline double quadrature_exactness_worst() {
  double worst = 0.0;
  for (std::size_t k = 1; k <= 64; ++k) {
    const QuadratureRule rule = gauss_rule(k);
    for (std::size_t j = 0; j < 2 * k; ++j) {
      double q = 0.0;
      for (std::size_t i = 0; i < k; ++i) q += rule.weights[i] * std::pow(rule.nodes[i], static_cast<double>(j));
      const double exact = 1.0 / static_cast<double>(j + 1);
      worst = std::max(worst, std::abs(q - exact) / exact);
    }
  }
  return worst;
}

/// The x^{2k} error equals the Gauss error constant (k!)^4 / ((2k+1) ((2k)!)^2);
/// worst relative mismatch over the k where that constant is above 1e-10.
inline double quadrature_first_failure_worst() {
  double worst = 0.0;
  for (std::size_t k = 1; k <= 64; ++k) {
    const double kd = static_cast<double>(k);
    const double log_c = 4.0 * std::lgamma(kd + 1.0) - std::log(2.0 * kd + 1.0) - 2.0 * std::lgamma(2.0 * kd + 1.0);
    const double expected = std::exp(log_c);
    if (expected < 1e-10) break;
    const QuadratureRule rule = gauss_rule(k);
    double q = 0.0;
    for (std::size_t i = 0; i < k; ++i) q += rule.weights[i] * std::pow(rule.nodes[i], 2.0 * kd);
    const double err = 1.0 / (2.0 * kd + 1.0) - q;
    worst = std::max(worst, std::abs(err - expected) / expected);
  }
  return worst;
}

inline double legendre_integral_worst() {
  const QuadratureRule rule = gauss_rule(40);
  double worst = 0.0;
  for (int ci = 1; ci <= 9; ++ci) {
    const double c = 0.1 * ci;
    Vector quad(60, 0.0);
    for (int panel = 0; panel < 10; ++panel) {
      const double a = c * panel / 10.0, w = c / 10.0;
      for (std::size_t i = 0; i < rule.k; ++i) {
        const Vector p = legendre_all(60, a + w * rule.nodes[i]);
        for (std::size_t j = 0; j < 60; ++j) quad[j] += w * rule.weights[i] * p[j];
      }
    }
    const Vector ints = legendre_int_all(60, c);
    for (std::size_t j = 0; j < 60; ++j) worst = std::max(worst, std::abs(ints[j] - quad[j]));
  }
  return worst;
}

inline double legendre_symmetry_worst() {
  double worst = 0.0;
  for (int ci = 0; ci <= 20; ++ci) {
    const double c = ci / 20.0;
    const Vector a = legendre_all(60, c), b = legendre_all(60, 1.0 - c);
    for (std::size_t j = 0; j < 60; ++j) {
      const double sign = j % 2 == 0 ? 1.0 : -1.0;
      worst = std::max(worst, std::abs(b[j] - sign * a[j]) / std::sqrt(2.0 * j + 1.0));
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// truncation

/// Worst violation of the recurrence j_{s-1} + j_{s+1} = (2s+1)/x j_s,
/// relative to the largest term.
inline double bessel_recurrence_worst() {
  double worst = 0.0;
  for (double x : {1.0, 10.0, 50.0}) {
    const Vector j = spherical_bessel_j(51, x);
    for (std::size_t s = 1; s <= 50; ++s) {
      const double rhs = (2.0 * s + 1.0) / x * j[s];
      const double scale = std::max({std::abs(j[s - 1]), std::abs(j[s + 1]), std::abs(rhs)});
      if (scale < 1e-300) continue;
      worst = std::max(worst, std::abs(j[s - 1] + j[s + 1] - rhs) / scale);
    }
  }
  return worst;
}

/// Count of grid points violating the Lemma-2 monotonicity statements.
inline double bessel_monotonicity_violations() {
  double violations = 0.0;
  for (double x : {1.0, 5.0, 10.0, 25.0}) {
    const auto first = static_cast<std::size_t>(std::ceil(std::numbers::e * x / 4.0)) + 2;
    for (std::size_t s = first; s < 100; ++s) {
      if (!(g_bound(s + 1, x) < g_bound(s, x)) && g_bound(s, x) > 1e-300) violations += 1.0;
      const double x2 = x * 1.01;
      if (2.0 * (2.0 * s + 1.0) > std::numbers::e * x2 && !(g_bound(s, x2) > g_bound(s, x)) && g_bound(s, x) > 1e-300)
        violations += 1.0;
    }
  }
  return violations;
}

/// g(s, x) against j_s(x/2) = (1/2) int_{-1}^{1} cos(x t/2 - s pi/2) P_s(t) dt,
/// with the combined tolerance |diff| <= 1e-10 g + 1e-14 expressed as a ratio.
inline double g_bound_independent_worst() {
  const QuadratureRule rule = gauss_rule(200);
  double worst = 0.0;
  for (double x : {0.5, 1.0, 5.0, 10.0, 25.0, 50.0, 80.0, 120.0}) {
    for (std::size_t s = 0; s <= 40; ++s) {
      double j = 0.0;
      for (std::size_t i = 0; i < rule.k; ++i) {
        const double t = 2.0 * rule.nodes[i] - 1.0;
        // standard Legendre P_s(t) = shifted orthonormal / sqrt(2s+1)
        const double ps = legendre_all(s + 1, rule.nodes[i])[s] / std::sqrt(2.0 * s + 1.0);
        j += rule.weights[i] * std::cos(0.5 * x * t - 0.5 * static_cast<double>(s) * std::numbers::pi) * ps;
      }
      const double g_ref = std::sqrt(2.0 * s + 1.0) * std::abs(j);
      const double g = g_bound(s, x);
      worst = std::max(worst, std::abs(g - g_ref) / (1e-10 * g + 1e-14));
    }
  }
  return worst;
}

inline double phi_u_asymptote_worst() {
  double worst = 0.0;
  for (double x : {50.0, 75.0, 100.0})
    worst = std::max(worst, std::abs(static_cast<double>(phi_u(x, kDoubleEpsilon)) - (24.0 + 0.7 * x)));
  return worst;
}

inline double phi_u_monotone_violations() {
  const double grid[] = {0.1, 0.5, 1, 5, 10, 25, 50, 75, 100};
  double violations = 0.0;
  for (double u : {kDoubleEpsilon, kUnitRoundoff})
    for (std::size_t i = 1; i < std::size(grid); ++i)
      if (phi_u(grid[i], u) < phi_u(grid[i - 1], u)) violations += 1.0;
  return violations;
}

/// cos^2 + sin^2 integrals (64-point Gauss, quadruple precision) against
/// g^2, relative, where g > 1e-12.
inline double parseval_worst() {
  double worst = 0.0;
  for (double x : {1.0, 5.0, 10.0}) {
    for (std::size_t s = 0; s <= 10; ++s) {
      const double g = g_bound(s, x);
      if (g <= 1e-12) continue;
      worst = std::max(worst, std::abs(legendre_fourier_square_sum_q(s, x) - g * g) / (g * g));
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// hbvm

inline double lemma_identity_worst() {
  double worst = 0.0;
  for (std::size_t s = 1; s <= 50; ++s) {
    for (std::size_t k : {s, s + 2, 2 * s, std::max<std::size_t>(20, s + 2)}) {
      const QuadratureRule rule = gauss_rule(k);
      DenseMatrix pso(s, k), is(k, s);
      for (std::size_t i = 0; i < k; ++i) {
        const Vector p = legendre_all(s, rule.nodes[i]);
        const Vector q = legendre_int_all(s, rule.nodes[i]);
        for (std::size_t j = 0; j < s; ++j) {
          pso(j, i) = rule.weights[i] * p[j];
          is(i, j) = q[j];
        }
      }
      worst = std::max(worst, max_abs_entry(pso * is - xs_closed_form(s)));
    }
  }
  return worst;
}

/// HBVM(2s,s) order on mild Duffing, worst |rate - 2s| for s = 1, 2, 3.
inline double hbvm_order_worst() {
  const ProblemInstance p = mild_duffing();
  const std::vector<std::vector<std::size_t>> grids = {{800, 1600, 3200, 6400}, {400, 800, 1600, 3200}, {200, 400, 800, 1600}};
  double worst = 0.0;
  for (std::size_t s = 1; s <= 3; ++s) {
    std::vector<double> errs;
    for (std::size_t n : grids[s - 1]) errs.push_back(hbvm_errors(p, s, 2 * s, n).e_q);
    worst = std::max(worst, worst_rate_deviation(errs, 2.0 * s));
  }
  return worst;
}

/// Relative drift of HBVM(4,2) on Duffing over 100 steps with h = 0.05.
inline double hbvm_energy_drift() { return hbvm_errors(mild_duffing(), 2, 4, 100, 5.0).e_H; }

/// Same run with Gauss HBVM(2,2), expected to drift visibly.
inline double gauss_energy_drift() { return hbvm_errors(mild_duffing(), 2, 2, 100, 5.0).e_H; }

/// SHBVM with s = phi_u(omega h) on a linear oscillator, N steps against the
/// exact rotation; worst over omega h in {1, 5, 10}.
inline double shbvm_linear_exactness_worst() {
  const LinearOscillator lo = linear_oscillator(3, 50.0);
  const Vector y0 = {1.0, -0.5, 0.25, 0.3, 0.0, -1.0};
  double worst = 0.0;
  for (double wh : {1.0, 5.0, 10.0}) {
    const double h = wh / lo.sys.omega;
    const std::size_t N = 20;
    const SpectralParams params = select_params(lo.sys.omega, h, 1.0);
    integrate_observed(lo.sys, y0, h, N, params, [&](std::size_t n, std::span<const double> y) {
      worst = std::max(worst, rel_diff(y, rotation(lo.B, y0, static_cast<double>(n) * h)));
    });
  }
  return worst;
}

/// Step h then -h on Duffing (kappa 7, beta 500), relative return error.
inline double time_symmetry_worst() {
  const ProblemInstance p = duffing_instance();
  const double h = 0.02;
  const SpectralParams params = select_params(p.sys.omega, h, p.sys.nu);
  const ShbvmSolver fwd(p.sys, h, params), bwd(p.sys, -h, params);
  Vector y = p.y0;
  double worst = 0.0;
  for (int n = 0; n < 20; ++n) {
    const Vector y1 = fwd.step(y).y1;
    const Vector back = bwd.step(y1).y1;
    worst = std::max(worst, rel_diff(back, y));
    y = y1;
  }
  return worst;
}

/// |G(psi*)| / tol at the converged step, Duffing and FPU.
inline double fixed_point_ratio() {
  double worst = 0.0;
  for (const ProblemInstance& p : {duffing_instance(), fpu_instance()}) {
    const double h = p.t_end / 1000.0;
    const SpectralParams params = select_params(p.sys.omega, h, p.sys.nu);
    const ShbvmSolver solver(p.sys, h, params);
    Vector y = p.y0;
    for (int n = 0; n < 5; ++n) {
      const StepResult r = solver.step(y);
      const Vector g = residual_G(r.psi, y, h, p.sys, solver.coefficients());
      worst = std::max(worst, norm_inf(g) / (solver.workspace().tol * std::max(1.0, norm_inf(r.psi))));
      y = r.y1;
    }
  }
  return worst;
}

/// dense_output at c = 0, 1 and at the nodes against y0, y1 and the stages.
inline double dense_output_worst() {
  const ProblemInstance p = duffing_instance();
  const double h = 0.02;
  const SpectralParams params = select_params(p.sys.omega, h, p.sys.nu);
  const ShbvmSolver solver(p.sys, h, params);
  const StepResult r = solver.step(p.y0);
  const CoefficientSet& cs = solver.coefficients();
  double worst = rel_diff(dense_output(r.psi, p.y0, h, 0.0, cs), p.y0);
  worst = std::max(worst, rel_diff(dense_output(r.psi, p.y0, h, 1.0, cs), r.y1));
  const std::size_t n = p.sys.dim();
  Vector stages(cs.k() * n);
  stage_values(r.psi, p.y0, h, cs, stages);
  for (std::size_t i = 0; i < cs.k(); ++i) {
    const Vector yi = dense_output(r.psi, p.y0, h, cs.quad.nodes[i], cs);
    worst = std::max(worst, rel_diff(yi, std::span<const double>(stages).subspan(i * n, n)));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// problems

/// Analytic gradients against central differences at 20 random states.
inline double gradient_fd_worst() {
  std::mt19937_64 rng(99);
  double worst = 0.0;
  const auto check = [&](const ScalarFn& f, const GradientFn& grad, std::size_t n, double scale) {
    for (int c = 0; c < 20; ++c) {
      const Vector x = random_vector(rng, n, -scale, scale);
      Vector g(n);
      grad(x, g);
      for (std::size_t i = 0; i < n; ++i) {
        const double step = 1e-6 * std::max(1.0, std::abs(x[i]));
        Vector xp = x, xm = x;
        xp[i] += step;
        xm[i] -= step;
        const double fd = (f(xp) - f(xm)) / (2.0 * step);
        worst = std::max(worst, std::abs(fd - g[i]) / std::max(1.0, std::abs(g[i])));
      }
    }
  };
  const SecondOrderProblem duf = duffing(7.0, 500.0);
  check(duf.f, duf.grad_f, 1, 1.0);
  const SecondOrderProblem f = fpu_default();
  check(f.f, f.grad_f, f.m, 0.5);
  // NLS: H - y^T A y / 2 is the nonlinear part f
  const HamiltonianSystem sys = nls(4, 0.7);
  const ScalarFn fnl = [&sys](std::span<const double> y) {
    const Vector ay = sys.A * y;
    double q = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) q += 0.5 * y[i] * ay[i];
    return sys.hamiltonian(y) - q;
  };
  check(fnl, sys.grad_f, sys.dim(), 1.0);
  return worst;
}

/// Observed slope of |H(y + eps f(y)) - H(y)| against eps; 2 means dH/dt = 0.
inline double hamiltonian_slope_deviation() {
  double worst = 0.0;
  std::mt19937_64 rng(3);
  for (const ProblemInstance& p : {duffing_instance(), fpu_instance(), nls_instance(3, 0.5)}) {
    Vector y = p.y0;
    const Vector pert = random_vector(rng, y.size(), -0.1, 0.1);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += pert[i] * std::max(1.0, std::abs(y[i]));
    const Vector f = p.sys.vector_field(y);
    const double fn = norm_inf(f);
    const double h0 = p.sys.hamiltonian(y);
    std::vector<double> d;
    for (double eps : {1e-3, 5e-4, 2.5e-4}) {
      Vector z = y;
      for (std::size_t i = 0; i < z.size(); ++i) z[i] += eps / fn * f[i];
      d.push_back(std::abs(p.sys.hamiltonian(z) - h0));
    }
    worst = std::max(worst, worst_rate_deviation(d, 2.0));
  }
  return worst;
}

/// Shifted first-order vector field against the unshifted second-order one.
inline double zero_shift_worst() {
  std::mt19937_64 rng(21);
  const SecondOrderProblem p2 = fpu_default();
  const HamiltonianSystem sys = to_first_order(p2);
  const Vector w = fpu_default_frequencies();
  double worst = 0.0;
  for (int c = 0; c < 20; ++c) {
    const Vector q = random_vector(rng, p2.m, -0.5, 0.5);
    const Vector v = random_vector(rng, p2.m, -0.5, 0.5);
    // original: q'' = -S q - grad quartic, S the unshifted stiffness
    Vector acc(p2.m, 0.0);
    fpu_quartic_gradient(q, acc);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double stretch = q[2 * i + 1] - q[2 * i];
      acc[2 * i] -= w[i] * w[i] * stretch;
      acc[2 * i + 1] += w[i] * w[i] * stretch;
    }
    for (double& a : acc) a = -a;
    // shifted: y = (q, A^{-1} v), y' = J [A y + grad f], so q'' = A p'
    const Vector y = to_scaled_state(p2.A, q, v);
    const Vector f = sys.vector_field(y);
    const Vector qdd = p2.A * std::span<const double>(f).subspan(p2.m, p2.m);
    worst = std::max(worst, rel_diff(qdd, acc));
    worst = std::max(worst, rel_diff(std::span<const double>(f).first(p2.m), v));
  }
  const HamiltonianSystem s = nls(5, 0.8);
  const std::size_t d = s.half_dim;
  for (int c = 0; c < 20; ++c) {
    const Vector y = random_vector(rng, s.dim());
    const Vector f = s.vector_field(y);
    // unshifted linear part D^2 has a zero in position 0 of each half
    Vector g(s.dim());
    s.grad_f(y, g);
    Vector ref(s.dim());
    for (std::size_t i = 0; i < s.dim(); ++i) {
      const std::size_t j = (i % d + 1) / 2;
      ref[i] = static_cast<double>(j * j) * y[i] + g[i] + (i % d == 0 ? y[i] : 0.0);
    }
    apply_J(ref);
    worst = std::max(worst, rel_diff(f, ref));
  }
  return worst;
}

/// Variation of |y(t)| and H(y(t)) along the exact plane wave.
inline double nls_invariant_worst() {
  const HamiltonianSystem s = nls(20, std::numbers::pi / 10.0);
  const double h0 = s.hamiltonian(nls_exact(0.0, 20, std::numbers::pi / 10.0));
  double worst = 0.0;
  for (double t : {0.0, 0.3, 1.1, 2.5, 5.0}) {
    const Vector y = nls_exact(t, 20, std::numbers::pi / 10.0);
    worst = std::max(worst, std::abs(norm_2(y) - std::sqrt(2.0 * std::numbers::pi)) / std::sqrt(2.0 * std::numbers::pi));
    worst = std::max(worst, std::abs(s.hamiltonian(y) - h0) / std::abs(h0));
  }
  return worst;
}

/// sn^2 + cn^2 = 1 and dn^2 + M sn^2 = 1.
inline double elliptic_identity_worst() {
  double worst = 0.0;
  for (double m : {0.0, 49.0 / 250000.0, 0.3, 0.9}) {
    for (int i = 0; i <= 200; ++i) {
      const double u = 0.1 * i;
      const EllipticTriple e = jacobi_elliptic(u, m);
      worst = std::max(worst, std::abs(e.sn * e.sn + e.cn * e.cn - 1.0));
      worst = std::max(worst, std::abs(e.dn * e.dn + m * e.sn * e.sn - 1.0));
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// baselines

/// Trigonometric steps with grad f = 0 against the exact rotation, omega h <= 100.
inline double trig_linear_exactness_worst() {
  const LinearOscillator lo = linear_oscillator(4, 30.0);
  SecondOrderProblem p2;
  p2.m = 4;
  p2.A = lo.B;
  const Vector q = {1.0, -0.3, 0.2, 0.7}, v = {0.0, 5.0, -2.0, 1.0};
  double worst = 0.0;
  for (double wh : {0.01, 1.0, 7.3, 50.0, 100.0}) {
    const double h = wh / 30.0;
    const TrigKernel kernel(h, p2.A);
    const Vector y0 = to_scaled_state(p2.A, q, v);
    const auto [qe, ve] = from_scaled_state(p2.A, rotation(lo.B, y0, h));
    Vector exact = qe;
    exact.insert(exact.end(), ve.begin(), ve.end());
    for (const State2& r : {gautschi_step(q, v, h, p2, kernel), deuflhard_step(q, v, h, p2, kernel)}) {
      Vector got = r.first;
      got.insert(got.end(), r.second.begin(), r.second.end());
      worst = std::max(worst, rel_diff(got, exact));
    }
  }
  return worst;
}

/// |det - 1| of the linear Stormer-Verlet map.
inline double sv_determinant_deviation() {
  double worst = 0.0;
  for (double a : {0.5, 1.0, 3.0}) {
    for (double h : {0.01, 0.1, 0.5}) {
      SecondOrderProblem p2;
      p2.m = 1;
      p2.A = DenseMatrix{{a}};
      const State2 e1 = stormer_verlet_step(Vector{1.0}, Vector{0.0}, h, p2);
      const State2 e2 = stormer_verlet_step(Vector{0.0}, Vector{1.0}, h, p2);
      const double det = e1.first[0] * e2.second[0] - e2.first[0] * e1.second[0];
      worst = std::max(worst, std::abs(det - 1.0));
    }
  }
  return worst;
}

/// Order 2 of sv, gautschi, deuflhard on mild Duffing, 4-point dyadic sweep.
inline double classical_order_worst() {
  const ProblemInstance p = mild_duffing();
  ReferenceCache cache;
  double worst = 0.0;
  for (const char* m : {"sv", "gautschi", "deuflhard"}) {
    std::vector<double> errs;
    for (std::size_t n : {800u, 1600u, 3200u, 6400u}) {
      RunConfig cfg;
      cfg.method = m;
      cfg.N = n;
      errs.push_back(run_solve(p, cfg, cache).e_q);
    }
    worst = std::max(worst, worst_rate_deviation(errs, 2.0));
  }
  return worst;
}

/// TrigKernel applied to eigenvectors of A gives cos(h lambda) v.
inline double trig_kernel_eigenvector_worst() {
  const LinearOscillator lo = linear_oscillator(5, 40.0, 13);
  const double h = 0.37;
  const TrigKernel kernel(h, lo.B);
  const SymEig e = sym_eig(lo.B);
  double worst = 0.0;
  for (std::size_t l = 0; l < 5; ++l) {
    Vector v(5);
    for (std::size_t i = 0; i < 5; ++i) v[i] = e.eigenvectors(i, l);
    const Vector got = kernel.cos_hA() * std::span<const double>(v);
    const Vector via_apply = kernel.apply([](double x) { return std::cos(x); }, v);
    for (std::size_t i = 0; i < 5; ++i) {
      const double expected = std::cos(h * e.eigenvalues[l]) * v[i];
      worst = std::max({worst, std::abs(got[i] - expected), std::abs(via_apply[i] - expected)});
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// bench

/// Rows whose (s0, s, k) violate s0 <= s, k = max(s+2, 20), counts >= 1.
inline double params_invariant_violations() {
  double violations = 0.0;
  for (const char* problem : {"duffing", "fpu", "nls"}) {
    const ProblemInstance p = make_problem(problem);
    for (std::size_t n = 200; n <= 1500; n += 50) {
      const double h = p.t_end / static_cast<double>(n);
      const SpectralParams sp = select_params(p.sys.omega, h, p.sys.nu);
      if (!(sp.s0 >= 1 && sp.s0 <= sp.s && sp.k == std::max<std::size_t>(sp.s + 2, 20))) violations += 1.0;
    }
  }
  return violations;
}

/// Two identical runs differ only in time_s.
inline double csv_determinism_mismatches() {
  const auto render = [] {
    RunConfig cfg;
    cfg.N = 200;
    cfg.t_end = 1.0;
    BenchRecord r = run_solve(cfg);
    r.wall_time_s = 0.0;
    std::ostringstream os;
    write_csv_row(os, r);
    return os.str();
  };
  return render() == render() ? 0.0 : 1.0;
}

// ---------------------------------------------------------------------------

inline std::vector<Property> all_properties() {
  return {
      {"linalg", "lu_round_trip", 1e-11, false, lu_round_trip_worst},
      {"linalg", "sym_eig_reconstruction", 1e-12, false, sym_eig_worst},
      {"linalg", "kron_apply_oracle", 1e-14, false, kron_apply_worst},
      {"linalg", "spectral_norm", 1e-9, false, spectral_norm_worst},
      {"polybasis", "orthonormality", 1e-13, false, orthonormality_worst},
      {"polybasis", "quadrature_exactness", 1e-12, false, quadrature_exactness_worst},
      {"polybasis", "quadrature_error_constant", 1e-6, false, quadrature_first_failure_worst},
      {"polybasis", "legendre_integrals", 1e-12, false, legendre_integral_worst},
      {"polybasis", "legendre_symmetry", 1e-13, false, legendre_symmetry_worst},
      {"truncation", "bessel_recurrence", 1e-12, false, bessel_recurrence_worst},
      {"truncation", "bessel_monotonicity", 0.0, false, bessel_monotonicity_violations},
      {"truncation", "g_bound_independent", 1.0, false, g_bound_independent_worst},
      {"truncation", "phi_u_asymptote", 5.0, false, phi_u_asymptote_worst},
      {"truncation", "phi_u_monotone", 0.0, false, phi_u_monotone_violations},
      {"truncation", "parseval", 1e-12, false, parseval_worst},
      {"hbvm", "lemma_identity", 1e-13, false, lemma_identity_worst},
      {"hbvm", "order_2s", 0.25, false, hbvm_order_worst},
      {"hbvm", "energy_conservation", 1e-13, false, hbvm_energy_drift},
      {"hbvm", "gauss_energy_drift", 1e-13, true, gauss_energy_drift},
      {"hbvm", "linear_exactness", 1e-11, false, shbvm_linear_exactness_worst},
      {"hbvm", "time_symmetry", 1e-11, false, time_symmetry_worst},
      {"hbvm", "fixed_point", 10.0, false, fixed_point_ratio},
      {"hbvm", "dense_output", 1e-13, false, dense_output_worst},
      {"problems", "gradient_finite_differences", 1e-5, false, gradient_fd_worst},
      {"problems", "hamiltonian_slope", 0.2, false, hamiltonian_slope_deviation},
      {"problems", "zero_shift", 1e-13, false, zero_shift_worst},
      {"problems", "nls_invariants", 1e-12, false, nls_invariant_worst},
      {"problems", "elliptic_identities", 1e-13, false, elliptic_identity_worst},
      {"baselines", "trig_linear_exactness", 1e-12, false, trig_linear_exactness_worst},
      {"baselines", "sv_determinant", 1e-14, false, sv_determinant_deviation},
      {"baselines", "order_2", 0.15, false, classical_order_worst},
      {"baselines", "trig_kernel_eigenvectors", 1e-13, false, trig_kernel_eigenvector_worst},
      {"bench", "params_invariants", 0.0, false, params_invariant_violations},
      {"bench", "csv_determinism", 0.0, false, csv_determinism_mismatches},
  };
}

}  // namespace oscil::props
