#pragma once

// Benchmark problems: the Duffing oscillator, the Fermi-Pasta-Ulam chain with
// alternating stiff/soft springs, and a Fourier semi-discretization of the
// cubic Schroedinger equation with a plane-wave solution.
//
// Second-order problems q'' + A^2 q + grad f(q) = 0 are cast in first-order
// form with scaled momenta p = A^{-1} q', giving
//   y' = J [ (I_2 (x) A) y + (A^{-1} grad f(q), 0) ],
// which conserves H(q,p) = (|Ap|^2 + |Aq|^2)/2 + f(q).

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "oscil/error.hpp"
#include "oscil/hbvm.hpp"
#include "oscil/linalg.hpp"
#include "oscil/truncation.hpp"

namespace oscil {

/// q'' + A^2 q + grad f(q) = 0 with its initial data.
struct SecondOrderProblem {
  std::size_t m = 0;
  DenseMatrix A;  // m x m spd
  GradientFn grad_f;
  ScalarFn f;
  Vector q0;
  Vector v0;  // q'(0)
  double nu = 1.0;
  std::optional<double> omega_override;  // frequency estimate prescribed for the benchmark
};

/// Shifts zero eigenvalues of a symmetric positive semidefinite S to 1.
/// Returns (S + S0, S0) where S0 is the projector onto the null space.
inline std::pair<DenseMatrix, DenseMatrix> shift_zero_eigenvalues(const DenseMatrix& s) {
  const SymEig eig = sym_eig(s);
  const double scale = std::max(1.0, std::abs(eig.eigenvalues.back()));
  const DenseMatrix s0 = eig.apply_function([&](double l) { return std::abs(l) <= 1e-12 * scale ? 1.0 : 0.0; });
  return {s + s0, s0};
}

/// Symmetric square root of an spd matrix.
inline DenseMatrix spd_sqrt(const DenseMatrix& s) {
  const SymEig eig = sym_eig(s);
  if (eig.eigenvalues.front() <= 0.0) throw Error(ErrorKind::SingularA, "matrix square root of a non-positive matrix");
  return eig.apply_function([](double l) { return std::sqrt(l); });
}

/// y = (q, A^{-1} v)
inline Vector to_scaled_state(const DenseMatrix& a, std::span<const double> q, std::span<const double> v) {
  const LUFactorization lu = lu_factor(a);
  Vector y(q.begin(), q.end());
  const Vector p = lu_solve(lu, v);
  y.insert(y.end(), p.begin(), p.end());
  return y;
}

/// (q, q') from the scaled state (q, p), q' = A p.
inline std::pair<Vector, Vector> from_scaled_state(const DenseMatrix& a, std::span<const double> y) {
  const std::size_t m = a.rows();
  Vector q(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(m));
  Vector v = a * y.subspan(m, m);
  return {std::move(q), std::move(v)};
}

inline HamiltonianSystem to_first_order(const SecondOrderProblem& p2) {
  const std::size_t m = p2.m;
  if (p2.A.rows() != m || !p2.A.square()) throw Error(ErrorKind::DimensionMismatch, "second-order A must be m x m");
  auto lu = std::make_shared<LUFactorization>();
  try {
    *lu = lu_factor(p2.A);
  } catch (const Error&) {
    throw Error(ErrorKind::SingularA, "A^{-1} grad f cannot be applied");
  }
  HamiltonianSystem sys;
  sys.half_dim = m;
  sys.A = DenseMatrix(2 * m, 2 * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) sys.A(i, j) = sys.A(m + i, m + j) = p2.A(i, j);
  if (p2.grad_f) {
    sys.grad_f = [lu, m, grad = p2.grad_f](std::span<const double> y, std::span<double> out) {
      grad(y.first(m), out.first(m));
      lu_solve_inplace(*lu, out.first(m));
      std::fill(out.begin() + static_cast<std::ptrdiff_t>(m), out.end(), 0.0);
    };
  }
  sys.hamiltonian = [a = p2.A, f = p2.f, m](std::span<const double> y) {
    const Vector aq = a * y.first(m);
    const Vector ap = a * y.subspan(m, m);
    double h = 0.5 * (std::inner_product(aq.begin(), aq.end(), aq.begin(), 0.0) +
                      std::inner_product(ap.begin(), ap.end(), ap.begin(), 0.0));
    if (f) h += f(y.first(m));
    return h;
  };
  sys.omega = p2.omega_override ? *p2.omega_override : spectral_norm(p2.A);
  sys.nu = p2.nu;
  return sys;
}

/// H(q, q') = (|q'|^2 + |Aq|^2)/2 + f(q), in the original variables.
inline double second_order_energy(const SecondOrderProblem& p2, std::span<const double> q, std::span<const double> v) {
  const Vector aq = p2.A * q;
  double h = 0.5 * (std::inner_product(v.begin(), v.end(), v.begin(), 0.0) +
                    std::inner_product(aq.begin(), aq.end(), aq.begin(), 0.0));
  if (p2.f) h += p2.f(q);
  return h;
}

// ---------------------------------------------------------------------------
// Duffing: q'' = -(kappa^2 + beta^2) q + 2 kappa^2 q^3, q(0) = 0, q'(0) = beta.

inline SecondOrderProblem duffing(double kappa, double beta) {
  SecondOrderProblem p;
  p.m = 1;
  p.A = DenseMatrix{{std::sqrt(kappa * kappa + beta * beta)}};
  const double k2 = kappa * kappa;
  p.grad_f = [k2](std::span<const double> q, std::span<double> out) { out[0] = -2.0 * k2 * q[0] * q[0] * q[0]; };
  p.f = [k2](std::span<const double> q) { return -0.5 * k2 * q[0] * q[0] * q[0] * q[0]; };
  p.q0 = {0.0};
  p.v0 = {beta};
  p.nu = 3.0;
  return p;
}

struct EllipticTriple {
  double sn = 0.0;
  double cn = 1.0;
  double dn = 1.0;
};

/// Jacobi sn, cn, dn with parameter M (= modulus squared) by the
/// arithmetic-geometric mean and descending Landen transformation.
inline EllipticTriple jacobi_elliptic(double u, double M) {
  if (!(M >= 0.0) || !(M < 1.0)) throw Error(ErrorKind::ModulusOutOfRange, "jacobi_elliptic needs 0 <= M < 1");
  if (M < 1e-300) return {std::sin(u), std::cos(u), 1.0};
  constexpr int max_levels = 32;
  double a[max_levels + 1], c[max_levels + 1];
  a[0] = 1.0;
  double b = std::sqrt(1.0 - M);
  c[0] = std::sqrt(M);
  int n = 0;
  while (std::abs(c[n]) > 1e-17 * a[n] && n < max_levels) {
    a[n + 1] = 0.5 * (a[n] + b);
    c[n + 1] = 0.5 * (a[n] - b);
    b = std::sqrt(a[n] * b);
    ++n;
  }
  double phi = std::ldexp(a[n] * u, n);
  for (int j = n; j > 0; --j) phi = 0.5 * (phi + std::asin(c[j] / a[j] * std::sin(phi)));
  const double sn = std::sin(phi);
  const double cn = std::cos(phi);
  // 1 - M sn^2 >= 1 - M > 0, so the square root is well conditioned
  const double dn = std::sqrt(1.0 - M * sn * sn);
  return {sn, cn, dn};
}

/// Exact Duffing solution (q, q') at time t.
inline std::pair<double, double> duffing_exact(double t, double kappa, double beta) {
  const double M = kappa * kappa / (beta * beta);
  const EllipticTriple e = jacobi_elliptic(beta * t, M);
  return {e.sn, beta * e.cn * e.dn};
}

// ---------------------------------------------------------------------------
// Fermi-Pasta-Ulam: 2m unit masses, stiff linear springs of stiffness
// omega_i^2 between q_{2i-1} and q_{2i}, cubic springs between the pairs and
// to the fixed walls.

/// Default stiffnesses {1, 10, 100, 1000, (pi-3)1e3, (pi-2)1e2, (pi-1)10, pi}.
inline Vector fpu_default_frequencies() {
  constexpr double pi = std::numbers::pi;
  return {1.0, 10.0, 100.0, 1000.0, (pi - 3.0) * 1e3, (pi - 2.0) * 1e2, (pi - 1.0) * 10.0, pi};
}

/// sum_{i=0}^{m} (q_{2i+1} - q_{2i})^4 with q_0 = q_{2m+1} = 0 (1-based).
inline double fpu_quartic(std::span<const double> q) {
  const std::size_t n = q.size();
  double v = 0.0;
  for (std::size_t i = 0; i <= n / 2; ++i) {
    const double right = (2 * i < n) ? q[2 * i] : 0.0;       // q_{2i+1}
    const double left = (i > 0) ? q[2 * i - 1] : 0.0;        // q_{2i}
    const double d = right - left;
    v += d * d * d * d;
  }
  return v;
}

inline void fpu_quartic_gradient(std::span<const double> q, std::span<double> out) {
  const std::size_t n = q.size();
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i <= n / 2; ++i) {
    const double right = (2 * i < n) ? q[2 * i] : 0.0;
    const double left = (i > 0) ? q[2 * i - 1] : 0.0;
    const double d = right - left;
    const double g = 4.0 * d * d * d;
    if (2 * i < n) out[2 * i] += g;
    if (i > 0) out[2 * i - 1] -= g;
  }
}

inline SecondOrderProblem fpu(std::size_t m, std::span<const double> omegas) {
  if (m < 1 || omegas.size() != m) throw Error(ErrorKind::DimensionMismatch, "fpu needs m >= 1 stiffnesses");
  const std::size_t n = 2 * m;
  DenseMatrix stiffness(n, n);
  for (std::size_t i = 0; i < m; ++i) {
    const double w2 = omegas[i] * omegas[i];
    stiffness(2 * i, 2 * i) = w2;
    stiffness(2 * i + 1, 2 * i + 1) = w2;
    stiffness(2 * i, 2 * i + 1) = -w2;
    stiffness(2 * i + 1, 2 * i) = -w2;
  }
  auto [shifted, s0] = shift_zero_eigenvalues(stiffness);
  SecondOrderProblem p;
  p.m = n;
  p.A = spd_sqrt(shifted);
  p.grad_f = [s0 = s0](std::span<const double> q, std::span<double> out) {
    fpu_quartic_gradient(q, out);
    const Vector s0q = s0 * q;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= s0q[i];
  };
  p.f = [s0 = s0](std::span<const double> q) {
    const Vector s0q = s0 * q;
    return fpu_quartic(q) - 0.5 * std::inner_product(q.begin(), q.end(), s0q.begin(), 0.0);
  };
  p.q0.resize(n);
  for (std::size_t i = 0; i < n; ++i) p.q0[i] = static_cast<double>(i) / (2.0 * (2.0 * static_cast<double>(m) - 1.0));
  p.v0.assign(n, 0.0);
  p.nu = 3.0;
  double wmax = 0.0;
  for (double w : omegas) wmax = std::max(wmax, std::abs(w));
  p.omega_override = wmax;
  return p;
}

inline SecondOrderProblem fpu_default() {
  const Vector w = fpu_default_frequencies();
  return fpu(w.size(), w);
}

// ---------------------------------------------------------------------------
// Cubic Schroedinger equation i psi_t + psi_xx + kappa |psi|^2 psi = 0 on
// [0, 2pi], periodic. Real and imaginary parts are expanded on the orthonormal
// basis w = (c_0, c_1, s_1, ..., c_r, s_r); y = (q, p) holds the coefficients
// of Re psi and Im psi. The integrals are evaluated by the trapezoidal rule on
// 4r+1 points, which is exact for the trigonometric polynomials involved.

struct NlsBasis {
  std::size_t r = 0;
  std::size_t points = 0;  // 4r + 1
  DenseMatrix w;           // points x (2r+1), basis values at the nodes
  double weight = 0.0;     // 2 pi / points
};

inline NlsBasis nls_basis(std::size_t r) {
  NlsBasis b;
  b.r = r;
  b.points = 4 * r + 1;
  const std::size_t d = 2 * r + 1;
  b.w = DenseMatrix(b.points, d);
  b.weight = 2.0 * std::numbers::pi / static_cast<double>(b.points);
  const double c0 = std::sqrt(1.0 / (2.0 * std::numbers::pi));
  const double cj = std::sqrt(2.0 / (2.0 * std::numbers::pi));
  for (std::size_t l = 0; l < b.points; ++l) {
    const double x = b.weight * static_cast<double>(l);
    b.w(l, 0) = c0;
    for (std::size_t j = 1; j <= r; ++j) {
      b.w(l, 2 * j - 1) = cj * std::cos(static_cast<double>(j) * x);
      b.w(l, 2 * j) = cj * std::sin(static_cast<double>(j) * x);
    }
  }
  return b;
}

inline HamiltonianSystem nls(std::size_t r, double kappa) {
  if (r < 1) throw Error(ErrorKind::DimensionMismatch, "nls needs r >= 1");
  auto basis = std::make_shared<const NlsBasis>(nls_basis(r));
  const std::size_t d = 2 * r + 1;
  HamiltonianSystem sys;
  sys.half_dim = d;
  sys.A = DenseMatrix(2 * d, 2 * d);
  for (std::size_t half = 0; half < 2; ++half) {
    sys.A(half * d, half * d) = 1.0;  // zero eigenvalue of D^2 shifted to 1
    for (std::size_t j = 1; j <= r; ++j) {
      const double j2 = static_cast<double>(j * j);
      sys.A(half * d + 2 * j - 1, half * d + 2 * j - 1) = j2;
      sys.A(half * d + 2 * j, half * d + 2 * j) = j2;
    }
  }
  sys.grad_f = [basis, kappa, d](std::span<const double> y, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t l = 0; l < basis->points; ++l) {
      const auto wl = basis->w.row(l);
      double a = 0.0, b = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        a += wl[j] * y[j];
        b += wl[j] * y[d + j];
      }
      const double c = -kappa * basis->weight * (a * a + b * b);
      for (std::size_t j = 0; j < d; ++j) {
        out[j] += c * a * wl[j];
        out[d + j] += c * b * wl[j];
      }
    }
    out[0] -= y[0];
    out[d] -= y[d];
  };
  sys.hamiltonian = [basis, kappa, d, a = sys.A](std::span<const double> y) {
    const Vector ay = a * y;
    double h = 0.5 * std::inner_product(y.begin(), y.end(), ay.begin(), 0.0);
    double quartic = 0.0;
    for (std::size_t l = 0; l < basis->points; ++l) {
      const auto wl = basis->w.row(l);
      double qa = 0.0, qb = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        qa += wl[j] * y[j];
        qb += wl[j] * y[d + j];
      }
      const double rho = qa * qa + qb * qb;
      quartic += rho * rho;
    }
    h -= 0.25 * kappa * basis->weight * quartic;
    h -= 0.5 * (y[0] * y[0] + y[d] * y[d]);
    return h;
  };
  sys.omega = static_cast<double>(r * r);
  sys.nu = 1.0;
  return sys;
}

/// Coefficients of the plane wave exp(i(r x - mu t)), mu = r^2 - kappa.
inline Vector nls_exact(double t, std::size_t r, double kappa) {
  const std::size_t d = 2 * r + 1;
  const double mu = static_cast<double>(r * r) - kappa;
  const double sq = std::sqrt(std::numbers::pi);
  Vector y(2 * d, 0.0);
  y[2 * r - 1] = sq * std::cos(mu * t);      // xi_r
  y[2 * r] = sq * std::sin(mu * t);          // eta_r
  y[d + 2 * r - 1] = -sq * std::sin(mu * t);  // alpha_r
  y[d + 2 * r] = sq * std::cos(mu * t);       // beta_r
  return y;
}

// ---------------------------------------------------------------------------

/// Oracle trajectory on the coarse grid t_n = n T / N, n = 0..N, from an
/// SHBVM run with stepsize T / (N * refine) and parameters re-selected for it.
inline std::vector<Vector> reference_trajectory(const HamiltonianSystem& sys, std::span<const double> y0, double T,
                                                std::size_t N, std::size_t refine = 8) {
  const double h = T / static_cast<double>(N * refine);
  const SpectralParams params = select_params(sys.omega, h, sys.nu);
  std::vector<Vector> out;
  out.reserve(N + 1);
  integrate_observed(sys, y0, h, N * refine, params, [&](std::size_t n, std::span<const double> y) {
    if (n % refine == 0) out.emplace_back(y.begin(), y.end());
  });
  return out;
}

}  // namespace oscil
