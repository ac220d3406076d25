#pragma once

// Spectral HBVM(k,s,s0) one-step integrator for y' = J [A y + grad f(y)],
// J = J_2 (x) I_m.
//
// The unknowns are the s Legendre coefficients psi_0..psi_{s-1} of the
// vector field along the step (block vector of s blocks of size 2m). Stage
// values live on the degree-s polynomial
//   sigma(c h) = y0 + h sum_j (int_0^c P_j) psi_j,
// the k-point Gauss rule projects the vector field back onto P_0..P_{s-1}, and
// the new point is y1 = y0 + h psi_0.
//
// The discrete problem is solved by the blended iteration, which only needs
// one factorization of I - h rho_s J A for the whole integration. Each step is
// started from the Legendre coefficients of the linear flow, obtained by the
// same iteration on s0 blocks with the nonlinearity dropped.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "oscil/error.hpp"
#include "oscil/linalg.hpp"
#include "oscil/polybasis.hpp"
#include "oscil/truncation.hpp"

namespace oscil {

/// (q, p) <- (p, -q); the action of J = J_2 (x) I_m.
inline void apply_J(std::span<double> v) noexcept {
  const std::size_t m = v.size() / 2;
  for (std::size_t i = 0; i < m; ++i) {
    const double q = v[i];
    v[i] = v[m + i];
    v[m + i] = -q;
  }
}

using GradientFn = std::function<void(std::span<const double>, std::span<double>)>;
using ScalarFn = std::function<double(std::span<const double>)>;

/// First-order Hamiltonian problem y' = J [A y + grad f(y)], H = y^T A y / 2 + f(y).
struct HamiltonianSystem {
  std::size_t half_dim = 0;
  DenseMatrix A;          // 2m x 2m, symmetric positive definite
  GradientFn grad_f;      // grad f(y), written into the output span
  ScalarFn hamiltonian;   // H(y)
  double omega = 1.0;     // frequency estimate used by the truncation criteria
  double nu = 1.0;        // ansatz degree of the nonlinearity

  [[nodiscard]] std::size_t dim() const noexcept { return 2 * half_dim; }

  /// out = A y + grad f(y)
  void gradient(std::span<const double> y, std::span<double> out) const {
    multiply(A, y, out);
    if (grad_f) {
      Vector g(y.size());
      grad_f(y, g);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += g[i];
    }
  }

  /// out = J [A y + grad f(y)]
  void vector_field(std::span<const double> y, std::span<double> out) const {
    gradient(y, out);
    apply_J(out);
  }

  [[nodiscard]] Vector vector_field(std::span<const double> y) const {
    Vector out(y.size());
    vector_field(y, out);
    return out;
  }
};

/// J A as an explicit matrix.
inline DenseMatrix j_times(const DenseMatrix& a) {
  const std::size_t n = a.rows();
  const std::size_t m = n / 2;
  DenseMatrix ja(n, a.cols());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      ja(i, j) = a(m + i, j);
      ja(m + i, j) = -a(i, j);
    }
  return ja;
}

/// X_s with xi_0 on the (0,0) entry and the skew band +-xi_i below/above.
inline DenseMatrix xs_closed_form(std::size_t s) {
  DenseMatrix x(s, s);
  x(0, 0) = legendre_xi(0);
  for (std::size_t i = 1; i < s; ++i) {
    x(i, i - 1) = legendre_xi(i);
    x(i - 1, i) = -legendre_xi(i);
  }
  return x;
}

/// All tableau-derived data for one (k, s) pair.
struct CoefficientSet {
  std::size_t s = 0;
  QuadratureRule quad;
  DenseMatrix Ps;        // k x s, P_j(c_i)
  DenseMatrix Is;        // k x s, int_0^{c_i} P_j
  DenseMatrix PsOmega;   // s x k, b_i P_j(c_i): the projection P_s^T Omega
  DenseMatrix Xs;        // s x s
  double rho = 0.0;      // min |eig(X_s)|
  LUFactorization Xs_lu;

  [[nodiscard]] std::size_t k() const noexcept { return quad.k; }
};

inline CoefficientSet build_coefficients(std::size_t s, std::size_t k) {
  if (s < 1 || k < s) throw Error(ErrorKind::DimensionMismatch, "build_coefficients needs k >= s >= 1");
  CoefficientSet cs;
  cs.s = s;
  cs.quad = gauss_rule(k);
  cs.Ps = DenseMatrix(k, s);
  cs.Is = DenseMatrix(k, s);
  cs.PsOmega = DenseMatrix(s, k);
  for (std::size_t i = 0; i < k; ++i) {
    legendre_all(s, cs.quad.nodes[i], cs.Ps.row(i));
    legendre_int_all(s, cs.quad.nodes[i], cs.Is.row(i));
    for (std::size_t j = 0; j < s; ++j) cs.PsOmega(j, i) = cs.quad.weights[i] * cs.Ps(i, j);
  }
  cs.Xs = xs_closed_form(s);
  const DenseMatrix product = cs.PsOmega * cs.Is;
  const double mismatch = max_abs_entry(product - cs.Xs);
  if (mismatch > 1e-11) {
    throw Error(ErrorKind::AssertionFailure, "P^T Omega I differs from X_s by " + std::to_string(mismatch));
  }
  cs.rho = small_eigenvalue_min_modulus(cs.Xs);
  cs.Xs_lu = lu_factor(cs.Xs);
  return cs;
}

/// Factorized Sigma^{-1} = I - h rho_s J A, reused by every step of a
/// constant-stepsize run.
struct BlendedWorkspace {
  LUFactorization sigma_lu;
  DenseMatrix JA;
  double h = 0.0;
  double rho = 0.0;
  double tol = 0.0;
  std::size_t max_iter = 200;
  // Exact factorization of I - h X_s (x) JA for the final refinement sweeps;
  // empty when refinement is off.
  LUFactorization refine_lu;
  double refine_tol = kUnitRoundoff;
  std::size_t refine_max_iter = 5;
};

/// Blended-iteration tolerance 10 u max(1, omega), relative to max(1, ||psi||_inf).
inline double default_tolerance(double omega = 1.0, double u = kUnitRoundoff) {
  return 10.0 * u * std::max(1.0, omega);
}

inline BlendedWorkspace make_workspace(const HamiltonianSystem& sys, double h, double rho, double tol,
                                       std::size_t max_iter = 200) {
  BlendedWorkspace ws;
  ws.JA = j_times(sys.A);
  ws.h = h;
  ws.rho = rho;
  ws.tol = tol;
  ws.max_iter = max_iter;
  DenseMatrix inv_sigma = DenseMatrix::identity(sys.dim()) - (h * rho) * ws.JA;
  ws.sigma_lu = lu_factor(std::move(inv_sigma));
  return ws;
}

inline BlendedWorkspace make_workspace(const HamiltonianSystem& sys, double h, double rho) {
  return make_workspace(sys, h, rho, default_tolerance(sys.omega));
}

/// I - h X_s (x) JA, block tridiagonal with s x s blocks of size 2m.
inline DenseMatrix linear_newton_matrix(const DenseMatrix& ja, double h, const DenseMatrix& xs) {
  const std::size_t n = ja.rows();
  const std::size_t s = xs.rows();
  DenseMatrix m = DenseMatrix::identity(s * n);
  for (std::size_t j = 0; j < s; ++j)
    for (std::size_t l = 0; l < s; ++l) {
      const double x = h * xs(j, l);
      if (x == 0.0) continue;
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) m(j * n + a, l * n + b) -= x * ja(a, b);
    }
  return m;
}

/// Enables the refinement sweeps of shbvm_step for the coefficient set coeff.
inline void enable_refinement(BlendedWorkspace& ws, const CoefficientSet& coeff, double refine_tol = kUnitRoundoff,
                              std::size_t refine_max_iter = 5) {
  ws.refine_lu = lu_factor(linear_newton_matrix(ws.JA, ws.h, coeff.Xs));
  ws.refine_tol = refine_tol;
  ws.refine_max_iter = refine_max_iter;
}

struct StepDiagnostics {
  std::size_t warm_iters = 0;
  std::size_t main_iters = 0;
  std::size_t refine_iters = 0;
  double final_update_norm = 0.0;
  double residual_norm = 0.0;
};

/// Stage values Y_i = y0 + h sum_j Is(i,j) psi_j, written as k blocks.
inline void stage_values(std::span<const double> psi, std::span<const double> y0, double h,
                         const CoefficientSet& coeff, std::span<double> stages) {
  const std::size_t n = y0.size();
  const std::size_t s = coeff.s;
  for (std::size_t i = 0; i < coeff.k(); ++i) {
    auto yi = stages.subspan(i * n, n);
    std::copy(y0.begin(), y0.end(), yi.begin());
    for (std::size_t j = 0; j < s; ++j) {
      const double w = h * coeff.Is(i, j);
      const double* pj = psi.data() + j * n;
      for (std::size_t t = 0; t < n; ++t) yi[t] += w * pj[t];
    }
  }
}

namespace detail {

/// Double-double accumulator (error-free two-sum and fma two-product).
struct Compensated {
  double hi = 0.0;
  double lo = 0.0;

  void add(double a) {
    const double t = hi + a;
    const double bv = t - hi;
    lo += (hi - (t - bv)) + (a - bv);
    hi = t;
  }
  void add_product(double a, double b) {
    const double p = a * b;
    lo += std::fma(a, b, -p);
    add(p);
  }
  void add_product(double a, const Compensated& b) {
    add_product(a, b.hi);
    lo += a * b.lo;
  }
  void add_low(double a) { lo += a; }
  [[nodiscard]] double value() const { return hi + lo; }
};

/// Same interface as Compensated, ordinary floating-point sums.
struct Plain {
  double v = 0.0;

  void add(double a) { v += a; }
  void add_product(double a, double b) { v += a * b; }
  void add_product(double a, const Plain& b) { v += a * b.v; }
  void add_low(double a) { v += a; }
  [[nodiscard]] double value() const { return v; }
};

template <class Acc>
inline void multiply_accumulate(const DenseMatrix& m, std::span<const double> x, std::span<Acc> out) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    Acc c;
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const double a = m(i, j);
      if (a != 0.0) c.add_product(a, x[j]);
    }
    out[i] = c;
  }
}

}  // namespace detail

namespace detail {

/// Residual at psi + psi_lo (psi_lo empty or the low-order part of a
/// double-double psi). Acc = Compensated makes every sum accurate well below
/// the rounding of psi itself.
template <class Acc>
inline Vector residual_impl(std::span<const double> psi, std::span<const double> psi_lo, std::span<const double> y0,
                            double h, const HamiltonianSystem& sys, const CoefficientSet& coeff, const DenseMatrix& ja,
                            bool with_grad_f) {
  const std::size_t n = sys.dim();
  const std::size_t s = coeff.s;
  const std::size_t k = coeff.k();
  if (y0.size() != n || psi.size() != s * n) throw Error(ErrorKind::DimensionMismatch, "residual_G block sizes");
  // Linear part through X_s, grad f through quadrature.
  std::vector<Acc> acc(s * n);
  const bool has_lo = !psi_lo.empty();
  for (std::size_t i = 0; i < s * n; ++i) {
    acc[i].add(psi[i]);
    if (has_lo) acc[i].add_low(psi_lo[i]);
  }
  std::vector<Acc> w(s * n);
  for (std::size_t l = 0; l < s; ++l) {
    const auto wl = std::span(w).subspan(l * n, n);
    multiply_accumulate(ja, psi.subspan(l * n, n), wl);
    if (!has_lo) continue;
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t m = 0; m < n; ++m) wl[t].add_low(ja(t, m) * psi_lo[l * n + m]);
  }
  for (std::size_t j = 0; j < s; ++j) {
    const std::size_t lo = j == 0 ? 0 : j - 1;
    const std::size_t hi = std::min(s, j + 2);
    for (std::size_t l = lo; l < hi; ++l) {
      const double x = -h * coeff.Xs(j, l);
      if (x == 0.0) continue;
      for (std::size_t t = 0; t < n; ++t) acc[j * n + t].add_product(x, w[l * n + t]);
    }
  }
  std::vector<Acc> ja_y0(n);
  multiply_accumulate(ja, y0, std::span(ja_y0));
  for (std::size_t t = 0; t < n; ++t) acc[t].add_product(-1.0, ja_y0[t]);

  if (with_grad_f && sys.grad_f) {
    Vector stages(k * n);
    Vector f(n);
    stage_values(psi, y0, h, coeff, stages);
    for (std::size_t i = 0; i < k; ++i) {
      sys.grad_f(std::span<const double>(stages).subspan(i * n, n), f);
      apply_J(f);
      for (double v : f)
        if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteEvaluation, "vector field at stage " + std::to_string(i));
      for (std::size_t j = 0; j < s; ++j) {
        const double wt = -coeff.PsOmega(j, i);
        for (std::size_t t = 0; t < n; ++t) acc[j * n + t].add_product(wt, f[t]);
      }
    }
  }
  Vector g(s * n);
  for (std::size_t i = 0; i < s * n; ++i) g[i] = acc[i].value();
  for (double v : g)
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteEvaluation, "non-finite residual");
  return g;
}

inline Vector residual_compensated(std::span<const double> psi, std::span<const double> psi_lo,
                                   std::span<const double> y0, double h, const HamiltonianSystem& sys,
                                   const CoefficientSet& coeff, const DenseMatrix& ja, bool with_grad_f = true) {
  return residual_impl<Compensated>(psi, psi_lo, y0, h, sys, coeff, ja, with_grad_f);
}

inline Vector residual_plain(std::span<const double> psi, std::span<const double> y0, double h,
                             const HamiltonianSystem& sys, const CoefficientSet& coeff, const DenseMatrix& ja,
                             bool with_grad_f = true) {
  return residual_impl<Plain>(psi, {}, y0, h, sys, coeff, ja, with_grad_f);
}

}  // namespace detail

/// G(psi) = psi - (P_s^T Omega (x) I) J [A Y + grad f(Y)], evaluated as
///   psi - h (X_s (x) JA) psi - e_0 (x) JA y0 - (P_s^T Omega (x) J) grad f(Y).
inline Vector residual_G(std::span<const double> psi, std::span<const double> y0, double h,
                         const HamiltonianSystem& sys, const CoefficientSet& coeff, const DenseMatrix& ja) {
  return detail::residual_compensated(psi, {}, y0, h, sys, coeff, ja);
}

inline Vector residual_G(std::span<const double> psi, std::span<const double> y0, double h,
                         const HamiltonianSystem& sys, const CoefficientSet& coeff) {
  return residual_G(psi, y0, h, sys, coeff, j_times(sys.A));
}

/// One blended sweep at the residual G_val = G(psi); updates psi and returns ||Delta||_inf.
///   eta = -G, eta1 = (rho X^{-1} (x) I) eta,
///   u = (I (x) Sigma)(eta - eta1), Delta = (I (x) Sigma)(eta1 + u).
/// rho is taken from the coefficient set; Sigma from the workspace.
namespace detail {

/// Delta = (I (x) Sigma)(eta1 + (I (x) Sigma)(eta - eta1)), eta = -G.
inline Vector blended_delta(std::span<const double> g_val, const BlendedWorkspace& ws, const CoefficientSet& coeff) {
  const std::size_t s = coeff.s;
  if (g_val.size() % s != 0) throw Error(ErrorKind::DimensionMismatch, "blended_sweep");
  const std::size_t n = g_val.size() / s;
  if (ws.sigma_lu.size() != n) throw Error(ErrorKind::DimensionMismatch, "blended_sweep workspace size");

  Vector eta1(s * n);
  Vector column(s);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t j = 0; j < s; ++j) column[j] = -g_val[j * n + t];
    lu_solve_inplace(coeff.Xs_lu, column);
    for (std::size_t j = 0; j < s; ++j) eta1[j * n + t] = coeff.rho * column[j];
  }
  Vector delta(s * n);
  for (std::size_t j = 0; j < s; ++j) {
    const auto block = std::span(delta).subspan(j * n, n);
    for (std::size_t t = 0; t < n; ++t) block[t] = -g_val[j * n + t] - eta1[j * n + t];
    lu_solve_inplace(ws.sigma_lu, block);
    for (std::size_t t = 0; t < n; ++t) block[t] += eta1[j * n + t];
    lu_solve_inplace(ws.sigma_lu, block);
  }
  return delta;
}

}  // namespace detail

inline double blended_sweep(std::span<double> psi, std::span<const double> g_val, const BlendedWorkspace& ws,
                            const CoefficientSet& coeff) {
  if (psi.size() != g_val.size()) throw Error(ErrorKind::DimensionMismatch, "blended_sweep");
  const Vector delta = detail::blended_delta(g_val, ws, coeff);
  for (std::size_t i = 0; i < psi.size(); ++i) psi[i] += delta[i];
  return norm_inf(delta);
}

namespace detail {

/// Sweeps without a new smallest update before a plateau is accepted.
inline constexpr std::size_t kStagnationWindow = 10;
/// A plateau is accepted only below this multiple of tol * max(1, ||psi||).
inline constexpr double kStagnationFactor = 1e3;

struct IterationOutcome {
  bool converged = false;
  std::size_t iterations = 0;
  double update_norm = 0.0;
  double residual_norm = 0.0;
};

/// Blended sweeps. With compensated = true psi = hi + lo and the residual is
/// evaluated at the full double-double value; otherwise the rounding of
/// psi + Delta is amplified by the non-normal iteration into a floor well
/// above u ||psi||, which the refinement sweeps then remove.
inline IterationOutcome iterate_blended(std::span<double> psi, std::span<double> psi_lo, std::span<const double> y0,
                                        double h, const HamiltonianSystem& sys, const CoefficientSet& coeff,
                                        const BlendedWorkspace& ws, bool with_grad_f, double tol, bool compensated) {
  IterationOutcome out;
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  for (std::size_t it = 1; it <= ws.max_iter; ++it) {
    const Vector g = compensated ? residual_compensated(psi, psi_lo, y0, h, sys, coeff, ws.JA, with_grad_f)
                                 : residual_plain(psi, y0, h, sys, coeff, ws.JA, with_grad_f);
    const Vector delta = blended_delta(g, ws, coeff);
    for (std::size_t i = 0; i < psi.size(); ++i) {
      if (!compensated) {
        psi[i] += delta[i];
        continue;
      }
      Compensated c{psi[i], psi_lo[i]};
      c.add(delta[i]);
      psi[i] = c.value();
      psi_lo[i] = (c.hi - psi[i]) + c.lo;
    }
    out.iterations = it;
    out.residual_norm = norm_inf(g);
    out.update_norm = norm_inf(delta);
    const double scale = std::max(1.0, norm_inf(psi));
    if (!std::isfinite(out.update_norm)) return out;
    if (out.update_norm <= tol * scale) {
      out.converged = true;
      return out;
    }
    if (out.update_norm < best) {
      best = out.update_norm;
      since_best = 0;
    } else if (++since_best >= kStagnationWindow && best <= kStagnationFactor * tol * scale) {
      // Round-off plateau: further sweeps only move psi within the noise.
      out.converged = true;
      return out;
    }
  }
  return out;
}

/// Simplified-Newton sweeps psi += (I - h X_s (x) JA)^{-1}(-G(psi)) with the
/// exact factorization. Started from the blended solution they contract by
/// about h ||grad^2 f|| per sweep and remove the round-off floor that the
/// non-normal blended iteration leaves behind. Returns the sweep count.
inline std::size_t refine_linear_newton(std::span<double> psi, std::span<double> psi_lo, std::span<const double> y0,
                                        double h, const HamiltonianSystem& sys, const CoefficientSet& coeff,
                                        const BlendedWorkspace& ws, double* residual_norm) {
  double prev = std::numeric_limits<double>::infinity();
  std::size_t it = 0;
  while (it < ws.refine_max_iter) {
    ++it;
    Vector g = residual_compensated(psi, psi_lo, y0, h, sys, coeff, ws.JA);
    if (residual_norm) *residual_norm = norm_inf(g);
    for (double& v : g) v = -v;
    lu_solve_inplace(ws.refine_lu, g);
    for (std::size_t i = 0; i < psi.size(); ++i) {
      Compensated c{psi[i], psi_lo[i]};
      c.add(g[i]);
      psi[i] = c.value();
      psi_lo[i] = (c.hi - psi[i]) + c.lo;
    }
    const double dnorm = norm_inf(g);
    if (!std::isfinite(dnorm)) throw Error(ErrorKind::NonFiniteEvaluation, "refinement update");
    if (dnorm <= ws.refine_tol * std::max(1.0, norm_inf(psi)) || dnorm >= prev) break;
    prev = dnorm;
  }
  return it;
}

}  // namespace detail

/// Initial psi: Legendre coefficients of the linear flow (grad f dropped),
/// computed on warm.s = s0 blocks and zero-padded to s blocks. The blended
/// iteration reuses the main Sigma (built with rho_s).
inline Vector warm_start(std::span<const double> y0, double h, const HamiltonianSystem& sys,
                         const CoefficientSet& warm, std::size_t s, const BlendedWorkspace& ws,
                         std::size_t* iterations = nullptr) {
  const std::size_t n = sys.dim();
  const std::size_t s0 = warm.s;
  if (s0 > s) throw Error(ErrorKind::DimensionMismatch, "warm start needs s0 <= s");
  Vector psi(s * n, 0.0);
  if (iterations) *iterations = 0;
  if (norm_inf(y0) == 0.0) return psi;

  std::span<double> gamma(psi.data(), s0 * n);
  Vector gamma_lo(s0 * n, 0.0);
  const auto outcome =
      detail::iterate_blended(gamma, gamma_lo, y0, h, sys, warm, ws, false, ws.tol, ws.refine_lu.size() == 0);
  if (iterations) *iterations = outcome.iterations;
  if (outcome.converged) return psi;
  throw Error(ErrorKind::NoConvergence, "warm-start iteration did not reach tolerance");
}

/// sigma(c h) = y0 + h sum_j (int_0^c P_j) psi_j
inline Vector dense_output(std::span<const double> psi, std::span<const double> y0, double h, double c,
                           const CoefficientSet& coeff) {
  const std::size_t n = y0.size();
  const Vector ints = legendre_int_all(coeff.s, c);
  Vector y(y0.begin(), y0.end());
  for (std::size_t j = 0; j < coeff.s; ++j)
    for (std::size_t t = 0; t < n; ++t) y[t] += h * ints[j] * psi[j * n + t];
  return y;
}

struct StepResult {
  Vector y1;
  Vector psi;
  StepDiagnostics diag;
};

/// One SHBVM step: warm start, blended sweeps until converged, y1 = y0 + h psi_0.
inline StepResult shbvm_step(std::span<const double> y0, double h, const HamiltonianSystem& sys,
                             const CoefficientSet& coeff, const CoefficientSet& warm, const BlendedWorkspace& ws) {
  const std::size_t n = sys.dim();
  if (y0.size() != n) throw Error(ErrorKind::DimensionMismatch, "shbvm_step state size");
  StepResult r;
  if (h == 0.0) {
    r.y1.assign(y0.begin(), y0.end());
    r.psi.assign(coeff.s * n, 0.0);
    return r;
  }
  Vector psi = warm_start(y0, h, sys, warm, coeff.s, ws, &r.diag.warm_iters);
  Vector psi_lo(psi.size(), 0.0);
  const auto outcome = detail::iterate_blended(psi, psi_lo, y0, h, sys, coeff, ws, true, ws.tol, ws.refine_lu.size() == 0);
  r.diag.main_iters = outcome.iterations;
  r.diag.final_update_norm = outcome.update_norm;
  r.diag.residual_norm = outcome.residual_norm;
  if (!outcome.converged) throw Error(ErrorKind::NoConvergence, "blended iteration did not reach tolerance");
  if (ws.refine_lu.size() == psi.size()) {
    r.diag.refine_iters = detail::refine_linear_newton(psi, psi_lo, y0, h, sys, coeff, ws, &r.diag.residual_norm);
  }
  r.y1.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    detail::Compensated c;
    c.add(y0[t]);
    c.add_product(h, psi[t]);
    c.lo += h * psi_lo[t];
    r.y1[t] = c.value();
  }
  r.psi = std::move(psi);
  return r;
}

struct SolverOptions {
  std::optional<double> tol;  // blended tolerance; default 10 u max(1, omega)
  std::size_t max_iter = 200;
  bool refine = true;
  double refine_tol = kUnitRoundoff;
  std::size_t refine_max_iter = 5;
};

/// Constant-stepsize driver holding the shared coefficient sets and the
/// factorized Sigma. Coefficient sets are immutable and may be shared between
/// solvers; the solver itself is not thread-safe.
class ShbvmSolver {
 public:
  ShbvmSolver(const HamiltonianSystem& sys, double h, const SpectralParams& params, SolverOptions opts = {})
      : sys_(&sys),
        h_(h),
        params_(params),
        coeff_(std::make_shared<const CoefficientSet>(build_coefficients(params.s, params.k))),
        warm_(params.s0 == params.s && params.k == params.s
                  ? coeff_
                  : std::make_shared<const CoefficientSet>(build_coefficients(params.s0, params.s0))),
        ws_(make_workspace(sys, h, coeff_->rho, opts.tol.value_or(default_tolerance(sys.omega)), opts.max_iter)) {
    if (opts.refine && h != 0.0) enable_refinement(ws_, *coeff_, opts.refine_tol, opts.refine_max_iter);
  }

  StepResult step(std::span<const double> y0) const { return shbvm_step(y0, h_, *sys_, *coeff_, *warm_, ws_); }

  [[nodiscard]] double h() const noexcept { return h_; }
  [[nodiscard]] const SpectralParams& params() const noexcept { return params_; }
  [[nodiscard]] const CoefficientSet& coefficients() const noexcept { return *coeff_; }
  [[nodiscard]] const CoefficientSet& warm_coefficients() const noexcept { return *warm_; }
  [[nodiscard]] const BlendedWorkspace& workspace() const noexcept { return ws_; }

 private:
  const HamiltonianSystem* sys_;
  double h_;
  SpectralParams params_;
  std::shared_ptr<const CoefficientSet> coeff_;
  std::shared_ptr<const CoefficientSet> warm_;
  BlendedWorkspace ws_;
};

struct Trajectory {
  double h = 0.0;
  std::vector<Vector> states;  // N+1 states, states[0] = y0
  Vector hamiltonian;          // H(states[n])
  std::vector<StepDiagnostics> diagnostics;
};

/// Observer called with (step index n, y_n) for n = 0..N.
using StepObserver = std::function<void(std::size_t, std::span<const double>)>;

/// Runs N steps calling `observe` after each; returns per-step diagnostics.
inline std::vector<StepDiagnostics> integrate_observed(const HamiltonianSystem& sys, std::span<const double> y0,
                                                       double h, std::size_t N, const SpectralParams& params,
                                                       const StepObserver& observe, SolverOptions opts = {}) {
  if (N < 1) throw Error(ErrorKind::DimensionMismatch, "integrate needs N >= 1");
  const ShbvmSolver solver(sys, h, params, opts);
  std::vector<StepDiagnostics> diags;
  diags.reserve(N);
  Vector y(y0.begin(), y0.end());
  if (observe) observe(0, y);
  for (std::size_t n = 1; n <= N; ++n) {
    try {
      StepResult r = solver.step(y);
      y = std::move(r.y1);
      diags.push_back(r.diag);
    } catch (const Error& e) {
      throw StepFailure(e.kind(), n, e.what());
    }
    if (observe) observe(n, y);
  }
  return diags;
}

inline Trajectory integrate(const HamiltonianSystem& sys, std::span<const double> y0, double h, std::size_t N,
                            const SpectralParams& params, SolverOptions opts = {}) {
  Trajectory traj;
  traj.h = h;
  traj.states.reserve(N + 1);
  traj.hamiltonian.reserve(N + 1);
  traj.diagnostics = integrate_observed(
      sys, y0, h, N, params,
      [&](std::size_t, std::span<const double> y) {
        traj.states.emplace_back(y.begin(), y.end());
        traj.hamiltonian.push_back(sys.hamiltonian ? sys.hamiltonian(y) : 0.0);
      },
      opts);
  return traj;
}

}  // namespace oscil
