#pragma once

// Classical integrators for q'' = -A^2 q - grad f(q): Stormer-Verlet and the
// trigonometric methods of Gautschi and Deuflhard in one-step form
//
//   q' = cos(hA) q + h sinc(hA) v + h^2/2 Psi g(q)
//   v' = -A sin(hA) q + cos(hA) v + h/2 (Psi0 g(q) + Psi1 g(q'))
//
// with g = -grad f, Psi = sinc(hA) Psi1 and Psi0 = cos(hA) Psi1, which makes
// the scheme symmetric. Gautschi: Psi = sinc^2(hA/2). Deuflhard: Psi = sinc(hA).

#include <cmath>
#include <cstddef>
#include <utility>

#include "oscil/linalg.hpp"
#include "oscil/problems.hpp"

namespace oscil {

/// sin(x)/x, with a series branch near 0.
inline double sinc(double x) noexcept {
  if (std::abs(x) < 1e-4) {
    const double x2 = x * x;
    return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
  }
  return std::sin(x) / x;
}

using State2 = std::pair<Vector, Vector>;  // (q, q')

/// Matrix functions of hA for one (h, A), from one symmetric eigendecomposition.
class TrigKernel {
 public:
  TrigKernel(double h, const DenseMatrix& a) : h_(h), eig_(sym_eig(h * a)) {
    const std::size_t m = a.rows();
    const Vector& xi = eig_.eigenvalues;
    cos_.resize(m);
    sin_.resize(m);
    sinc_.resize(m);
    sinc2_half_.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      cos_[i] = std::cos(xi[i]);
      sin_[i] = std::sin(xi[i]);
      sinc_[i] = sinc(xi[i]);
      const double sh = sinc(0.5 * xi[i]);
      sinc2_half_[i] = sh * sh;
    }
    cos_matrix_ = from_values(cos_);
    h_sinc_matrix_ = h * from_values(sinc_);
    // A sin(hA) = (hA) sin(hA) / h
    Vector a_sin(m);
    for (std::size_t i = 0; i < m; ++i) a_sin[i] = xi[i] * sin_[i] / h;
    a_sin_matrix_ = from_values(a_sin);

    gautschi_psi_ = from_values(sinc2_half_);
    deuflhard_psi_ = from_values(sinc_);
    identity_ = DenseMatrix::identity(m);
    Vector psi1(m), psi0(m);
    for (std::size_t i = 0; i < m; ++i) {
      psi1[i] = sinc2_half_[i] / sinc_[i];
      psi0[i] = cos_[i] * psi1[i];
    }
    gautschi_psi1_ = from_values(psi1);
    gautschi_psi0_ = from_values(psi0);
  }

  [[nodiscard]] double h() const noexcept { return h_; }
  [[nodiscard]] const SymEig& eig() const noexcept { return eig_; }
  [[nodiscard]] const Vector& cos_values() const noexcept { return cos_; }
  [[nodiscard]] const Vector& sin_values() const noexcept { return sin_; }
  [[nodiscard]] const Vector& sinc_values() const noexcept { return sinc_; }
  [[nodiscard]] const Vector& sinc2_half_values() const noexcept { return sinc2_half_; }

  /// F(hA) v = Q diag(f(h lambda)) Q^T v
  template <class F>
  [[nodiscard]] Vector apply(F&& f, std::span<const double> v) const {
    const std::size_t m = v.size();
    const DenseMatrix& q = eig_.eigenvectors;
    Vector c(m, 0.0), out(m, 0.0);
    for (std::size_t l = 0; l < m; ++l) {
      for (std::size_t i = 0; i < m; ++i) c[l] += q(i, l) * v[i];
      c[l] *= f(eig_.eigenvalues[l]);
    }
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t l = 0; l < m; ++l) out[i] += q(i, l) * c[l];
    return out;
  }

  [[nodiscard]] const DenseMatrix& cos_hA() const noexcept { return cos_matrix_; }
  [[nodiscard]] const DenseMatrix& h_sinc_hA() const noexcept { return h_sinc_matrix_; }
  [[nodiscard]] const DenseMatrix& A_sin_hA() const noexcept { return a_sin_matrix_; }
  [[nodiscard]] const DenseMatrix& gautschi_psi() const noexcept { return gautschi_psi_; }
  [[nodiscard]] const DenseMatrix& gautschi_psi0() const noexcept { return gautschi_psi0_; }
  [[nodiscard]] const DenseMatrix& gautschi_psi1() const noexcept { return gautschi_psi1_; }
  [[nodiscard]] const DenseMatrix& deuflhard_psi() const noexcept { return deuflhard_psi_; }
  [[nodiscard]] const DenseMatrix& identity() const noexcept { return identity_; }

 private:
  [[nodiscard]] DenseMatrix from_values(const Vector& values) const {
    std::size_t idx = 0;
    return eig_.apply_function([&](double) { return values[idx++]; });
  }

  double h_;
  SymEig eig_;
  Vector cos_, sin_, sinc_, sinc2_half_;
  DenseMatrix cos_matrix_, h_sinc_matrix_, a_sin_matrix_;
  DenseMatrix gautschi_psi_, gautschi_psi0_, gautschi_psi1_, deuflhard_psi_, identity_;
};

namespace detail {

inline Vector force(const SecondOrderProblem& p2, std::span<const double> q) {
  Vector g(q.size(), 0.0);
  if (p2.grad_f) {
    p2.grad_f(q, g);
    for (double& x : g) x = -x;
  }
  return g;
}

/// -A^2 q - grad f(q)
inline Vector acceleration(const SecondOrderProblem& p2, std::span<const double> q) {
  const Vector aq = p2.A * q;
  Vector acc = p2.A * std::span<const double>(aq);
  const Vector g = force(p2, q);
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = g[i] - acc[i];
  return acc;
}

inline State2 trig_step(std::span<const double> q, std::span<const double> v, double h, const SecondOrderProblem& p2,
                        const TrigKernel& kernel, const DenseMatrix& psi, const DenseMatrix& psi0,
                        const DenseMatrix& psi1) {
  const std::size_t m = q.size();
  const Vector gn = force(p2, q);
  const Vector cq = kernel.cos_hA() * q;
  const Vector sv = kernel.h_sinc_hA() * v;
  const Vector pg = psi * std::span<const double>(gn);
  Vector q1(m);
  for (std::size_t i = 0; i < m; ++i) q1[i] = cq[i] + sv[i] + 0.5 * h * h * pg[i];
  const Vector g1 = force(p2, q1);
  const Vector asq = kernel.A_sin_hA() * q;
  const Vector cv = kernel.cos_hA() * v;
  const Vector p0 = psi0 * std::span<const double>(gn);
  const Vector p1 = psi1 * std::span<const double>(g1);
  Vector v1(m);
  for (std::size_t i = 0; i < m; ++i) v1[i] = -asq[i] + cv[i] + 0.5 * h * (p0[i] + p1[i]);
  return {std::move(q1), std::move(v1)};
}

}  // namespace detail

/// Kick-drift-kick leapfrog.
inline State2 stormer_verlet_step(std::span<const double> q, std::span<const double> v, double h,
                                  const SecondOrderProblem& p2) {
  const std::size_t m = q.size();
  const Vector a0 = detail::acceleration(p2, q);
  Vector vh(m), q1(m);
  for (std::size_t i = 0; i < m; ++i) {
    vh[i] = v[i] + 0.5 * h * a0[i];
    q1[i] = q[i] + h * vh[i];
  }
  const Vector a1 = detail::acceleration(p2, q1);
  for (std::size_t i = 0; i < m; ++i) vh[i] += 0.5 * h * a1[i];
  return {std::move(q1), std::move(vh)};
}

inline State2 gautschi_step(std::span<const double> q, std::span<const double> v, double h,
                            const SecondOrderProblem& p2, const TrigKernel& kernel) {
  return detail::trig_step(q, v, h, p2, kernel, kernel.gautschi_psi(), kernel.gautschi_psi0(),
                           kernel.gautschi_psi1());
}

inline State2 deuflhard_step(std::span<const double> q, std::span<const double> v, double h,
                             const SecondOrderProblem& p2, const TrigKernel& kernel) {
  return detail::trig_step(q, v, h, p2, kernel, kernel.deuflhard_psi(), kernel.cos_hA(),
                           kernel.identity());
}

}  // namespace oscil
