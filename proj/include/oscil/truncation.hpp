#pragma once

// Round-off level truncation of the Legendre expansion in time.
//
// The Legendre-Fourier coefficients of cos/sin(omega*h*c) on [0,1] are bounded
// by g(s, omega*h) = sqrt(2s+1) |j_s(omega*h/2)|, j_s the spherical Bessel
// function. The truncation index phi_u(x) is the first s at which g(s, x)
// drops below u times the largest earlier coefficient.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "oscil/error.hpp"
#include "oscil/linalg.hpp"

namespace oscil {

/// Unit roundoff of IEEE double (half the spacing of doubles at 1).
inline constexpr double kUnitRoundoff = 0x1p-53;
inline constexpr double kDoubleEpsilon = 0x1p-52;
inline constexpr std::size_t kMaxTruncationIndex = 1024;

/// [j_0(x), ..., j_{s_max}(x)] by Miller's downward recurrence.
inline Vector spherical_bessel_j(std::size_t s_max, double x) {
  if (!(x > 0.0)) throw Error(ErrorKind::DimensionMismatch, "spherical_bessel_j needs x > 0");
  if (s_max > kMaxTruncationIndex) throw Error(ErrorKind::Overflow, "spherical_bessel_j order above 1024");
  Vector out(s_max + 1, 0.0);

  // Downward recurrence is only stable once started well above both the
  // requested order and the turning point n ~ x.
  const auto margin = static_cast<std::size_t>(std::ceil(std::max(20.0, x)));
  const std::size_t start = std::max(s_max, static_cast<std::size_t>(std::ceil(x))) + margin;

  double f_next = 0.0;   // f_{n+1}
  double f_cur = 1e-30;  // f_n
  for (std::size_t n = start; n > 0; --n) {
    const double f_prev = (2.0 * static_cast<double>(n) + 1.0) / x * f_cur - f_next;
    f_next = f_cur;
    f_cur = f_prev;
    if (n - 1 <= s_max) out[n - 1] = f_cur;
    if (std::abs(f_cur) > 1e250) {
      f_cur *= 1e-250;
      f_next *= 1e-250;
      for (std::size_t i = n - 1; i <= s_max; ++i) out[i] *= 1e-250;
    }
  }
  // f_cur = f_0, f_next = f_1 (unnormalized). Normalize against whichever of
  // j_0, j_1 is larger in magnitude to avoid dividing by a value near a zero.
  const double j0 = std::sin(x) / x;
  const double j1 = x < 1e-3 ? x / 3.0 - x * x * x / 30.0 : std::sin(x) / (x * x) - std::cos(x) / x;
  const double scale = std::abs(j0) >= std::abs(j1) ? j0 / f_cur : j1 / f_next;
  for (double& v : out) {
    v *= scale;
    if (std::abs(v) < 1e-308) v = 0.0;
  }
  return out;
}

/// g(s, x) = sqrt(2s+1) |j_s(x/2)|; bounds |int_0^1 P_s(c) cos(x c) dc| and the
/// matching sine integral.
inline double g_bound(std::size_t s, double x) {
  const Vector j = spherical_bessel_j(s, 0.5 * x);
  return std::sqrt(2.0 * static_cast<double>(s) + 1.0) * std::abs(j[s]);
}

/// g(0..s_max, x) in one recurrence.
inline Vector g_bound_all(std::size_t s_max, double x) {
  Vector g = spherical_bessel_j(s_max, 0.5 * x);
  for (std::size_t s = 0; s <= s_max; ++s) g[s] = std::sqrt(2.0 * static_cast<double>(s) + 1.0) * std::abs(g[s]);
  return g;
}

/// Smallest s0 >= 1 with g(s0, x) < u * max_{j < s0} g(j, x).
inline std::size_t phi_u(double x, double u = kUnitRoundoff) {
  if (!(x > 0.0) || !(u > 0.0) || !(u < 1.0)) throw Error(ErrorKind::DimensionMismatch, "phi_u needs x > 0, 0 < u < 1");
  const Vector g = g_bound_all(kMaxTruncationIndex, x);
  double running_max = g[0];
  for (std::size_t s0 = 1; s0 <= kMaxTruncationIndex; ++s0) {
    if (g[s0] < u * running_max) return s0;
    running_max = std::max(running_max, g[s0]);
  }
  throw Error(ErrorKind::Overflow, "no truncation index <= 1024 for omega*h = " + std::to_string(x));
}

struct SpectralParams {
  std::size_t s0 = 1;  // linear-part truncation (warm start)
  std::size_t s = 1;   // full-problem truncation
  std::size_t k = 1;   // Gauss stages
  double omega_h = 0.0;
  double nu = 1.0;
  double u = kUnitRoundoff;
};

inline std::size_t stages_for(std::size_t s) { return std::max<std::size_t>(s + 2, 20); }

inline SpectralParams select_params(double omega, double h, double nu, double u = kUnitRoundoff) {
  if (!(omega > 0.0) || !(h > 0.0) || !(nu >= 1.0)) {
    throw Error(ErrorKind::DimensionMismatch, "select_params needs omega > 0, h > 0, nu >= 1");
  }
  SpectralParams p;
  p.omega_h = omega * h;
  p.nu = nu;
  p.u = u;
  p.s0 = phi_u(p.omega_h, u);
  p.s = phi_u(nu * p.omega_h, u);
  p.k = stages_for(p.s);
  return p;
}

/// Fixed-tableau parameters: HBVM(k,s) with the warm start on s0 = s blocks.
/// With k == s this is the s-stage Gauss collocation method.
inline SpectralParams fixed_params(std::size_t s, std::size_t k, double omega_h = 0.0) {
  SpectralParams p;
  p.s0 = s;
  p.s = s;
  p.k = k;
  p.omega_h = omega_h;
  return p;
}

}  // namespace oscil
