#pragma once

// Orthonormal shifted Legendre polynomials on [0,1]:
//   P_j(c) = sqrt(2j+1) L_j(2c-1),   int_0^1 P_i P_j = delta_ij,
// their running integrals and Gauss-Legendre rules on [0,1].

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "oscil/error.hpp"
#include "oscil/linalg.hpp"

namespace oscil {

/// [P_0(c), ..., P_{s-1}(c)]
inline void legendre_all(std::size_t s, double c, std::span<double> out) {
  const double x = 2.0 * c - 1.0;
  double prev = 1.0;  // L_{j-1}
  double cur = x;     // L_j
  for (std::size_t j = 0; j < s; ++j) {
    double lj;
    if (j == 0) {
      lj = 1.0;
    } else if (j == 1) {
      lj = x;
    } else {
      const double jd = static_cast<double>(j);
      const double next = ((2.0 * jd - 1.0) * x * cur - (jd - 1.0) * prev) / jd;
      prev = cur;
      cur = next;
      lj = next;
    }
    out[j] = std::sqrt(2.0 * static_cast<double>(j) + 1.0) * lj;
  }
}

inline Vector legendre_all(std::size_t s, double c) {
  Vector out(s);
  legendre_all(s, c, out);
  return out;
}

/// [int_0^c P_0, ..., int_0^c P_{s-1}], from
///   int_0^c P_j = xi_{j+1} P_{j+1}(c) - xi_j P_{j-1}(c)  (j >= 1),
///   int_0^c P_0 = c,
/// with xi_i = 1 / (2 sqrt(4 i^2 - 1)).
inline void legendre_int_all(std::size_t s, double c, std::span<double> out) {
  if (s == 0) return;
  Vector p(s + 1);
  legendre_all(s + 1, c, p);
  out[0] = c;
  for (std::size_t j = 1; j < s; ++j) {
    const double jd = static_cast<double>(j);
    const double xi_next = 0.5 / std::sqrt(4.0 * (jd + 1.0) * (jd + 1.0) - 1.0);
    const double xi_j = 0.5 / std::sqrt(4.0 * jd * jd - 1.0);
    out[j] = xi_next * p[j + 1] - xi_j * p[j - 1];
  }
}

inline Vector legendre_int_all(std::size_t s, double c) {
  Vector out(s);
  legendre_int_all(s, c, out);
  return out;
}

/// The band coefficient xi_i = 1 / (2 sqrt(|4 i^2 - 1|)); xi_0 = 1/2.
inline double legendre_xi(std::size_t i) {
  const double id = static_cast<double>(i);
  return 0.5 / std::sqrt(std::abs(4.0 * id * id - 1.0));
}

struct QuadratureRule {
  std::size_t k = 0;
  Vector nodes;    // ascending in (0,1)
  Vector weights;  // sum to 1
};

/// k-point Gauss-Legendre rule on [0,1], exact for polynomials of degree 2k-1.
inline QuadratureRule gauss_rule(std::size_t k) {
  if (k < 1 || k > 512) throw Error(ErrorKind::DimensionMismatch, "gauss_rule supports 1 <= k <= 512");
  QuadratureRule rule{k, Vector(k), Vector(k)};
  const double kd = static_cast<double>(k);
  // Roots of L_k on [-1,1] in descending order of x; mirror the upper half.
  const std::size_t half = (k + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (kd + 0.5));
    double dl = 0.0;
    bool converged = false;
    for (int it = 0; it < 100; ++it) {
      double l0 = 1.0, l1 = x;
      for (std::size_t j = 2; j <= k; ++j) {
        const double jd = static_cast<double>(j);
        const double l2 = ((2.0 * jd - 1.0) * x * l1 - (jd - 1.0) * l0) / jd;
        l0 = l1;
        l1 = l2;
      }
      const double lk = k == 1 ? x : l1;
      const double lkm1 = k == 1 ? 1.0 : l0;
      dl = kd * (x * lk - lkm1) / (x * x - 1.0);
      const double dx = lk / dl;
      x -= dx;
      if (std::abs(dx) <= 1e-16 * std::max(1.0, std::abs(x))) {
        converged = true;
        break;
      }
    }
    if (!converged) throw Error(ErrorKind::NoConvergence, "Gauss node " + std::to_string(i) + " of " + std::to_string(k));
    // Refresh the derivative at the converged root for the weight.
    {
      double l0 = 1.0, l1 = x;
      for (std::size_t j = 2; j <= k; ++j) {
        const double jd = static_cast<double>(j);
        const double l2 = ((2.0 * jd - 1.0) * x * l1 - (jd - 1.0) * l0) / jd;
        l0 = l1;
        l1 = l2;
      }
      const double lk = k == 1 ? x : l1;
      const double lkm1 = k == 1 ? 1.0 : l0;
      dl = kd * (x * lk - lkm1) / (x * x - 1.0);
    }
    if (k % 2 == 1 && i == half - 1) x = 0.0;
    const double w = 1.0 / ((1.0 - x * x) * dl * dl);  // 2/((1-x^2)L'^2) halved for [0,1]
    const double hx = 0.5 * x;
    rule.nodes[k - 1 - i] = 0.5 + hx;
    rule.nodes[i] = 0.5 - hx;
    rule.weights[k - 1 - i] = w;
    rule.weights[i] = w;
  }
  return rule;
}

}  // namespace oscil
