#pragma once

// Dense real linear algebra for small systems: LU with partial pivoting,
// cyclic Jacobi for symmetric matrices, Francis QR for the spectrum of a
// general matrix, power iteration for the 2-norm and Kronecker-structured
// block products.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "oscil/error.hpp"

namespace oscil {

using Vector = std::vector<double>;

/// Row-major dense matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::initializer_list<std::initializer_list<double>> init) {
    rows_ = init.size();
    cols_ = rows_ == 0 ? 0 : init.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& row : init) {
      if (row.size() != cols_) {
        throw Error(ErrorKind::DimensionMismatch, "ragged initializer list");
      }
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static DenseMatrix diagonal(std::span<const double> d) {
    DenseMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  [[nodiscard]] std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  [[nodiscard]] std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  [[nodiscard]] std::span<double> data() noexcept { return data_; }
  [[nodiscard]] std::span<const double> data() const noexcept { return data_; }

  [[nodiscard]] DenseMatrix transposed() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  [[nodiscard]] bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw Error(ErrorKind::DimensionMismatch, "matrix product");
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t l = 0; l < a.cols(); ++l) {
      const double ail = a(i, l);
      if (ail == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += ail * b(l, j);
    }
  return c;
}

inline DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error(ErrorKind::DimensionMismatch, "matrix sum");
  for (std::size_t i = 0; i < a.data().size(); ++i) a.data()[i] += b.data()[i];
  return a;
}

inline DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error(ErrorKind::DimensionMismatch, "matrix difference");
  for (std::size_t i = 0; i < a.data().size(); ++i) a.data()[i] -= b.data()[i];
  return a;
}

inline DenseMatrix operator*(double alpha, DenseMatrix a) {
  for (double& v : a.data()) v *= alpha;
  return a;
}

/// y = M x
inline void multiply(const DenseMatrix& m, std::span<const double> x, std::span<double> y) {
  if (m.cols() != x.size() || m.rows() != y.size()) throw Error(ErrorKind::DimensionMismatch, "matrix-vector product");
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) acc += r[j] * x[j];
    y[i] = acc;
  }
}

inline Vector operator*(const DenseMatrix& m, std::span<const double> x) {
  Vector y(m.rows());
  multiply(m, x, y);
  return y;
}

inline double norm_inf(std::span<const double> v) noexcept {
  double r = 0.0;
  for (double x : v) r = std::max(r, std::abs(x));
  return r;
}

inline double norm_2(std::span<const double> v) noexcept {
  double r = 0.0;
  for (double x : v) r += x * x;
  return std::sqrt(r);
}

inline double max_abs_entry(const DenseMatrix& m) noexcept { return norm_inf(m.data()); }

/// Kronecker product, only for tests and small oracles.
inline DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix k(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      for (std::size_t p = 0; p < b.rows(); ++p)
        for (std::size_t q = 0; q < b.cols(); ++q) k(i * b.rows() + p, j * b.cols() + q) = a(i, j) * b(p, q);
  return k;
}

// ---------------------------------------------------------------------------
// LU with partial pivoting

struct LUFactorization {
  DenseMatrix matrix;  // unit-lower L below the diagonal, U on and above
  std::vector<std::size_t> pivots;
  // Per row: first nonzero column of L and one past the last nonzero of U,
  // so banded factors solve in banded time.
  std::vector<std::size_t> lower_begin;
  std::vector<std::size_t> upper_end;

  [[nodiscard]] std::size_t size() const noexcept { return matrix.rows(); }
};

inline LUFactorization lu_factor(DenseMatrix m) {
  if (!m.square()) throw Error(ErrorKind::DimensionMismatch, "lu_factor needs a square matrix");
  if (!m.all_finite()) throw Error(ErrorKind::NonFiniteEvaluation, "lu_factor input has non-finite entries");
  const std::size_t n = m.rows();
  std::vector<std::size_t> piv(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::abs(m(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(m(i, k)) > best) {
        best = std::abs(m(i, k));
        p = i;
      }
    }
    piv[k] = p;
    if (best < 1e-300) throw Error(ErrorKind::SingularMatrix, "zero pivot in column " + std::to_string(k));
    if (p != k) std::swap_ranges(m.row(k).begin(), m.row(k).end(), m.row(p).begin());
    const double inv = 1.0 / m(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double l = m(i, k) * inv;
      m(i, k) = l;
      if (l == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) m(i, j) -= l * m(k, j);
    }
  }
  std::vector<std::size_t> lower_begin(n), upper_end(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t b = 0;
    while (b < i && m(i, b) == 0.0) ++b;
    lower_begin[i] = b;
    std::size_t e = n;
    while (e > i + 1 && m(i, e - 1) == 0.0) --e;
    upper_end[i] = e;
  }
  return {std::move(m), std::move(piv), std::move(lower_begin), std::move(upper_end)};
}

/// Solves in place: b <- M^{-1} b.
inline void lu_solve_inplace(const LUFactorization& f, std::span<double> b) {
  const std::size_t n = f.size();
  if (b.size() != n) throw Error(ErrorKind::DimensionMismatch, "lu_solve right-hand side");
  const DenseMatrix& a = f.matrix;
  for (std::size_t k = 0; k < n; ++k)
    if (f.pivots[k] != k) std::swap(b[k], b[f.pivots[k]]);
  for (std::size_t i = 1; i < n; ++i) {
    double acc = b[i];
    for (std::size_t j = f.lower_begin[i]; j < i; ++j) acc -= a(i, j) * b[j];
    b[i] = acc;
  }
  for (std::size_t i = n; i-- > 0;) {
    double acc = b[i];
    for (std::size_t j = i + 1; j < f.upper_end[i]; ++j) acc -= a(i, j) * b[j];
    b[i] = acc / a(i, i);
  }
}

inline Vector lu_solve(const LUFactorization& f, std::span<const double> b) {
  Vector x(b.begin(), b.end());
  lu_solve_inplace(f, x);
  return x;
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition (cyclic Jacobi)

struct SymEig {
  Vector eigenvalues;       // ascending
  DenseMatrix eigenvectors;  // columns

  /// Q diag(f(lambda)) Q^T
  template <class F>
  [[nodiscard]] DenseMatrix apply_function(F&& f) const {
    const std::size_t n = eigenvalues.size();
    DenseMatrix r(n, n);
    for (std::size_t l = 0; l < n; ++l) {
      const double fl = f(eigenvalues[l]);
      for (std::size_t i = 0; i < n; ++i) {
        const double qil = eigenvectors(i, l) * fl;
        for (std::size_t j = 0; j < n; ++j) r(i, j) += qil * eigenvectors(j, l);
      }
    }
    return r;
  }
};

inline bool is_symmetric(const DenseMatrix& m, double rel_tol = 1e-12) {
  if (!m.square()) return false;
  const double scale = std::max(max_abs_entry(m), std::numeric_limits<double>::min());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j)
      if (std::abs(m(i, j) - m(j, i)) > rel_tol * scale) return false;
  return true;
}

inline SymEig sym_eig(const DenseMatrix& input) {
  if (!is_symmetric(input)) throw Error(ErrorKind::NotSymmetric, "sym_eig input is not symmetric");
  const std::size_t n = input.rows();
  DenseMatrix a = input;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (input(i, j) + input(j, i));
  DenseMatrix v = DenseMatrix::identity(n);

  const double total = std::max(norm_2(a.data()), std::numeric_limits<double>::min());
  constexpr int max_sweeps = 100;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (std::sqrt(off) <= 1e-17 * total) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });
  SymEig out{Vector(n), DenseMatrix(n, n)};
  for (std::size_t l = 0; l < n; ++l) {
    out.eigenvalues[l] = a(order[l], order[l]);
    for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, l) = v(i, order[l]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spectrum of a general real matrix

namespace detail {

/// Householder reduction to upper Hessenberg form, in place.
inline void to_hessenberg(DenseMatrix& a) {
  const std::size_t n = a.rows();
  if (n < 3) return;
  Vector v(n);
  for (std::size_t k = 0; k + 2 < n; ++k) {
    double alpha = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) alpha += a(i, k) * a(i, k);
    alpha = std::sqrt(alpha);
    if (alpha == 0.0) continue;
    if (a(k + 1, k) > 0) alpha = -alpha;
    std::fill(v.begin(), v.end(), 0.0);
    v[k + 1] = a(k + 1, k) - alpha;
    for (std::size_t i = k + 2; i < n; ++i) v[i] = a(i, k);
    double vnorm2 = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) vnorm2 += v[i] * v[i];
    if (vnorm2 == 0.0) continue;
    // A <- H A H, H = I - 2 v v^T / (v^T v)
    for (std::size_t j = 0; j < n; ++j) {
      double d = 0.0;
      for (std::size_t i = k + 1; i < n; ++i) d += v[i] * a(i, j);
      d *= 2.0 / vnorm2;
      for (std::size_t i = k + 1; i < n; ++i) a(i, j) -= d * v[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      double d = 0.0;
      for (std::size_t j = k + 1; j < n; ++j) d += a(i, j) * v[j];
      d *= 2.0 / vnorm2;
      for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= d * v[j];
    }
    for (std::size_t i = k + 2; i < n; ++i) a(i, k) = 0.0;
  }
}

}  // namespace detail

struct ComplexEigenvalue {
  double re;
  double im;
};

/// All eigenvalues of a general real square matrix via Hessenberg reduction
/// and Francis double-shift QR. Budget: 500 * n iterations in total.
inline std::vector<ComplexEigenvalue> eigenvalues(const DenseMatrix& input) {
  if (!input.square()) throw Error(ErrorKind::DimensionMismatch, "eigenvalues needs a square matrix");
  const int n = static_cast<int>(input.rows());
  std::vector<ComplexEigenvalue> out(static_cast<std::size_t>(n));
  if (n == 0) return out;
  DenseMatrix a = input;
  detail::to_hessenberg(a);

  double anorm = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::abs(a(i, j));

  const double eps = std::numeric_limits<double>::epsilon();
  const long budget = 500L * n;
  long total_iters = 0;
  int nn = n - 1;
  double shift = 0.0;
  double p = 0, q = 0, r = 0, s = 0, w = 0, x = 0, y = 0, z = 0;
  while (nn >= 0) {
    int its = 0;
    int l = 0;
    do {
      for (l = nn; l > 0; --l) {
        s = std::abs(a(l - 1, l - 1)) + std::abs(a(l, l));
        if (s == 0.0) s = anorm;
        if (std::abs(a(l, l - 1)) <= eps * s) {
          a(l, l - 1) = 0.0;
          break;
        }
      }
      x = a(nn, nn);
      if (l == nn) {
        out[nn] = {x + shift, 0.0};
        --nn;
      } else {
        y = a(nn - 1, nn - 1);
        w = a(nn, nn - 1) * a(nn - 1, nn);
        if (l == nn - 1) {
          p = 0.5 * (y - x);
          q = p * p + w;
          z = std::sqrt(std::abs(q));
          x += shift;
          if (q >= 0.0) {
            z = p + std::copysign(z, p);
            out[nn - 1] = out[nn] = {x + z, 0.0};
            if (z != 0.0) out[nn].re = x - w / z;
          } else {
            out[nn - 1] = {x + p, z};
            out[nn] = {x + p, -z};
          }
          nn -= 2;
        } else {
          if (++total_iters > budget) throw Error(ErrorKind::NoConvergence, "QR eigenvalue iteration budget exhausted");
          if (its == 10 || its == 20) {
            // exceptional shift
            shift += x;
            for (int i = 0; i <= nn; ++i) a(i, i) -= x;
            s = std::abs(a(nn, nn - 1)) + std::abs(a(nn - 1, nn - 2));
            y = x = 0.75 * s;
            w = -0.4375 * s * s;
          }
          ++its;
          int m = nn - 2;
          for (; m >= l; --m) {
            z = a(m, m);
            r = x - z;
            s = y - z;
            p = (r * s - w) / a(m + 1, m) + a(m, m + 1);
            q = a(m + 1, m + 1) - z - r - s;
            r = a(m + 2, m + 1);
            s = std::abs(p) + std::abs(q) + std::abs(r);
            p /= s;
            q /= s;
            r /= s;
            if (m == l) break;
            const double u = std::abs(a(m, m - 1)) * (std::abs(q) + std::abs(r));
            const double v = std::abs(p) * (std::abs(a(m - 1, m - 1)) + std::abs(z) + std::abs(a(m + 1, m + 1)));
            if (u <= eps * v) break;
          }
          for (int i = m; i < nn - 1; ++i) {
            a(i + 2, i) = 0.0;
            if (i != m) a(i + 2, i - 1) = 0.0;
          }
          for (int k = m; k < nn; ++k) {
            if (k != m) {
              p = a(k, k - 1);
              q = a(k + 1, k - 1);
              r = (k + 1 != nn) ? a(k + 2, k - 1) : 0.0;
              x = std::abs(p) + std::abs(q) + std::abs(r);
              if (x != 0.0) {
                p /= x;
                q /= x;
                r /= x;
              }
            }
            s = std::copysign(std::sqrt(p * p + q * q + r * r), p);
            if (s == 0.0) continue;
            if (k == m) {
              if (l != m) a(k, k - 1) = -a(k, k - 1);
            } else {
              a(k, k - 1) = -s * x;
            }
            p += s;
            x = p / s;
            y = q / s;
            z = r / s;
            q /= p;
            r /= p;
            for (int j = k; j <= nn; ++j) {
              p = a(k, j) + q * a(k + 1, j);
              if (k + 1 != nn) {
                p += r * a(k + 2, j);
                a(k + 2, j) -= p * z;
              }
              a(k + 1, j) -= p * y;
              a(k, j) -= p * x;
            }
            const int mmin = nn < k + 3 ? nn : k + 3;
            for (int i = l; i <= mmin; ++i) {
              p = x * a(i, k) + y * a(i, k + 1);
              if (k + 1 != nn) {
                p += z * a(i, k + 2);
                a(i, k + 2) -= p * r;
              }
              a(i, k + 1) -= p * q;
              a(i, k) -= p;
            }
          }
        }
      }
    } while (l < nn - 1);
  }
  return out;
}

/// min |lambda| over the (complex) spectrum of M.
inline double small_eigenvalue_min_modulus(const DenseMatrix& m) {
  if (!m.square() || m.rows() == 0) throw Error(ErrorKind::DimensionMismatch, "min-modulus eigenvalue needs a square matrix");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& ev : eigenvalues(m)) best = std::min(best, std::hypot(ev.re, ev.im));
  return best;
}

/// ||M||_2 by power iteration on M^T M.
inline double spectral_norm(const DenseMatrix& m) {
  if (!m.square()) throw Error(ErrorKind::DimensionMismatch, "spectral_norm needs a square matrix");
  const std::size_t n = m.rows();
  if (n == 0) return 0.0;
  if (max_abs_entry(m) == 0.0) return 0.0;
  // Fixed, non-symmetric start vector so no eigenvector is missed by accident.
  Vector v(n), mv(n), mtmv(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + 0.1 * std::sin(1.0 + static_cast<double>(i));
  double nv = norm_2(v);
  for (double& x : v) x /= nv;
  const DenseMatrix mt = m.transposed();
  double estimate = 0.0;
  for (int it = 0; it < 10000; ++it) {
    multiply(m, v, mv);
    multiply(mt, mv, mtmv);
    const double lambda = std::inner_product(v.begin(), v.end(), mtmv.begin(), 0.0);
    const double nrm = norm_2(mtmv);
    if (nrm == 0.0) return 0.0;
    for (std::size_t i = 0; i < n; ++i) v[i] = mtmv[i] / nrm;
    if (it > 0 && std::abs(lambda - estimate) <= 1e-12 * lambda) {
      // Rayleigh quotient converges at twice the rate of the vector;
      // one more product gives the norm at full precision.
      multiply(m, v, mv);
      return norm_2(mv);
    }
    estimate = lambda;
  }
  throw Error(ErrorKind::NoConvergence, "spectral_norm power iteration");
}

/// result block i = sum_j M(i,j) * block j of v, block size n = v.size() / M.cols().
inline void kron_apply(const DenseMatrix& m, std::span<const double> v, std::span<double> out) {
  const std::size_t s = m.cols();
  if (s == 0 || v.size() % s != 0 || out.size() != m.rows() * (v.size() / s)) {
    throw Error(ErrorKind::DimensionMismatch, "kron_apply block layout");
  }
  const std::size_t n = v.size() / s;
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < s; ++j) {
      const double mij = m(i, j);
      if (mij == 0.0) continue;
      for (std::size_t t = 0; t < n; ++t) out[i * n + t] += mij * v[j * n + t];
    }
}

inline Vector kron_apply(const DenseMatrix& m, std::span<const double> v) {
  if (m.cols() == 0 || v.size() % m.cols() != 0) throw Error(ErrorKind::DimensionMismatch, "kron_apply block layout");
  Vector out(m.rows() * (v.size() / m.cols()));
  kron_apply(m, v, out);
  return out;
}

}  // namespace oscil
