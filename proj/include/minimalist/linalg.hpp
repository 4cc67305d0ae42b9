#pragma once

// Dense kernels shared by every other module. All routines are templates
// over the run scalar (float, double, DoubleDouble) so that a run never
// widens silently.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "minimalist/errors.hpp"
#include "minimalist/scalar.hpp"

namespace minimalist::linalg {

template <class T>
using Vector = std::vector<T>;

/// Row-major dense matrix.
template <class T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), entries_(rows * cols, T(0)) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> entries)
      : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    if (entries_.size() != rows_ * cols_) {
      throw InvalidInput("Matrix: entries length " + std::to_string(entries_.size()) + " != " +
                         std::to_string(rows_) + "x" + std::to_string(cols_));
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return entries_.empty(); }

  T& operator()(std::size_t i, std::size_t j) { return entries_[i * cols_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return entries_[i * cols_ + j]; }

  std::span<T> row(std::size_t i) { return {entries_.data() + i * cols_, cols_}; }
  std::span<const T> row(std::size_t i) const { return {entries_.data() + i * cols_, cols_}; }
  Vector<T> col(std::size_t j) const {
    Vector<T> out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
  }

  std::span<const T> entries() const { return entries_; }
  std::span<T> entries() { return entries_; }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  template <class U>
  Matrix<U> cast() const {
    std::vector<U> e(entries_.size());
    std::transform(entries_.begin(), entries_.end(), e.begin(), [](const T& x) { return scalar_cast<U>(x); });
    return Matrix<U>(rows_, cols_, std::move(e));
  }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.entries_ == b.entries_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> entries_;
};

template <class U, class T>
Vector<U> cast_vector(std::span<const T> v) {
  Vector<U> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](const T& x) { return scalar_cast<U>(x); });
  return out;
}

template <class T>
T dot(std::span<const T> a, std::span<const T> b) {
  T s(0);
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <class T>
T norm(std::span<const T> a) {
  using std::sqrt;
  return sqrt(dot(a, a));
}

template <class T>
T frobenius_norm(const Matrix<T>& a) {
  return norm(a.entries());
}

template <class T>
T max_abs(std::span<const T> a) {
  using std::abs;
  T m(0);
  for (const T& x : a) m = std::max(m, T(abs(x)));
  return m;
}

template <class T>
bool all_finite(std::span<const T> a) {
  using std::isfinite;
  return std::all_of(a.begin(), a.end(), [](const T& x) { return bool(isfinite(x)); });
}

/// A x
template <class T>
Vector<T> matvec(const Matrix<T>& a, std::span<const T> x) {
  Vector<T> y(a.rows(), T(0));
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
  return y;
}

/// Aᵀ x
template <class T>
Vector<T> matvec_transposed(const Matrix<T>& a, std::span<const T> x) {
  Vector<T> y(a.cols(), T(0));
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += r[j] * x[i];
  }
  return y;
}

template <class T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.rows()) throw InvalidInput("matmul: inner dimensions differ");
  Matrix<T> c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const T aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

/// AᵀA
template <class T>
Matrix<T> gram(const Matrix<T>& a) {
  Matrix<T> g(a.cols(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    for (std::size_t p = 0; p < a.cols(); ++p)
      for (std::size_t q = p; q < a.cols(); ++q) g(p, q) += r[p] * r[q];
  }
  for (std::size_t p = 0; p < a.cols(); ++p)
    for (std::size_t q = 0; q < p; ++q) g(p, q) = g(q, p);
  return g;
}

// ---------------------------------------------------------------------------
// Thin SVD

template <class T>
struct ThinSVD {
  Vector<T> singular_values;  // nonincreasing, all > rank_tol * sigma_1
  Matrix<T> left;             // N x r, columns e_i
  Matrix<T> right;            // d x r, columns w_i
  std::size_t rank = 0;

  Vector<T> left_vector(std::size_t i) const { return left.col(i); }
  Vector<T> right_vector(std::size_t i) const { return right.col(i); }
};

template <class T>
T default_rank_tol() {
  if constexpr (std::is_same_v<T, float>) {
    return std::max(T(1e-9f), T(32) * std::numeric_limits<float>::epsilon());
  } else {
    return T(1e-9);
  }
}

/// Thin SVD by one-sided (Hestenes) Jacobi on the thinner orientation.
///
/// Keeps the singular triplets with sigma_i > rank_tol * sigma_1. Each right
/// vector is signed so that its first entry of magnitude > 1e-12 is positive;
/// the matching left vector is flipped with it.
template <class T>
ThinSVD<T> thin_svd(const Matrix<T>& a, T rank_tol = default_rank_tol<T>()) {
  using std::abs;
  using std::sqrt;
  if (!(rank_tol > T(0))) throw InvalidInput("thin_svd: rank_tol must be positive");
  if (!all_finite(a.entries())) throw InvalidInput("thin_svd: non-finite input");

  const bool transposed = a.rows() < a.cols();
  // Rows of `cols` are the columns of the oriented matrix B (m x n, m >= n).
  const Matrix<T> cols = transposed ? a : a.transposed();
  Matrix<T> work = cols;
  const std::size_t n = work.rows();
  const std::size_t m = work.cols();
  Matrix<T> vt = Matrix<T>::identity(n);  // rows are columns of V

  const T tol = std::numeric_limits<T>::epsilon() * T(static_cast<double>(std::max<std::size_t>(m, 1)));
  constexpr int kMaxSweeps = 80;
  bool converged = n < 2;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        auto bp = work.row(p);
        auto bq = work.row(q);
        const T alpha = dot<T>(bp, bp);
        const T beta = dot<T>(bq, bq);
        const T gamma = dot<T>(bp, bq);
        if (alpha == T(0) || beta == T(0) || gamma == T(0)) continue;
        if (!(abs(gamma) > tol * sqrt(alpha * beta))) continue;
        converged = false;
        const T zeta = (beta - alpha) / (T(2) * gamma);
        const T t = (zeta >= T(0) ? T(1) : T(-1)) / (abs(zeta) + sqrt(T(1) + zeta * zeta));
        const T c = T(1) / sqrt(T(1) + t * t);
        const T s = c * t;
        for (std::size_t k = 0; k < m; ++k) {
          const T xp = bp[k];
          const T xq = bq[k];
          bp[k] = c * xp - s * xq;
          bq[k] = s * xp + c * xq;
        }
        auto vp = vt.row(p);
        auto vq = vt.row(q);
        for (std::size_t k = 0; k < n; ++k) {
          const T xp = vp[k];
          const T xq = vq[k];
          vp[k] = c * xp - s * xq;
          vq[k] = s * xp + c * xq;
        }
      }
    }
  }
  if (!converged) throw ConvergenceError("thin_svd: one-sided Jacobi did not converge", 0.0, {});

  Vector<T> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = norm<T>(work.row(j));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return sigma[i] > sigma[j]; });

  ThinSVD<T> out;
  const T sigma1 = n > 0 ? sigma[order[0]] : T(0);
  std::size_t r = 0;
  if (sigma1 > T(0)) {
    while (r < n && sigma[order[r]] > rank_tol * sigma1) ++r;
  }
  const std::size_t rows_left = a.rows();
  const std::size_t rows_right = a.cols();
  out.rank = r;
  out.singular_values.resize(r);
  out.left = Matrix<T>(rows_left, r);
  out.right = Matrix<T>(rows_right, r);
  for (std::size_t k = 0; k < r; ++k) {
    const std::size_t j = order[k];
    const T s = sigma[j];
    out.singular_values[k] = s;
    // normalized B column and V column
    Vector<T> bcol(m), vcol(n);
    for (std::size_t i = 0; i < m; ++i) bcol[i] = work(j, i) / s;
    for (std::size_t i = 0; i < n; ++i) vcol[i] = vt(j, i);
    const Vector<T>& lvec = transposed ? vcol : bcol;
    const Vector<T>& rvec = transposed ? bcol : vcol;
    T sign(1);
    for (const T& x : rvec) {
      if (abs(x) > T(1e-12)) {
        sign = x > T(0) ? T(1) : T(-1);
        break;
      }
    }
    for (std::size_t i = 0; i < rows_left; ++i) out.left(i, k) = sign * lvec[i];
    for (std::size_t i = 0; i < rows_right; ++i) out.right(i, k) = sign * rvec[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Symmetric eigenproblems

template <class T>
struct EigenPair {
  T value;
  Vector<T> vector;
};

/// Full decomposition; values sorted nonincreasing, vectors as columns.
template <class T>
struct SymmetricEigen {
  Vector<T> values;
  Matrix<T> vectors;
};

template <class T>
void require_symmetric(const Matrix<T>& m, const char* who) {
  using std::abs;
  if (m.rows() != m.cols()) throw InvalidInput(std::string(who) + ": matrix is not square");
  if (!all_finite(m.entries())) throw InvalidInput(std::string(who) + ": non-finite input");
  const T scale = max_abs(m.entries());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j)
      if (abs(m(i, j) - m(j, i)) > T(1e-10) * scale)
        throw InvalidInput(std::string(who) + ": matrix is not symmetric");
}

/// Cyclic Jacobi rotations until the off-diagonal mass is below
/// epsilon * ||M||_F.
template <class T>
SymmetricEigen<T> sym_eig_jacobi(Matrix<T> a) {
  using std::abs;
  using std::sqrt;
  require_symmetric(a, "sym_eig_jacobi");
  const std::size_t n = a.rows();
  Matrix<T> v = Matrix<T>::identity(n);
  const T frob = frobenius_norm(a);
  const T target = std::numeric_limits<T>::epsilon() * frob;
  constexpr int kMaxSweeps = 100;

  auto off_norm = [&] {
    T s(0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) s += a(i, j) * a(i, j);
    return sqrt(s);
  };

  int sweep = 0;
  for (; sweep < kMaxSweeps; ++sweep) {
    if (!(off_norm() > target)) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const T apq = a(p, q);
        if (apq == T(0)) continue;
        const T theta = (a(q, q) - a(p, p)) / (T(2) * apq);
        const T t = (theta >= T(0) ? T(1) : T(-1)) / (abs(theta) + sqrt(theta * theta + T(1)));
        const T c = T(1) / sqrt(t * t + T(1));
        const T s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const T akp = a(k, p);
          const T akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const T apk = a(p, k);
          const T aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = T(0);
        a(q, p) = T(0);
        for (std::size_t k = 0; k < n; ++k) {
          const T vkp = v(k, p);
          const T vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  SymmetricEigen<T> out;
  out.values.resize(n);
  out.vectors = Matrix<T>(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  if (sweep == kMaxSweeps) {
    throw ConvergenceError("sym_eig_jacobi: sweep cap reached", to_double(out.values.empty() ? T(0) : out.values[0]),
                           cast_vector<double, T>(out.vectors.col(0)));
  }
  return out;
}

inline constexpr std::size_t kJacobiMaxDim = 512;

/// Shifted power iteration on (M + mu I), mu = ||M||_F.
template <class T>
EigenPair<T> sym_eig_max_power(const Matrix<T>& m, double rel_tol = 1e-12, int max_iter = 50000) {
  using std::abs;
  using std::sqrt;
  const std::size_t n = m.rows();
  const T mu = frobenius_norm(m);
  Vector<T> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = T(1) + T(1e-3) * T(static_cast<double>(i % 7));
  T nx = norm<T>(x);
  for (auto& xi : x) xi /= nx;
  T lambda(0);
  T best = -std::numeric_limits<T>::infinity();
  Vector<T> best_x = x;
  for (int it = 0; it < max_iter; ++it) {
    Vector<T> y = matvec<T>(m, x);
    const T rayleigh = dot<T>(x, y);
    if (rayleigh > best) {
      best = rayleigh;
      best_x = x;
    }
    for (std::size_t i = 0; i < n; ++i) y[i] += mu * x[i];
    const T ny = norm<T>(y);
    if (ny == T(0)) return {T(0), x};
    const T prev = lambda;
    lambda = rayleigh;
    for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / ny;
    if (it > 0 && abs(lambda - prev) <= T(rel_tol) * std::max(T(1), T(abs(lambda)))) {
      const Vector<T> mx = matvec<T>(m, x);
      const T lam = dot<T>(x, mx);
      T res(0);
      for (std::size_t i = 0; i < n; ++i) res += (mx[i] - lam * x[i]) * (mx[i] - lam * x[i]);
      if (sqrt(res) <= T(1e-8) * std::max(T(1), T(abs(lam)))) return {lam, x};
    }
  }
  throw ConvergenceError("sym_eig_max: power iteration cap reached", to_double(best), cast_vector<double, T>(best_x));
}

/// Algebraically largest eigenvalue of a symmetric matrix and a unit
/// eigenvector. Jacobi up to kJacobiMaxDim, shifted power iteration above.
template <class T>
EigenPair<T> sym_eig_max(const Matrix<T>& m) {
  require_symmetric(m, "sym_eig_max");
  if (m.rows() == 0) throw InvalidInput("sym_eig_max: empty matrix");
  if (m.rows() > kJacobiMaxDim) return sym_eig_max_power(m);
  const SymmetricEigen<T> e = sym_eig_jacobi(m);
  return {e.values[0], e.vectors.col(0)};
}

/// sigma_1(A) = sqrt(lambda_max(AᵀA)), using the smaller Gram matrix.
template <class T>
T spectral_norm(const Matrix<T>& a) {
  using std::sqrt;
  if (!all_finite(a.entries())) throw InvalidInput("spectral_norm: non-finite input");
  if (a.rows() == 0 || a.cols() == 0) return T(0);
  const Matrix<T> g = a.rows() >= a.cols() ? gram(a) : gram(a.transposed());
  const T lam = sym_eig_max(g).value;
  return lam > T(0) ? sqrt(lam) : T(0);
}

}  // namespace minimalist::linalg
