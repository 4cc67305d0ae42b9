#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "minimalist/dataset.hpp"
#include "minimalist/linalg.hpp"
#include "minimalist/model.hpp"
#include "minimalist/rng.hpp"

namespace testing {

using minimalist::Dataset;
using minimalist::Rng;
using minimalist::linalg::Matrix;

inline double rel_err(double got, double want, double floor = 1e-300) {
  return std::abs(got - want) / std::max(std::abs(want), floor);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

inline Matrix<double> gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix<double> m(rows, cols);
  for (auto& x : m.entries()) x = rng.normal();
  return m;
}

inline std::vector<double> gaussian_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

/// Random dataset with singular values spread over [lo, 1] * scale, so the
/// Hessians stay well conditioned. N x d with rank min(N, d).
inline Dataset conditioned_dataset(std::size_t n, std::size_t d, Rng& rng, double lo = 0.3) {
  const std::size_t k = std::min(n, d);
  // Orthonormal columns by Gram-Schmidt on Gaussian draws.
  auto orthonormal = [&](std::size_t rows) {
    Matrix<double> q(rows, k);
    for (std::size_t j = 0; j < k; ++j) {
      std::vector<double> c = gaussian_vector(rows, rng);
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t p = 0; p < j; ++p) {
          double dot = 0.0;
          for (std::size_t i = 0; i < rows; ++i) dot += c[i] * q(i, p);
          for (std::size_t i = 0; i < rows; ++i) c[i] -= dot * q(i, p);
        }
      double nrm = 0.0;
      for (double x : c) nrm += x * x;
      nrm = std::sqrt(nrm);
      for (std::size_t i = 0; i < rows; ++i) q(i, j) = c[i] / nrm;
    }
    return q;
  };
  const Matrix<double> e = orthonormal(n);
  const Matrix<double> w = orthonormal(d);
  Dataset ds;
  ds.X = Matrix<double>(n, d);
  for (std::size_t j = 0; j < k; ++j) {
    const double s = k == 1 ? 1.0 : 1.0 - (1.0 - lo) * static_cast<double>(j) / static_cast<double>(k - 1);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < d; ++b) ds.X(a, b) += s * e(a, j) * w(b, j);
  }
  ds.y = gaussian_vector(n, rng);
  return ds;
}

template <class F>
std::vector<double> central_gradient(F&& f, std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    x[i] = xi + h;
    const double fp = f(x);
    x[i] = xi - h;
    const double fm = f(x);
    x[i] = xi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline Dataset identity_dataset() {
  Dataset ds;
  ds.X = Matrix<double>::identity(2);
  ds.y = {1.0, 0.0};
  return ds;
}

}  // namespace testing
