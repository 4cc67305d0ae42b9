#include <Eigen/Dense>

#include "doctest.h"
#include "minimalist/linalg.hpp"
#include "support.hpp"

using namespace minimalist;
using namespace minimalist::linalg;
using testing::rel_err;

namespace {

Eigen::MatrixXd to_eigen(const Matrix<double>& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j);
  return out;
}

Matrix<double> random_symmetric(std::size_t n, Rng& rng) {
  Matrix<double> a = testing::gaussian_matrix(n, n, rng);
  Matrix<double> s(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
  return s;
}

template <class T>
double reconstruction_error(const Matrix<T>& a, const ThinSVD<T>& svd) {
  double err = 0.0;
  double ref = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      T s(0);
      for (std::size_t k = 0; k < svd.rank; ++k) s += svd.singular_values[k] * svd.left(i, k) * svd.right(j, k);
      const double diff = to_double(T(s - a(i, j)));
      err += diff * diff;
      ref += to_double(a(i, j)) * to_double(a(i, j));
    }
  return std::sqrt(err / ref);
}

double orthonormality_error(const Matrix<double>& q) {
  const Matrix<double> g = gram(q);
  double e = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) e = std::max(e, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
  return e;
}

}  // namespace

TEST_CASE("thin_svd on identity and diagonal inputs") {
  const auto id = thin_svd(Matrix<double>::identity(2), 1e-12);
  CHECK(id.rank == 2);
  CHECK(id.singular_values[0] == doctest::Approx(1.0));
  CHECK(id.singular_values[1] == doctest::Approx(1.0));

  const auto diag = thin_svd(Matrix<double>(2, 2, {3, 0, 0, 0}));
  REQUIRE(diag.rank == 1);
  CHECK(diag.singular_values[0] == doctest::Approx(3.0));

  const auto zero = thin_svd(Matrix<double>(3, 2));
  CHECK(zero.rank == 0);
}

TEST_CASE("thin_svd matches the AᵀA eigendecomposition and reconstructs") {
  Rng rng(11);
  for (auto [n, d] : {std::pair<std::size_t, std::size_t>{4, 3}, {3, 5}, {10, 10}, {64, 7}, {6, 40}}) {
    const Matrix<double> a = testing::gaussian_matrix(n, d, rng);
    const auto svd = thin_svd(a);
    CHECK(svd.rank == std::min(n, d));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(gram(a)));
    Eigen::VectorXd ev = es.eigenvalues().reverse();
    for (std::size_t k = 0; k < svd.rank; ++k) CHECK(rel_err(svd.singular_values[k], std::sqrt(ev[k])) < 1e-10);
    CHECK(reconstruction_error(a, svd) < 1e-10);
    CHECK(orthonormality_error(svd.left) < 1e-10);
    CHECK(orthonormality_error(svd.right) < 1e-10);
    for (std::size_t k = 0; k < svd.rank; ++k) {
      for (std::size_t j = 0; j < d; ++j) {
        if (std::abs(svd.right(j, k)) > 1e-12) {
          CHECK(svd.right(j, k) > 0.0);
          break;
        }
      }
    }
  }
}

TEST_CASE("thin_svd drops singular values below the rank tolerance") {
  Rng rng(3);
  const Matrix<double> u = testing::gaussian_matrix(6, 2, rng);
  const Matrix<double> v = testing::gaussian_matrix(2, 5, rng);
  const Matrix<double> a = matmul(u, v);  // rank 2
  const auto svd = thin_svd(a);
  CHECK(svd.rank == 2);
  CHECK(reconstruction_error(a, svd) < 1e-10);
}

TEST_CASE("thin_svd rejects non-finite input and bad tolerance") {
  Matrix<double> a(2, 2, {1, 2, std::nan(""), 4});
  CHECK_THROWS_AS(thin_svd(a), InvalidInput);
  CHECK_THROWS_AS(thin_svd(Matrix<double>::identity(2), 0.0), InvalidInput);
}

TEST_CASE("thin_svd at binary32 and extended precision") {
  Rng rng(5);
  const Matrix<double> a = testing::gaussian_matrix(5, 4, rng);
  const auto ref = thin_svd(a);

  const auto f = thin_svd(a.cast<float>());
  REQUIRE(f.rank == ref.rank);
  for (std::size_t k = 0; k < f.rank; ++k) CHECK(rel_err(f.singular_values[k], ref.singular_values[k]) < 1e-5);

  const auto e = thin_svd(a.cast<DoubleDouble>());
  REQUIRE(e.rank == ref.rank);
  for (std::size_t k = 0; k < e.rank; ++k)
    CHECK(rel_err(to_double(e.singular_values[k]), ref.singular_values[k]) < 1e-14);
  CHECK(reconstruction_error(a.cast<DoubleDouble>(), e) < 1e-28);
}

TEST_CASE("sym_eig_max on small known matrices") {
  const auto d = sym_eig_max(Matrix<double>(2, 2, {2, 0, 0, 1}));
  CHECK(d.value == doctest::Approx(2.0));
  CHECK(std::abs(d.vector[0]) == doctest::Approx(1.0));

  const auto b = sym_eig_max(Matrix<double>(3, 3, {0, 3, 4, 3, 0, 0, 4, 0, 0}));
  CHECK(b.value == doctest::Approx(5.0).epsilon(1e-14));
}

TEST_CASE("sym_eig_max agrees with a full eigendecomposition and bounds Rayleigh quotients") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + trial % 9;
    const Matrix<double> m = random_symmetric(n, rng);
    const auto top = sym_eig_max(m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(m));
    CHECK(rel_err(top.value, es.eigenvalues().maxCoeff()) < 1e-10);

    const auto mx = matvec<double>(m, top.vector);
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) res += (mx[i] - top.value * top.vector[i]) * (mx[i] - top.value * top.vector[i]);
    CHECK(std::sqrt(res) <= 1e-8 * std::max(1.0, std::abs(top.value)));

    for (int k = 0; k < 100; ++k) {
      auto x = testing::gaussian_vector(n, rng);
      const double nx = norm<double>(x);
      for (auto& xi : x) xi /= nx;
      CHECK(top.value >= dot<double>(x, matvec<double>(m, x)) - 1e-12);
    }
  }
}

TEST_CASE("full Jacobi decomposition is orthonormal and sorted") {
  Rng rng(23);
  const Matrix<double> m = random_symmetric(8, rng);
  const auto eig = sym_eig_jacobi(m);
  for (std::size_t k = 1; k < eig.values.size(); ++k) CHECK(eig.values[k - 1] >= eig.values[k]);
  CHECK(orthonormality_error(eig.vectors) < 1e-12);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(m));
  for (std::size_t k = 0; k < 8; ++k) CHECK(std::abs(eig.values[k] - es.eigenvalues()[7 - k]) < 1e-12);
}

TEST_CASE("power iteration path agrees with Jacobi") {
  Rng rng(29);
  Matrix<double> m = random_symmetric(30, rng);
  for (std::size_t i = 0; i < 30; ++i) m(i, i) += 30.0 * (i == 4);  // separated top eigenvalue
  const auto p = sym_eig_max_power(m);
  const auto j = sym_eig_max(m);
  CHECK(rel_err(p.value, j.value) < 1e-10);
}

TEST_CASE("sym_eig_max input validation") {
  CHECK_THROWS_AS(sym_eig_max(Matrix<double>(2, 2, {1, 2, 3, 1})), InvalidInput);
  CHECK_THROWS_AS(sym_eig_max(Matrix<double>(2, 3)), InvalidInput);
  CHECK_THROWS_AS(sym_eig_max(Matrix<double>(2, 2, {1, INFINITY, INFINITY, 1})), InvalidInput);
}

TEST_CASE("power iteration reports the best iterate when capped") {
  // Three iterations cannot reach the tolerance on a random 600x600 matrix.
  Rng rng(31);
  const Matrix<double> m = random_symmetric(600, rng);
  try {
    sym_eig_max_power(m, 1e-12, 3);
    FAIL("expected a convergence error");
  } catch (const ConvergenceError& e) {
    CHECK(e.best_vector().size() == 600);
    CHECK(std::isfinite(e.best_value()));
  }
}

TEST_CASE("spectral_norm") {
  CHECK(spectral_norm(Matrix<double>(3, 2)) == 0.0);
  CHECK(spectral_norm(Matrix<double>(3, 3, {0, 3, 4, 3, 0, 0, 4, 0, 0})) == doctest::Approx(5.0).epsilon(1e-14));
  Rng rng(37);
  const Matrix<double> a = testing::gaussian_matrix(3, 5, rng);
  CHECK(rel_err(spectral_norm(a), thin_svd(a).singular_values[0]) < 1e-10);
  CHECK(rel_err(spectral_norm(a), spectral_norm(a.transposed())) < 1e-10);
}

TEST_CASE("bordered matrix [[0, v], [vᵀ, 0]] has norm ||v||") {
  Rng rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + trial % 12;
    const auto v = testing::gaussian_vector(n, rng);
    Matrix<double> a(n + 1, n + 1);
    for (std::size_t i = 0; i < n; ++i) {
      a(i, n) = v[i];
      a(n, i) = v[i];
    }
    CHECK(rel_err(spectral_norm(a), norm<double>(v)) < 1e-10);
  }
}

TEST_CASE("DoubleDouble arithmetic carries ~106 bits") {
  const DoubleDouble one(1.0);
  const DoubleDouble tiny(std::ldexp(1.0, -80));
  CHECK(to_double((one + tiny) - one) == std::ldexp(1.0, -80));

  const DoubleDouble two(2.0);
  const DoubleDouble r = sqrt(two);
  const DoubleDouble err = r * r - two;
  CHECK(std::abs(to_double(err)) < 1e-30);

  const DoubleDouble third = one / DoubleDouble(3.0);
  CHECK(std::abs(to_double(third * DoubleDouble(3.0) - one)) < 1e-31);
  CHECK(DoubleDouble(1.0) < DoubleDouble(1.0, 1e-20));
  CHECK(is_finite(DoubleDouble(1.0)));
  CHECK_FALSE(is_finite(std::numeric_limits<DoubleDouble>::infinity()));
}

TEST_CASE("precision tags parse and print") {
  CHECK(parse_precision("binary32") == Precision::binary32);
  CHECK(parse_precision("binary64") == Precision::binary64);
  CHECK(parse_precision("extended") == Precision::extended);
  CHECK(to_string(Precision::extended) == "extended");
  CHECK_THROWS_AS(parse_precision("half"), InvalidInput);
}

TEST_CASE("embedded decimal literals round-trip at binary64") {
  const double lit = 1.54099607;
  CHECK(std::strtod("1.54099607", nullptr) == lit);
  CHECK(static_cast<double>(DoubleDouble(lit)) == lit);
}
