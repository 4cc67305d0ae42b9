#include <Eigen/Dense>

#include "doctest.h"
#include "minimalist/model.hpp"
#include "minimalist/reparam.hpp"
#include "support.hpp"

using namespace minimalist;
using linalg::Matrix;
using testing::rel_err;

namespace {

double matrix_rel_diff(const Matrix<double>& a, const Matrix<double>& b) {
  double diff = 0.0;
  for (std::size_t i = 0; i < a.entries().size(); ++i) diff = std::max(diff, std::abs(a.entries()[i] - b.entries()[i]));
  return diff / std::max(testing::max_abs(b.entries()), 1e-300);
}

double eigen_lambda_max(const Matrix<double>& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(e).eigenvalues().maxCoeff();
}

Params<double> random_params(std::size_t d, int depth, Rng& rng, double scale = 1.0) {
  return {testing::gaussian_vector(d, rng, scale), testing::gaussian_vector(static_cast<std::size_t>(depth - 1), rng, scale)};
}

}  // namespace

TEST_CASE("forward and loss on hand examples") {
  const Samples<double> id = cast_dataset<double>(testing::identity_dataset());
  const auto f = forward(id.X, Params<double>{{1, 0}, {3}});
  CHECK(f == std::vector<double>{3, 0});
  const auto z = forward(id.X, Params<double>{{1, 2}, {2, 0, 5}});
  CHECK(z == std::vector<double>{0, 0});

  const auto rl = residual_and_loss(id, Params<double>{{1, 0}, {0}});
  CHECK(rl.loss == 0.25);
  const auto exact = residual_and_loss(id, Params<double>{{1, 0}, {1}});
  CHECK(exact.loss == 0.0);
  CHECK_THROWS_AS(forward(id.X, Params<double>{{1, 0, 0}, {1}}), InvalidInput);
  CHECK_THROWS_AS(forward(id.X, Params<double>{{1, 0}, {}}), InvalidInput);
}

TEST_CASE("edge-of-stability instance at the initial point") {
  const Samples<double> data = cast_dataset<double>(eos_demo_dataset());
  const Params<double> theta{{0.01, 0.01}, {0.01}};
  const auto f = forward(data.X, theta);
  CHECK(rel_err(f[0], 0.000124756717) < 1e-12);
  CHECK(rel_err(f[1], -0.000161035812) < 1e-12);
  CHECK(rel_err(residual_and_loss(data, theta).loss, 0.7830195500701944) < 1e-14);
  const auto sd = decompose<double>(eos_demo_dataset());
  CHECK(rel_err(sharpness(theta, sd), 0.7278644651851631) < 1e-12);
}

TEST_CASE("gradient on a hand example") {
  const Samples<double> id = cast_dataset<double>(testing::identity_dataset());
  // z = 0 at an interpolating point
  for (double g : gradient(id, Params<double>{{1, 0}, {1}})) CHECK(g == 0.0);
  // y = (1, -1) gives z = (0, 1)
  Samples<double> shifted = id;
  shifted.y = {1.0, -1.0};
  const auto g = gradient(shifted, Params<double>{{1, 0}, {1}});
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.5);
  CHECK(g[2] == 0.0);
}

TEST_CASE("gradient matches central differences") {
  Rng rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(10);
    const std::size_t d = 1 + rng.below(10);
    const int depth = 2 + static_cast<int>(rng.below(4));
    Samples<double> data{testing::gaussian_matrix(n, d, rng), testing::gaussian_vector(n, rng)};
    const Params<double> theta = random_params(d, depth, rng, 0.8);
    const auto g = gradient(data, theta);
    const auto fd = testing::central_gradient(
        [&](const std::vector<double>& x) { return residual_and_loss(data, Params<double>::unflatten(x, d)).loss; },
        theta.flatten(), 1e-6);
    CHECK(testing::max_abs_diff(g, fd) <= 1e-5 * std::max(testing::max_abs(fd), 1e-3));
  }
}

TEST_CASE("gradient u-component lies in the row space of X") {
  Rng rng(103);
  for (int trial = 0; trial < 20; ++trial) {
    const Dataset ds{testing::gaussian_matrix(3, 8, rng), testing::gaussian_vector(3, rng)};
    const auto sd = decompose<double>(ds);
    const Params<double> theta = random_params(8, 3, rng);
    auto g = gradient(cast_dataset<double>(ds), theta);
    g.resize(8);
    Params<double> as_u{g, theta.v};
    const auto s = to_reparam(as_u, sd);
    CHECK(linalg::norm<double>(s.u_perp) <= 1e-10 * linalg::norm<double>(g));
  }
}

TEST_CASE("full Hessian matches finite differences of the gradient") {
  Rng rng(107);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(5);
    const std::size_t d = 1 + rng.below(6);
    const int depth = 2 + static_cast<int>(rng.below(3));
    const Samples<double> data{testing::gaussian_matrix(n, d, rng), testing::gaussian_vector(n, rng)};
    const Params<double> theta = random_params(d, depth, rng, 0.8);
    const Matrix<double> h = hessian_full(data, theta);
    const std::size_t p = theta.size();
    Matrix<double> fd(p, p);
    const auto x0 = theta.flatten();
    for (std::size_t k = 0; k < p; ++k) {
      auto xp = x0;
      auto xm = x0;
      xp[k] += 1e-6;
      xm[k] -= 1e-6;
      const auto gp = gradient(data, Params<double>::unflatten(xp, d));
      const auto gm = gradient(data, Params<double>::unflatten(xm, d));
      for (std::size_t i = 0; i < p; ++i) fd(i, k) = (gp[i] - gm[i]) / 2e-6;
    }
    CHECK(matrix_rel_diff(h, fd) <= 1e-5);
  }
}

TEST_CASE("embedded reduced Hessian equals the full Hessian") {
  Rng rng(109);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(5);
    const std::size_t d = 1 + rng.below(6);
    const int depth = 2 + static_cast<int>(rng.below(3));
    const Dataset ds{testing::gaussian_matrix(n, d, rng), testing::gaussian_vector(n, rng)};
    const auto sd = decompose<double>(ds);
    const Params<double> theta = random_params(d, depth, rng, 0.8);
    const Matrix<double> full = hessian_full(cast_dataset<double>(ds), theta);
    const Matrix<double> emb = embed_reduced_hessian(hessian_reduced(to_reparam(theta, sd), sd), sd);
    CHECK(matrix_rel_diff(emb, full) <= 1e-10);
    CHECK(std::abs(sharpness(theta, sd) - eigen_lambda_max(full)) <= 1e-9 * std::max(1.0, std::abs(eigen_lambda_max(full))));
  }
}

TEST_CASE("D = 2 second-order term is the bordered matrix") {
  Rng rng(113);
  const Samples<double> data{testing::gaussian_matrix(4, 3, rng), testing::gaussian_vector(4, rng)};
  const Params<double> theta = random_params(3, 2, rng);
  const auto [z, loss] = residual_and_loss(data, theta);
  const Matrix<double> h = hessian_full(data, theta);
  const Matrix<double> jtj = linalg::gram(jacobian(data.X, theta));
  const auto xtz = linalg::matvec_transposed<double>(data.X, z);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      double bordered = 0.0;
      if (i < 3 && j == 3) bordered = xtz[i];
      if (i == 3 && j < 3) bordered = xtz[j];
      CHECK(std::abs(4.0 * h(i, j) - jtj(i, j) - bordered) < 1e-12);
    }
}

TEST_CASE("sharpness at the origin and at simple minimizers") {
  Rng rng(127);
  const Dataset ds{testing::gaussian_matrix(5, 3, rng), testing::gaussian_vector(5, rng)};
  const auto sd = decompose<double>(ds);
  const auto xty = linalg::matvec_transposed<double>(ds.X, ds.y);
  CHECK(rel_err(sharpness(Params<double>{{0, 0, 0}, {0}}, sd), linalg::norm<double>(xty) / 5.0) < 1e-12);

  const auto id = decompose<double>(testing::identity_dataset());
  CHECK(sharpness(Params<double>{{1, 0}, {1}}, id) == doctest::Approx(1.0).epsilon(1e-14));
  const auto k = ntk(cast_dataset<double>(testing::identity_dataset()).X, Params<double>{{1, 0}, {1}});
  CHECK(k(0, 0) == doctest::Approx(2.0));
  CHECK(k(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("NTK identities") {
  Rng rng(131);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.below(4);
    const std::size_t d = 2 + rng.below(4);
    const Samples<double> data{testing::gaussian_matrix(n, d, rng), testing::gaussian_vector(n, rng)};
    const Params<double> theta = random_params(d, 2, rng);
    const Matrix<double> k = ntk(data.X, theta);
    const auto xu = linalg::matvec<double>(data.X, theta.u);
    const Matrix<double> xxt = linalg::gram(data.X.transposed());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        CHECK(std::abs(k(i, j) - (xxt(i, j) * theta.v[0] * theta.v[0] + xu[i] * xu[j])) < 1e-12);
  }
}

TEST_CASE("at minimizers, sharpness equals the scaled NTK norm and the balanced deep form") {
  Rng rng(137);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(4);
    const std::size_t d = n + rng.below(3);
    const int depth = 2 + static_cast<int>(rng.below(4));
    const Dataset ds = testing::conditioned_dataset(n, d, rng);
    const auto sd = decompose<double>(ds);
    const double q = difficulty(sd);
    const double vj = std::pow(q, 1.0 / (2.0 * depth));
    ReparamState<double> s;
    s.v.assign(static_cast<std::size_t>(depth - 1), vj);
    const double prod = std::pow(vj, depth - 1);
    for (std::size_t i = 0; i < sd.rank(); ++i) s.o.push_back(sd.d_coeffs[i] / (sd.sigma()[i] * prod));
    s.u_perp.assign(d, 0.0);
    const Params<double> theta = from_reparam(s, sd);
    const Matrix<double> k = ntk(ds.X, theta);
    const double s_ntk = linalg::spectral_norm(k) / static_cast<double>(n);
    CHECK(rel_err(sharpness(s, sd), s_ntk) < 1e-8);

    // Q^{(D-1)/D} sum sigma_i² e_i e_iᵀ + (D-1) Q^{-1/D} sum d_i d_j e_i e_jᵀ
    const double dd = depth;
    Matrix<double> form(n, n);
    for (std::size_t i = 0; i < sd.rank(); ++i)
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
          form(a, b) += std::pow(q, (dd - 1) / dd) * sd.sigma()[i] * sd.sigma()[i] * sd.svd.left(a, i) * sd.svd.left(b, i);
    std::vector<double> ypar = y_parallel(sd);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) form(a, b) += (dd - 1) * std::pow(q, -1.0 / dd) * ypar[a] * ypar[b];
    CHECK(matrix_rel_diff(k, form) < 1e-8);
  }
}
