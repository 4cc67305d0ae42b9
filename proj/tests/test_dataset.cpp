#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "minimalist/dataset.hpp"
#include "support.hpp"

using namespace minimalist;
using linalg::Matrix;
using testing::rel_err;

namespace {

Dataset make(std::size_t n, std::size_t d, std::vector<double> x, std::vector<double> y) {
  return {Matrix<double>(n, d, std::move(x)), std::move(y)};
}

SpectralData<double> spectral(std::vector<double> sigma, std::vector<double> d) {
  // diag(sigma) with labels d gives exactly those coefficients.
  const std::size_t r = sigma.size();
  Dataset ds{Matrix<double>(r, r), d};
  for (std::size_t i = 0; i < r; ++i) ds.X(i, i) = sigma[i];
  return decompose<double>(ds);
}

struct TempFile {
  std::filesystem::path path;
  explicit TempFile(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {}
  ~TempFile() { std::filesystem::remove(path); }
  void write(const std::string& text) const { std::ofstream(path) << text; }
};

}  // namespace

TEST_CASE("decompose on identity and rank-deficient data") {
  const auto sd = decompose<double>(testing::identity_dataset());
  CHECK(sd.rank() == 2);
  CHECK(sd.sigma()[0] == doctest::Approx(1.0));
  CHECK(std::abs(sd.d_coeffs[0]) == doctest::Approx(1.0));
  CHECK(std::abs(sd.d_coeffs[1]) < 1e-15);
  CHECK(difficulty(sd) == doctest::Approx(1.0));
  CHECK(sd.y_perp_norm < 1e-15);

  const auto rd = decompose<double>(make(2, 2, {2, 0, 0, 0}, {4, 1}));
  REQUIRE(rd.rank() == 1);
  CHECK(rd.d_coeffs[0] == doctest::Approx(4.0));
  CHECK(difficulty(rd) == doctest::Approx(4.0));
  CHECK(rd.y_perp_norm == doctest::Approx(1.0));
  CHECK(rd.loss_floor() == doctest::Approx(0.25));
}

TEST_CASE("difficulty, c_tilde and predicted sharpness by hand") {
  CHECK(difficulty(spectral({1, 1}, {1, 0})) == doctest::Approx(1.0));
  CHECK(difficulty(spectral({2}, {4})) == doctest::Approx(4.0));
  CHECK(difficulty(spectral({2, 1}, {1, 1})) == doctest::Approx(1.25));

  CHECK(std::abs(c_tilde(spectral({1, 1}, {1, 0}))) < 1e-15);
  CHECK(std::abs(c_tilde(spectral({2}, {4}))) < 1e-15);
  CHECK(std::abs(c_tilde(spectral({1, 1}, {1, 1}))) < 1e-15);
  CHECK(c_tilde(spectral({2, 1}, {2, 1})) == doctest::Approx(4.0 / std::sqrt(5.0) - std::sqrt(5.0) / 2.0));

  // sigma_1 = 2, N = 4 needs four samples.
  Dataset four{Matrix<double>(4, 1, {2, 0, 0, 0}), {8, 0, 0, 0}};
  const auto s4 = decompose<double>(four);
  CHECK(difficulty(s4) == doctest::Approx(16.0));
  CHECK(predicted_sharpness(s4, 2, 4) == doctest::Approx(4.0));

  const auto q1 = spectral({1, 1}, {1, 0});
  for (int depth = 2; depth <= 5; ++depth) CHECK(predicted_sharpness(q1, depth, 2) == doctest::Approx(0.5));

  const auto q4 = spectral({1}, {2});
  CHECK(predicted_sharpness(q4, 2, 2) == doctest::Approx(1.0));
  CHECK(predicted_sharpness(q4, 3, 2) == doctest::Approx(std::pow(4.0, 2.0 / 3.0) / 2.0));
  CHECK(predicted_sharpness(q4, 4, 2) == doctest::Approx(std::pow(4.0, 0.75) / 2.0));
  CHECK(predicted_sharpness(q4, 3, 2) > predicted_sharpness(q4, 2, 2));
  CHECK(predicted_sharpness(q4, 4, 2) > predicted_sharpness(q4, 3, 2));
}

TEST_CASE("undefined quantities are rejected") {
  const auto zero = decompose<double>(make(2, 2, {0, 0, 0, 0}, {1, 0}));
  CHECK(zero.rank() == 0);
  CHECK_THROWS_AS(difficulty(zero), UndefinedQuantity);
  // y orthogonal to col(X)
  const auto orth = decompose<double>(make(2, 2, {1, 0, 0, 0}, {0, 1}));
  CHECK_THROWS_AS(c_tilde(orth), UndefinedQuantity);
  CHECK_THROWS_AS(predicted_sharpness(orth, 2, 2), UndefinedQuantity);
}

TEST_CASE("dataset invariants are enforced") {
  CHECK_THROWS_AS(decompose<double>(make(2, 1, {1, 2}, {0, 0})), InvalidInput);
  CHECK_THROWS_AS(decompose<double>(make(2, 1, {1, NAN}, {1, 0})), InvalidInput);
  CHECK_THROWS_AS(decompose<double>(Dataset{Matrix<double>(2, 1, {1, 2}), {1}}), InvalidInput);
}

TEST_CASE("edge-of-stability dataset constants") {
  const auto sd = decompose<double>(eos_demo_dataset());
  CHECK(rel_err(sd.sigma()[0], 2.7429116245931175) < 1e-12);
  CHECK(rel_err(sd.sigma()[1], 0.08626984715745893) < 1e-10);
  CHECK(rel_err(difficulty(sd), 383.4045644320433) < 1e-10);
  CHECK(rel_err(sd.sum_d_sq, 3.132258003791131) < 1e-12);
  CHECK(rel_err(c_tilde(sd), 593.5652778448383) < 1e-10);
  CHECK(rel_err(predicted_sharpness(sd, 2, 2), 73.65839880320169) < 1e-10);
  CHECK(rel_err(predicted_sharpness(sd, 5, 2), 438.8533900316754) < 1e-10);
}

TEST_CASE("spectral invariants") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + trial % 6;
    const std::size_t d = 1 + trial % 5;
    Dataset ds{testing::gaussian_matrix(n, d, rng), testing::gaussian_vector(n, rng)};
    const auto sd = decompose<double>(ds);
    const double y2 = linalg::dot<double>(ds.y, ds.y);
    CHECK(rel_err(sd.sum_d_sq + sd.y_perp_norm * sd.y_perp_norm, y2) < 1e-9);

    // y∥ + y⊥ = y
    const auto ypar = y_parallel(sd);
    std::vector<double> yperp(n);
    for (std::size_t i = 0; i < n; ++i) yperp[i] = ds.y[i] - ypar[i];
    CHECK(std::abs(linalg::norm<double>(yperp) - sd.y_perp_norm) <= 1e-12 * std::sqrt(y2));

    // appending a zero column leaves Q unchanged
    Dataset wide{Matrix<double>(n, d + 1), ds.y};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) wide.X(i, j) = ds.X(i, j);
    CHECK(rel_err(difficulty(decompose<double>(wide)), difficulty(sd)) < 1e-10);

    // y -> c y scales Q by c², X -> c X scales Q by 1/c²
    Dataset ys = ds;
    for (auto& v : ys.y) v *= 3.0;
    const auto sy = decompose<double>(ys);
    CHECK(rel_err(difficulty(sy), 9.0 * difficulty(sd)) < 1e-12);
    for (std::size_t i = 0; i < sd.rank(); ++i) CHECK(rel_err(sy.d_coeffs[i], 3.0 * sd.d_coeffs[i], 1e-12) < 1e-10);
    Dataset xs = ds;
    for (auto& v : xs.X.entries()) v *= 2.0;
    CHECK(rel_err(difficulty(decompose<double>(xs)), difficulty(sd) / 4.0) < 1e-10);
  }
}

TEST_CASE("synth_minimal_data reproduces the reference generator") {
  const Dataset ds = synth_minimal_data(100, 5.477, 0.233, 0.3, 1.414, 0);
  REQUIRE(ds.samples() == 2);
  REQUIRE(ds.features() == 100);
  CHECK(rel_err(ds.X(0, 0), 0.5567818286830786) < 1e-13);
  CHECK(rel_err(ds.X(0, 1), 0.6899216721226786) < 1e-13);
  CHECK(rel_err(ds.X(0, 2), 0.6109770744894099) < 1e-13);
  CHECK(rel_err(ds.y[0], 0.7877169542418138) < 1e-12);
  CHECK(rel_err(ds.y[1], 1.2119810229537424) < 1e-12);
  const auto sd = decompose<double>(ds);
  CHECK(rel_err(sd.sigma()[0], 7.745647681117444) < 1e-12);
  CHECK(rel_err(sd.sigma()[1], 0.3295117600329311) < 1e-10);
  CHECK(rel_err(difficulty(sd), 0.8622232099466258) < 1e-10);
  CHECK(rel_err(sd.sum_d_sq, 2.089396) < 1e-12);

  const Dataset flat = synth_minimal_data(10, 1.0, 0.0, 0.3, 1.0, 0);
  CHECK(decompose<double>(flat).rank() == 1);
  for (std::size_t j = 0; j < 10; ++j) CHECK(flat.X(0, j) == flat.X(1, j));

  // alpha = 0: y is the large eigenvector of XXᵀ scaled by beta
  const Dataset a0 = synth_minimal_data(10, 2.0, 0.5, 0.0, 1.0, 3);
  CHECK(std::abs(linalg::norm<double>(a0.y) - 1.0) < 1e-12);
  CHECK_THROWS_AS(synth_minimal_data(1, 1, 1, 1, 1), InvalidInput);
}

TEST_CASE("synth_gaussian is deterministic and balanced") {
  const Dataset a = synth_gaussian(4, 3, LabelMode::balanced_sign, 9);
  const Dataset b = synth_gaussian(4, 3, LabelMode::balanced_sign, 9);
  CHECK(a.X == b.X);
  CHECK(a.y == b.y);
  CHECK(std::count(a.y.begin(), a.y.end(), 1.0) == 2);
  CHECK(std::count(a.y.begin(), a.y.end(), -1.0) == 2);
  const Dataset c = synth_gaussian(4, 3, LabelMode::gaussian, 10);
  CHECK_FALSE(c.X == a.X);
}

TEST_CASE("CSV ingestion") {
  TempFile f("minimalist_test_basic.csv");
  f.write("f0,f1,y\n1,2,3\n4,5,6\n");
  const Dataset ds = load_csv(f.path);
  CHECK(ds.samples() == 2);
  CHECK(ds.features() == 2);
  CHECK(ds.X(1, 0) == 4.0);
  CHECK(ds.y[1] == 6.0);

  const Dataset pick = load_csv(f.path, {"f1"}, "f0");
  CHECK(pick.features() == 1);
  CHECK(pick.X(0, 0) == 2.0);
  CHECK(pick.y[0] == 1.0);

  TempFile c("minimalist_test_const.csv");
  c.write("a,b,y\n1,7,1\n2,7,0\n3,7,1\n");
  const Dataset st = load_csv(c.path, {}, "", true);
  for (std::size_t i = 0; i < 3; ++i) CHECK(st.X(i, 1) == 0.0);
  CHECK(st.X(0, 0) == doctest::Approx(-std::sqrt(1.5)));
}

TEST_CASE("CSV errors name the row and column") {
  TempFile f("minimalist_test_bad.csv");
  f.write("f0,f1,y\n1,2,3\n4,oops,6\n");
  try {
    load_csv(f.path);
    FAIL("expected an ingestion error");
  } catch (const IngestionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("'f1'") != std::string::npos);
  }
  CHECK_THROWS_AS(load_csv(f.path, {"nope"}), IngestionError);
  f.write("f0,y\n1,2\n3\n");
  CHECK_THROWS_AS(load_csv(f.path), IngestionError);
  f.write("f0,y\n");
  CHECK_THROWS_AS(load_csv(f.path), IngestionError);
  CHECK_THROWS_AS(load_csv("/nonexistent/x.csv"), IngestionError);
}

TEST_CASE("CSV round trip is bitwise") {
  Rng rng(13);
  Dataset ds{testing::gaussian_matrix(7, 3, rng), testing::gaussian_vector(7, rng)};
  ds.X(0, 0) = 1.0 / 3.0;
  ds.y[0] = -1e-300;
  TempFile f("minimalist_test_roundtrip.csv");
  write_csv(ds, f.path);
  const Dataset back = load_csv(f.path);
  CHECK(back.X == ds.X);
  CHECK(back.y == ds.y);
}

TEST_CASE("orthogonal_decompose uses the standard basis") {
  Dataset ds{Matrix<double>(3, 3, {0, 2, 0, 3, 0, 0, 0, 0, 0}), {0.5, -0.25, 0.1}};
  const auto sd = orthogonal_decompose(ds);
  REQUIRE(sd.rank() == 2);
  CHECK(sd.sigma()[0] == 3.0);
  CHECK(sd.sigma()[1] == 2.0);
  CHECK(sd.svd.left(1, 0) == 1.0);
  CHECK(sd.svd.left(0, 1) == 1.0);
  CHECK(sd.d_coeffs[0] == -0.25);
  CHECK(sd.d_coeffs[1] == 0.5);
  CHECK(sd.y_perp_norm == doctest::Approx(0.1));
  CHECK_THROWS_AS(orthogonal_decompose(Dataset{Matrix<double>(2, 2, {1, 1, 1, 0}), {1, 1}}), InvalidInput);
}
