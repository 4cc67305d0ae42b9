#include "doctest.h"
#include "minimalist/optimize.hpp"
#include "minimalist/reparam.hpp"
#include "support.hpp"

using namespace minimalist;
using linalg::Matrix;
using linalg::Vector;
using testing::rel_err;

namespace {

double state_rel_diff(const ReparamState<double>& a, const ReparamState<double>& b) {
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < a.o.size(); ++i) {
    diff = std::max(diff, std::abs(a.o[i] - b.o[i]));
    scale = std::max(scale, std::abs(b.o[i]));
  }
  for (std::size_t j = 0; j < a.v.size(); ++j) {
    diff = std::max(diff, std::abs(a.v[j] - b.v[j]));
    scale = std::max(scale, std::abs(b.v[j]));
  }
  return diff / std::max(scale, 1e-300);
}

Params<double> full_step(const Params<double>& theta, const std::vector<double>& grad, double eta) {
  auto flat = theta.flatten();
  for (std::size_t k = 0; k < flat.size(); ++k) flat[k] -= eta * grad[k];
  return Params<double>::unflatten(flat, theta.u.size());
}

struct Instance {
  Dataset ds;
  SpectralData<double> sd;
  Params<double> theta;
};

Instance random_instance(Rng& rng, bool allow_wide = true) {
  const std::size_t n = 2 + rng.below(6);
  const std::size_t d = allow_wide ? 1 + rng.below(10) : n;
  const int depth = 2 + static_cast<int>(rng.below(3));
  Dataset ds{testing::gaussian_matrix(n, d, rng), testing::gaussian_vector(n, rng)};
  auto sd = decompose<double>(ds);
  Params<double> theta{testing::gaussian_vector(d, rng, 0.7),
                       testing::gaussian_vector(static_cast<std::size_t>(depth - 1), rng, 0.7)};
  return {std::move(ds), std::move(sd), std::move(theta)};
}

}  // namespace

TEST_CASE("to_reparam on aligned and orthogonal vectors") {
  Rng rng(201);
  const Dataset ds{testing::gaussian_matrix(2, 5, rng), {1.0, -1.0}};
  const auto sd = decompose<double>(ds);
  const Vector<double> w1 = sd.svd.right_vector(0);

  Params<double> along{w1, {1.0}};
  for (auto& x : along.u) x *= 2.5;
  const auto s = to_reparam(along, sd);
  CHECK(s.o[0] == doctest::Approx(2.5));
  CHECK(std::abs(s.o[1]) < 1e-14);
  CHECK(linalg::norm<double>(s.u_perp) < 1e-14);

  // component of a random vector orthogonal to W
  Vector<double> u = testing::gaussian_vector(5, rng);
  const auto proj = to_reparam(Params<double>{u, {1.0}}, sd);
  const auto perp = to_reparam(Params<double>{proj.u_perp, {1.0}}, sd);
  CHECK(linalg::norm<double>(perp.o) < 1e-14);
  CHECK(testing::max_abs_diff(perp.u_perp, proj.u_perp) < 1e-14);
}

TEST_CASE("reparam round trip") {
  Rng rng(203);
  for (int trial = 0; trial < 100; ++trial) {
    const Instance in = random_instance(rng);
    const Params<double> back = from_reparam(to_reparam(in.theta, in.sd), in.sd);
    const auto a = back.flatten();
    const auto b = in.theta.flatten();
    CHECK(testing::max_abs_diff(a, b) <= 1e-12 * testing::max_abs(b));
  }
}

TEST_CASE("GD step by hand") {
  const Dataset ds = testing::identity_dataset();
  const auto sd = decompose<double>(ds);
  REQUIRE(sd.svd.right(0, 0) == 1.0);
  const double eta = 0.3;
  const ReparamState<double> s{{1.0, 1.0}, {1.0}, {0.0, 0.0}};
  const auto next = gd_step_reparam(s, sd, eta);
  CHECK(next.o[0] == doctest::Approx(1.0));
  CHECK(next.o[1] == doctest::Approx(1.0 - eta / 2));
  CHECK(next.v[0] == doctest::Approx(1.0 - eta / 2));

  // a minimizer is a fixed point
  const ReparamState<double> star{{1.0, 0.0}, {1.0}, {0.0, 0.0}};
  const auto same = gd_step_reparam(star, sd, eta);
  CHECK(same.o == star.o);
  CHECK(same.v == star.v);

  // a batch holding only zero-residual samples leaves the state unchanged
  const std::vector<std::size_t> batch{0};
  const auto masked = sgd_step_reparam<double>(s, sd, eta, batch);
  CHECK(masked.o == s.o);
  CHECK(masked.v == s.v);
  CHECK_THROWS_AS(gd_step_reparam(s, sd, 0.0), InvalidInput);
}

TEST_CASE("GD, SGD and GF in reduced coordinates equal their full-space counterparts") {
  Rng rng(207);
  for (int trial = 0; trial < 100; ++trial) {
    const Instance in = random_instance(rng);
    const std::size_t n = in.ds.samples();
    const double eta = 0.05 + 0.1 * rng.uniform();
    const auto s = to_reparam(in.theta, in.sd);

    // GD on the raw labels: y⊥ does not enter the update.
    const Params<double> gd_full = full_step(in.theta, gradient(cast_dataset<double>(in.ds), in.theta), eta);
    CHECK(state_rel_diff(gd_step_reparam(s, in.sd, eta), to_reparam(gd_full, in.sd)) <= 1e-12);

    // SGD on the projected labels
    const Dataset proj = project_labels(in.ds, in.sd);
    const BatchMask mask = sample_mask(n, 1 + rng.below(n), rng);
    const Params<double> sgd_full =
        full_step(in.theta, minibatch_gradient(cast_dataset<double>(proj), in.theta, mask.indices), eta);
    CHECK(state_rel_diff(sgd_step_reparam<double>(s, in.sd, eta, mask.indices), to_reparam(sgd_full, in.sd)) <= 1e-12);

    // GF tangent = -gradient expressed in (o, v)
    const auto g = gradient(cast_dataset<double>(in.ds), in.theta);
    const Tangent<double> t = gf_rhs_reparam(s, in.sd);
    Params<double> neg{Vector<double>(g.begin(), g.begin() + in.theta.u.size()),
                       Vector<double>(g.begin() + in.theta.u.size(), g.end())};
    const auto mapped = to_reparam(neg, in.sd);
    double diff = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < t.o.size(); ++i) {
      diff = std::max(diff, std::abs(t.o[i] + mapped.o[i]));
      scale = std::max(scale, std::abs(mapped.o[i]));
    }
    for (std::size_t j = 0; j < t.v.size(); ++j) {
      diff = std::max(diff, std::abs(t.v[j] + mapped.v[j]));
      scale = std::max(scale, std::abs(mapped.v[j]));
    }
    CHECK(diff <= 1e-12 * std::max(scale, 1e-300));
  }
}

TEST_CASE("full-batch SGD is GD") {
  Rng rng(209);
  const Instance in = random_instance(rng);
  const auto s = to_reparam(in.theta, in.sd);
  std::vector<std::size_t> all(in.ds.samples());
  std::iota(all.begin(), all.end(), std::size_t{0});
  CHECK(state_rel_diff(sgd_step_reparam<double>(s, in.sd, 0.1, all), gd_step_reparam(s, in.sd, 0.1)) < 1e-14);
  const std::vector<std::size_t> repeated{0, 0};
  CHECK_THROWS_AS(sgd_step_reparam<double>(s, in.sd, 0.1, repeated), InvalidInput);
  const std::vector<std::size_t> out_of_range{in.ds.samples()};
  CHECK_THROWS_AS(sgd_step_reparam<double>(s, in.sd, 0.1, out_of_range), InvalidInput);
}

TEST_CASE("balanced scalar state has a balance-preserving tangent") {
  const Dataset ds{Matrix<double>(1, 1, {1.7}), {0.6}};
  const auto sd = decompose<double>(ds);
  const ReparamState<double> s{{0.4}, {0.4}, {0.0}};
  const auto t = gf_rhs_reparam(s, sd);
  CHECK(t.o[0] == doctest::Approx(t.v[0]).epsilon(1e-15));

  const ReparamState<double> star{{0.6 / 1.7}, {1.0}, {0.0}};
  const auto zero = gf_rhs_reparam(star, sd);
  CHECK(std::abs(zero.o[0]) < 1e-16);
  CHECK(std::abs(zero.v[0]) < 1e-16);
}

TEST_CASE("u_perp is bitwise constant under every engine") {
  Rng rng(211);
  const Dataset ds{testing::gaussian_matrix(3, 7, rng), testing::gaussian_vector(3, rng)};
  const auto sd = decompose<double>(ds);
  auto s = to_reparam(Params<double>{testing::gaussian_vector(7, rng, 0.3), {0.3}}, sd);
  const auto frozen = s.u_perp;
  Rng masks(5);
  for (int k = 0; k < 3000; ++k) {
    s = gd_step_reparam(s, sd, 0.01);
    s = sgd_step_reparam<double>(s, sd, 0.01, sample_mask(3, 2, masks).indices);
    s = rk4_step(s, sd, 0.01);
  }
  CHECK(s.u_perp == frozen);
}

TEST_CASE("layer imbalance and balance deviation") {
  CHECK(layer_imbalance(ReparamState<double>{{1, 0}, {1}, {}}) == 0.0);
  CHECK(layer_imbalance(ReparamState<double>{{2, 1}, {1}, {}}) == 4.0);
  CHECK_THROWS_AS(layer_imbalance(ReparamState<double>{{1}, {1, 1}, {}}), InvalidInput);
  CHECK(balance_check(ReparamState<double>{{0.6, 0.8}, {1, -1, 1}, {}}) < 1e-15);
  CHECK(balance_check(ReparamState<double>{{0.6, 0.8}, {1, 1.001}, {}}) == doctest::Approx(0.001));
}

TEST_CASE("edge-of-stability initial point has the expected imbalance") {
  const auto sd = decompose<double>(eos_demo_dataset());
  const auto s = to_reparam(Params<double>{{0.01, 0.01}, {0.01}}, sd);
  CHECK(std::abs(layer_imbalance(s) - 1e-4) < 1e-18);
}

TEST_CASE("engines instantiate at binary32 and extended precision") {
  Rng rng(213);
  const Instance in = random_instance(rng, false);
  const auto s64 = to_reparam(in.theta, in.sd);
  const auto ref = gd_step_reparam(s64, in.sd, 0.05);

  const auto sdf = decompose<float>(in.ds);
  const auto sf = gd_step_reparam(to_reparam(in.theta.cast<float>(), sdf), sdf, 0.05f);
  CHECK(std::abs(sf.v[0] - ref.v[0]) < 1e-4);

  const auto sde = decompose<DoubleDouble>(in.ds);
  const auto se = gd_step_reparam(to_reparam(in.theta.cast<DoubleDouble>(), sde), sde, DoubleDouble(0.05));
  CHECK(std::abs(to_double(se.v[0]) - ref.v[0]) < 1e-13);
  CHECK(std::abs(to_double(sharpness(se, sde)) - sharpness(ref, in.sd)) < 1e-10 * std::max(1.0, sharpness(ref, in.sd)));
}
