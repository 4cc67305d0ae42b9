#include "minimalist/verify.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>

#include "minimalist/model.hpp"
#include "minimalist/nonlinear.hpp"
#include "minimalist/optimize.hpp"
#include "minimalist/quantities.hpp"
#include "minimalist/reparam.hpp"

namespace minimalist {

using linalg::Matrix;
using linalg::Vector;

void SuiteResult::observe(double error, double scale) {
  ++cases;
  if (std::isnan(error) || error > tolerance * scale) ++failures;
  if (std::isnan(error) || error > max_error) max_error = std::isnan(error) ? INFINITY : error;
}

namespace {

Vector<double> gaussian(std::size_t n, Rng& rng, double scale = 1.0) {
  Vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

Matrix<double> gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix<double> m(rows, cols);
  for (auto& x : m.entries()) x = rng.normal();
  return m;
}

/// rows x k with orthonormal columns.
Matrix<double> orthonormal_columns(std::size_t rows, std::size_t k, Rng& rng) {
  Matrix<double> q(rows, k);
  for (std::size_t j = 0; j < k; ++j) {
    Vector<double> c = gaussian(rows, rng);
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t p = 0; p < j; ++p) {
        double dot = 0.0;
        for (std::size_t i = 0; i < rows; ++i) dot += c[i] * q(i, p);
        for (std::size_t i = 0; i < rows; ++i) c[i] -= dot * q(i, p);
      }
    const double nrm = linalg::norm<double>(c);
    for (std::size_t i = 0; i < rows; ++i) q(i, j) = c[i] / nrm;
  }
  return q;
}

double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Params<double> random_params(std::size_t d, int depth, Rng& rng, double scale) {
  return {gaussian(d, rng, scale), gaussian(static_cast<std::size_t>(depth - 1), rng, scale)};
}

/// Nonzero |v| so gradient flow does not start on the saddle.
ReparamState<double> random_state(const SpectralData<double>& sd, int depth, Rng& rng) {
  ReparamState<double> s;
  s.o = gaussian(sd.rank(), rng, 0.5);
  for (int j = 1; j < depth; ++j) s.v.push_back((rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.5 + 0.5 * rng.uniform()));
  s.u_perp.assign(sd.features, 0.0);
  return s;
}

template <class T>
double relative_to(T diff, double scale) {
  using std::abs;
  return to_double(T(abs(diff))) / std::max(scale, 1e-300);
}

SuiteResult start(std::string name, double tol, const VerifyOptions& opt) {
  SuiteResult r;
  r.name = std::move(name);
  r.tolerance = tol * opt.tolerance_scale;
  return r;
}

std::vector<std::vector<std::size_t>> subsets(std::size_t n, std::size_t b) {
  std::vector<std::vector<std::size_t>> out;
  for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
    if (static_cast<std::size_t>(std::popcount(bits)) != b) continue;
    std::vector<std::size_t> s;
    for (std::size_t i = 0; i < n; ++i)
      if (bits & (1u << i)) s.push_back(i);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

Dataset random_conditioned_dataset(std::size_t n, std::size_t d, Rng& rng, double lo) {
  const std::size_t k = std::min(n, d);
  const Matrix<double> e = orthonormal_columns(n, k, rng);
  const Matrix<double> w = orthonormal_columns(d, k, rng);
  const double scale = std::sqrt(static_cast<double>(n));
  Dataset ds{Matrix<double>(n, d), gaussian(n, rng)};
  for (std::size_t j = 0; j < k; ++j) {
    const double s = scale * (lo + (1.0 - lo) * rng.uniform());
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < d; ++b) ds.X(a, b) += s * e(a, j) * w(b, j);
  }
  return ds;
}

Dataset random_orthogonal_dataset(const std::vector<double>& row_norms, std::size_t d, Rng& rng) {
  if (row_norms.size() > d) throw InvalidInput("random_orthogonal_dataset: need d >= N");
  const Matrix<double> w = orthonormal_columns(d, row_norms.size(), rng);
  Dataset ds{Matrix<double>(row_norms.size(), d), gaussian(row_norms.size(), rng, 0.3)};
  for (std::size_t n = 0; n < row_norms.size(); ++n)
    for (std::size_t j = 0; j < d; ++j) ds.X(n, j) = row_norms[n] * w(j, n);
  return ds;
}

SuiteResult check_linalg(const VerifyOptions& opt, int instances, double tol) {
  SuiteResult r = start("linalg", tol, opt);
  Rng rng = Rng(opt.seed).split(101);
  for (int t = 0; t < instances; ++t) {
    const std::size_t n = 1 + rng.below(12);
    const std::size_t d = 1 + rng.below(12);
    const Matrix<double> a = gaussian_matrix(n, d, rng);
    const auto svd = linalg::thin_svd(a);
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < svd.rank; ++k) s += svd.singular_values[k] * svd.left(i, k) * svd.right(j, k);
        err = std::max(err, std::abs(s - a(i, j)));
      }
    const Matrix<double> g = linalg::gram(svd.right);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) err = std::max(err, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
    r.observe(err / std::max(1.0, max_abs(a.entries())));

    Matrix<double> m(n, n);
    const Matrix<double> b = gaussian_matrix(n, n, rng);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m(i, j) = 0.5 * (b(i, j) + b(j, i));
    const auto top = linalg::sym_eig_max(m);
    const auto mv = linalg::matvec<double>(m, top.vector);
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) res = std::max(res, std::abs(mv[i] - top.value * top.vector[i]));
    r.observe(res / std::max(1.0, std::abs(top.value)));
  }
  return r;
}

SuiteResult check_bordered_norm(const VerifyOptions& opt, int instances, double tol) {
  SuiteResult r = start("bordered", tol, opt);
  Rng rng = Rng(opt.seed).split(103);
  for (int t = 0; t < instances; ++t) {
    const std::size_t n = 1 + rng.below(20);
    const Vector<double> v = gaussian(n, rng);
    Matrix<double> a(n + 1, n + 1);
    for (std::size_t i = 0; i < n; ++i) a(i, n) = a(n, i) = v[i];
    const double nv = linalg::norm<double>(v);
    r.observe(std::abs(linalg::spectral_norm(a) - nv) / nv);
  }
  return r;
}

SuiteResult check_gradient(const VerifyOptions& opt, int instances, double tol) {
  SuiteResult r = start("gradient", tol, opt);
  Rng rng = Rng(opt.seed).split(107);
  for (int t = 0; t < instances; ++t) {
    const std::size_t n = 1 + rng.below(10);
    const std::size_t d = 1 + rng.below(10);
    const int depth = 2 + static_cast<int>(rng.below(4));
    const Samples<double> data{gaussian_matrix(n, d, rng), gaussian(n, rng)};
    const Params<double> theta = random_params(d, depth, rng, 0.8);
    const auto g = gradient(data, theta);
    auto x = theta.flatten();
    Vector<double> fd(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double keep = x[k];
      const double h = 1e-6 * std::max(1.0, std::abs(keep));
      x[k] = keep + h;
      const double up = residual_and_loss(data, Params<double>::unflatten(x, d)).loss;
      x[k] = keep - h;
      const double down = residual_and_loss(data, Params<double>::unflatten(x, d)).loss;
      x[k] = keep;
      fd[k] = (up - down) / (2 * h);
    }
    r.observe(max_abs_diff(g, fd) / std::max(max_abs(fd), 1e-3));
  }
  return r;
}

SuiteResult check_hessian(const VerifyOptions& opt, int instances, double tol) {
  SuiteResult r = start("hessian", tol, opt);
  Rng rng = Rng(opt.seed).split(109);
  for (int t = 0; t < instances; ++t) {
    const std::size_t n = 2 + rng.below(6);
    const std::size_t d = 1 + rng.below(6);
    const int depth = 2 + static_cast<int>(rng.below(3));
    const Dataset ds{gaussian_matrix(n, d, rng), gaussian(n, rng)};
    const auto sd = decompose<double>(ds);
    const Samples<double> data = cast_dataset<double>(ds);
    const Params<double> theta = random_params(d, depth, rng, 0.8);
    const Matrix<double> h = embed_reduced_hessian(hessian_reduced(to_reparam(theta, sd), sd), sd);
    const auto x0 = theta.flatten();
    double diff = 0.0;
    double scale = 0.0;
    for (std::size_t k = 0; k < x0.size(); ++k) {
      auto xp = x0;
      auto xm = x0;
      xp[k] += 1e-6;
      xm[k] -= 1e-6;
      const auto gp = gradient(data, Params<double>::unflatten(xp, d));
      const auto gm = gradient(data, Params<double>::unflatten(xm, d));
      for (std::size_t i = 0; i < x0.size(); ++i) {
        const double fd = (gp[i] - gm[i]) / 2e-6;
        diff = std::max(diff, std::abs(h(i, k) - fd));
        scale = std::max(scale, std::abs(fd));
      }
    }
    r.observe(diff / std::max(scale, 1e-12));
  }
  return r;
}

SuiteResult check_gf_conservation(const VerifyOptions& opt, int instances, double h, double loss_target, double tol) {
  SuiteResult r = start("gf", tol, opt);
  Rng rng = Rng(opt.seed).split(113);
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::gf;
  cfg.gf_step = h;
  cfg.loss_stop = loss_target;
  cfg.max_steps = 20'000'000;
  cfg.record_every = 1000;
  cfg.record_terms = false;
  for (int t = 0; t < instances; ++t) {
    const std::size_t n = 2 + rng.below(9);
    const std::size_t d = 1 + rng.below(10);
    const Dataset ds = random_conditioned_dataset(n, d, rng);
    const auto sd = decompose<double>(ds);
    const auto init = random_state(sd, 2, rng);
    const double c0 = layer_imbalance(init);
    const RunResult res = run<double>(cfg, init, sd);
    double drift = 0.0;
    for (const auto& rec : res.records) drift = std::max(drift, std::abs(*rec.imbalance - c0));
    if (res.status != RunStatus::converged) {
      r.detail += "instance " + std::to_string(t) + " did not reach the loss target; ";
      drift = INFINITY;
    }
    r.observe(drift, std::max(1.0, std::abs(c0)));
  }
  return r;
}

SuiteResult check_gf_balance(const VerifyOptions& opt, int instances_per_depth, double h, double loss_target,
                             double tol) {
  SuiteResult r = start("balance", tol, opt);
  Rng rng = Rng(opt.seed).split(127);
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::gf;
  cfg.gf_step = h;
  cfg.loss_stop = loss_target;
  cfg.max_steps = 20'000'000;
  cfg.record_every = 1000;
  cfg.record_terms = false;
  for (int depth = 3; depth <= 5; ++depth)
    for (int t = 0; t < instances_per_depth; ++t) {
      const std::size_t n = 2 + rng.below(5);
      const std::size_t d = 1 + rng.below(6);
      const Dataset ds = random_conditioned_dataset(n, d, rng);
      const auto sd = decompose<double>(ds);
      InitScheme scheme;
      scheme.kind = InitKind::balanced;
      scheme.c = 0.6 + 0.4 * rng.uniform();
      auto s = to_reparam(init_params(scheme, d, depth, sd, rng), sd);
      // Start on the side of the saddle that descends towards y∥.
      double align = 0.0;
      for (std::size_t i = 0; i < sd.rank(); ++i) align += sd.sigma()[i] * sd.d_coeffs[i] * s.o[i];
      if (align < 0)
        for (auto& x : s.o) x = -x;
      const RunResult res = run<double>(cfg, s, sd);
      double dev = 0.0;
      for (const auto& rec : res.records) dev = std::max(dev, *rec.balance_dev);
      if (res.status != RunStatus::converged) {
        r.detail += "D=" + std::to_string(depth) + " instance did not reach the loss target; ";
        dev = INFINITY;
      }
      r.observe(dev);
    }
  return r;
}

SuiteResult check_gd_identity(const VerifyOptions& opt, int instances, double tol) {
  SuiteResult r = start("gd", tol, opt);
  Rng rng = Rng(opt.seed).split(131);
  for (int t = 0; t < instances; ++t) {
    const std::size_t n = 1 + rng.below(10);
    const std::size_t d = 1 + rng.below(10);
    const Dataset ds{gaussian_matrix(n, d, rng), gaussian(n, rng)};
    const auto sd = decompose<DoubleDouble>(ds);
    if (sd.rank() == 0) continue;
    const auto s = ReparamState<double>{gaussian(sd.rank(), rng), {rng.normal()}, Vector<double>(d, 0.0)}
                       .cast<DoubleDouble>();
    const DoubleDouble eta(0.01 + rng.uniform());
    const DoubleDouble c = layer_imbalance(s);
    const auto terms = imbalance_terms_exact(s, sd);
    const DoubleDouble actual = layer_imbalance(gd_step_reparam(s, sd, eta)) - c;
    const DoubleDouble predicted = gd_imbalance_delta(terms, c, eta, n);
    const DoubleDouble nn(static_cast<double>(n));
    const double scale = to_double(eta * eta / (nn * nn) * (terms.omega1 + terms.psi1 * abs(c)));
    r.observe(relative_to(actual - predicted, std::max(to_double(abs(predicted)), scale)));
  }
  return r;
}

SuiteResult check_sgd_expectation(const VerifyOptions& opt, std::size_t samples, std::size_t features, double tol) {
  SuiteResult r = start("sgd", tol, opt);
  Rng rng = Rng(opt.seed).split(137);
  for (std::size_t b = 1; b < samples; ++b) {
    const auto masks = subsets(samples, b);
    for (int t = 0; t < 4; ++t) {
      const Dataset ds{gaussian_matrix(samples, features, rng), gaussian(samples, rng)};
      const auto sd = decompose<DoubleDouble>(ds);
      const auto s = ReparamState<double>{gaussian(sd.rank(), rng), {rng.normal()}, Vector<double>(features, 0.0)}
                         .cast<DoubleDouble>();
      const DoubleDouble eta(0.05 + 0.5 * rng.uniform());
      const DoubleDouble c = layer_imbalance(s);
      DoubleDouble mean(0);
      for (const auto& m : masks) mean += layer_imbalance(sgd_step_reparam<DoubleDouble>(s, sd, eta, m)) - c;
      mean = mean / DoubleDouble(static_cast<double>(masks.size()));
      const auto terms = imbalance_terms_exact(s, sd);
      const DoubleDouble predicted = sgd_expected_imbalance_delta(terms, c, eta, samples, b);
      const DoubleDouble nn(static_cast<double>(samples));
      const double scale = to_double(eta * eta / (nn * nn) * (terms.omega2 + terms.psi2 * abs(c)));
      r.observe(relative_to(mean - predicted, std::max(to_double(abs(predicted)), scale)));
    }
  }
  return r;
}

SuiteResult check_mask_moment(const VerifyOptions& opt, std::size_t max_samples) {
  SuiteResult r = start("mask", 0.0, opt);
  for (std::size_t n = 1; n <= max_samples; ++n)
    for (std::size_t b = 1; b <= n; ++b) {
      const auto masks = subsets(n, b);
      std::vector<std::size_t> counts(n * n, 0);
      for (const auto& m : masks)
        for (std::size_t i : m)
          for (std::size_t j : m) ++counts[i * n + j];
      const Matrix<double> mm = mask_second_moment(n, b);
      double err = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double exact = static_cast<double>(counts[i * n + j]) / static_cast<double>(masks.size());
          err = std::max(err, std::abs(mm(i, j) - exact));
        }
      r.observe(err);
    }
  return r;
}

SuiteResult check_term_ordering(const VerifyOptions& opt, int instances) {
  SuiteResult r = start("terms", 1e-24, opt);
  Rng rng = Rng(opt.seed).split(139);
  for (int t = 0; t < instances; ++t) {
    const std::size_t n = 1 + rng.below(8);
    const std::size_t d = 1 + rng.below(8);
    const Dataset ds{gaussian_matrix(n, d, rng), gaussian(n, rng)};
    const auto sd = decompose<DoubleDouble>(ds);
    if (sd.rank() == 0) continue;
    const auto s = ReparamState<double>{gaussian(sd.rank(), rng), {rng.normal()}, Vector<double>(d, 0.0)}
                       .cast<DoubleDouble>();
    const auto tm = imbalance_terms_exact(s, sd);
    const double scale = std::max({1.0, to_double(tm.psi2), to_double(tm.omega2)});
    double violation = 0.0;
    violation = std::max(violation, -to_double(tm.psi1));
    violation = std::max(violation, -to_double(tm.omega1));
    violation = std::max(violation, to_double(tm.psi1 - tm.psi2));
    violation = std::max(violation, to_double(tm.omega1 - tm.omega2));
    r.observe(violation / scale);
  }
  return r;
}

SuiteResult check_bounds_sandwich(const VerifyOptions& opt, int instances, double tol) {
  SuiteResult r = start("bounds", tol, opt);
  Rng rng = Rng(opt.seed).split(149);
  auto outside = [](double s, const BoundsReport& b) {
    return std::max({0.0, b.lower - s, s - b.upper}) / std::max(1.0, std::abs(s));
  };
  for (int t = 0; t < instances; ++t) {
    const std::size_t n = 2 + rng.below(6);
    const std::size_t d = 1 + rng.below(7);
    const auto sd = decompose<double>(random_conditioned_dataset(n, d, rng, 0.1));

    // two-layer minimizer with imbalance c
    const double c = 3.0 * rng.normal();
    const double v = std::sqrt(v1_star_sq(difficulty(sd), c));
    ReparamState<double> s{{}, {v}, Vector<double>(d, 0.0)};
    for (std::size_t i = 0; i < sd.rank(); ++i) s.o.push_back(sd.d_coeffs[i] / (sd.sigma()[i] * v));
    r.observe(outside(sharpness(s, sd), minimizer_bounds_2layer(sd, c)));

    // balanced deep minimizer
    const int depth = 2 + static_cast<int>(rng.below(4));
    const double vj = std::pow(difficulty(sd), 1.0 / (2.0 * depth));
    ReparamState<double> deep{{}, Vector<double>(static_cast<std::size_t>(depth - 1), vj), Vector<double>(d, 0.0)};
    for (std::size_t i = 0; i < sd.rank(); ++i)
      deep.o.push_back(sd.d_coeffs[i] / (sd.sigma()[i] * std::pow(vj, depth - 1)));
    r.observe(outside(sharpness(deep, sd), minimizer_bounds_deep(sd, depth)));

    // arbitrary state
    const ReparamState<double> any{gaussian(sd.rank(), rng), {rng.normal()}, Vector<double>(d, 0.0)};
    r.observe(outside(sharpness(any, sd), arbitrary_theta_bounds(sd, any)));
  }
  return r;
}

SuiteResult check_ntk_identity(const VerifyOptions& opt, int instances, double tol) {
  SuiteResult r = start("ntk", tol, opt);
  Rng rng = Rng(opt.seed).split(151);
  for (int t = 0; t < instances; ++t) {
    const std::size_t n = 2 + rng.below(5);
    const std::size_t d = n + rng.below(3);
    const int depth = 2 + static_cast<int>(rng.below(4));
    const Dataset ds = random_conditioned_dataset(n, d, rng);
    const auto sd = decompose<double>(ds);
    const double q = difficulty(sd);
    const double vj = std::pow(q, 1.0 / (2.0 * depth));
    ReparamState<double> s{{}, Vector<double>(static_cast<std::size_t>(depth - 1), vj), Vector<double>(d, 0.0)};
    for (std::size_t i = 0; i < sd.rank(); ++i)
      s.o.push_back(sd.d_coeffs[i] / (sd.sigma()[i] * std::pow(vj, depth - 1)));
    const Params<double> theta = from_reparam(s, sd);
    const Matrix<double> k = ntk(ds.X, theta);
    const double sh = sharpness(s, sd);
    r.observe(std::abs(sh - linalg::spectral_norm(k) / static_cast<double>(n)) / sh);

    const double dd = depth;
    const auto ypar = y_parallel(sd);
    double diff = 0.0;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) {
        double form = (dd - 1) * std::pow(q, -1.0 / dd) * ypar[a] * ypar[b];
        for (std::size_t i = 0; i < sd.rank(); ++i)
          form += std::pow(q, (dd - 1) / dd) * sd.sigma()[i] * sd.sigma()[i] * sd.svd.left(a, i) * sd.svd.left(b, i);
        diff = std::max(diff, std::abs(k(a, b) - form));
      }
    r.observe(diff / max_abs(k.entries()));
  }
  return r;
}

SuiteResult check_nonlinear_conservation(const VerifyOptions& opt, int instances, double h, double tol) {
  SuiteResult r = start("nonlinear", tol, opt);
  Rng rng = Rng(opt.seed).split(157);
  const auto steps = static_cast<int>(std::lround(1.0 / h));
  for (Activation a : {Activation::tanh, Activation::sigmoid}) {
    for (int t = 0; t < instances; ++t) {
      const std::size_t n = 2 + rng.below(3);
      const std::size_t d = n + rng.below(3);
      std::vector<double> norms(n);
      for (auto& x : norms) x = 0.5 + rng.uniform();
      const Dataset ds = random_orthogonal_dataset(norms, d, rng);
      const auto sd = orthogonal_decompose(ds);
      const Samples<double> data = cast_dataset<double>(ds);
      NonlinearParams theta{gaussian(d, rng, 0.5), 0.5 + 0.5 * rng.uniform(), a};
      const double c0 = nl_layer_imbalance(theta, sd);
      double drift = 0.0;
      for (int k = 1; k <= steps; ++k) {
        theta = nl_rk4_step(data, theta, h);
        if (k % 50 == 0 || k == steps) drift = std::max(drift, std::abs(nl_layer_imbalance(theta, sd) - c0));
      }
      r.observe(drift);
    }
  }
  return r;
}

SuiteResult check_reparam_equivalence(const VerifyOptions& opt, int instances, std::size_t steps, double tol) {
  SuiteResult r = start("reparam", tol, opt);
  Rng rng = Rng(opt.seed).split(163);
  auto rel = [](const ReparamState<double>& a, const ReparamState<double>& b) {
    const double diff = std::max(max_abs_diff(a.o, b.o), max_abs_diff(a.v, b.v));
    return diff / std::max({max_abs(b.o), max_abs(b.v), 1e-300});
  };
  auto step_full = [](const Params<double>& theta, const Vector<double>& g, double eta) {
    auto x = theta.flatten();
    for (std::size_t k = 0; k < x.size(); ++k) x[k] -= eta * g[k];
    return Params<double>::unflatten(x, theta.u.size());
  };
  for (int t = 0; t < instances; ++t) {
    const std::size_t n = 2 + rng.below(6);
    const std::size_t d = 1 + rng.below(10);
    const int depth = 2 + static_cast<int>(rng.below(3));
    const Dataset ds{gaussian_matrix(n, d, rng), gaussian(n, rng)};
    const auto sd = decompose<double>(ds);
    const Params<double> theta = random_params(d, depth, rng, 0.7);
    const auto s = to_reparam(theta, sd);
    const double eta = 0.05 + 0.1 * rng.uniform();

    const auto g = gradient(cast_dataset<double>(ds), theta);
    r.observe(rel(gd_step_reparam(s, sd, eta), to_reparam(step_full(theta, g, eta), sd)));

    const Dataset proj = project_labels(ds, sd);
    const auto mask = sample_mask(n, 1 + rng.below(n), rng);
    const auto gb = minibatch_gradient(cast_dataset<double>(proj), theta, mask.indices);
    r.observe(rel(sgd_step_reparam<double>(s, sd, eta, mask.indices), to_reparam(step_full(theta, gb, eta), sd)));

    const auto tangent = gf_rhs_reparam(s, sd);
    Vector<double> neg(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) neg[k] = -g[k];
    const auto mapped = to_reparam(Params<double>::unflatten(neg, d), sd);
    r.observe(rel(ReparamState<double>{tangent.o, tangent.v, {}}, mapped));
  }

  // u_perp constancy under long mixed runs
  const Dataset ds{gaussian_matrix(3, 7, rng), gaussian(3, rng)};
  const auto sd = decompose<double>(ds);
  auto s = to_reparam(random_params(7, 2, rng, 0.3), sd);
  const auto frozen = s.u_perp;
  for (std::size_t k = 0; k < steps; ++k) {
    switch (k % 3) {
      case 0: s = gd_step_reparam(s, sd, 0.01); break;
      case 1: s = sgd_step_reparam<double>(s, sd, 0.01, sample_mask(3, 2, rng).indices); break;
      default: s = rk4_step(s, sd, 0.01);
    }
  }
  r.observe(s.u_perp == frozen ? 0.0 : INFINITY);
  return r;
}

namespace {

using SuiteFn = std::function<SuiteResult(const VerifyOptions&)>;

const std::vector<std::pair<std::string, SuiteFn>>& registry() {
  static const std::vector<std::pair<std::string, SuiteFn>> suites{
      {"linalg", [](const VerifyOptions& o) { return check_linalg(o, 30, 1e-10); }},
      {"bordered", [](const VerifyOptions& o) { return check_bordered_norm(o, 100, 1e-10); }},
      {"gradient", [](const VerifyOptions& o) { return check_gradient(o, 100, 1e-5); }},
      {"hessian", [](const VerifyOptions& o) { return check_hessian(o, 50, 1e-5); }},
      {"gf", [](const VerifyOptions& o) { return check_gf_conservation(o, 5, 1e-3, 1e-10, 1e-6); }},
      {"balance", [](const VerifyOptions& o) { return check_gf_balance(o, 2, 1e-3, 1e-10, 1e-6); }},
      {"gd", [](const VerifyOptions& o) { return check_gd_identity(o, 1000, 1e-9); }},
      {"sgd", [](const VerifyOptions& o) { return check_sgd_expectation(o, 6, 4, 1e-10); }},
      {"mask", [](const VerifyOptions& o) { return check_mask_moment(o, 8); }},
      {"terms", [](const VerifyOptions& o) { return check_term_ordering(o, 10000); }},
      {"bounds", [](const VerifyOptions& o) { return check_bounds_sandwich(o, 200, 1e-9); }},
      {"ntk", [](const VerifyOptions& o) { return check_ntk_identity(o, 50, 1e-8); }},
      {"nonlinear", [](const VerifyOptions& o) { return check_nonlinear_conservation(o, 5, 1e-3, 1e-6); }},
      {"reparam", [](const VerifyOptions& o) { return check_reparam_equivalence(o, 100, 10000, 1e-12); }},
  };
  return suites;
}

}  // namespace

std::vector<std::string> verify_suite_names() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : registry()) names.push_back(name);
  return names;
}

std::vector<SuiteResult> run_verify(const std::string& selector, const VerifyOptions& opt) {
  if (!(opt.tolerance_scale >= 0.0)) throw InvalidInput("verify: tolerance scale must be >= 0");
  std::vector<SuiteResult> out;
  for (const auto& [name, fn] : registry()) {
    if (selector != "all" && selector != name) continue;
    const auto t0 = std::chrono::steady_clock::now();
    SuiteResult r = fn(opt);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(r));
  }
  if (out.empty()) throw InvalidInput("verify: unknown suite '" + selector + "'");
  return out;
}

}  // namespace minimalist
