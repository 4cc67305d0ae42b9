#pragma once

// Property suites run by `minimalist verify` and by the acceptance binary.
// Each check draws random instances from a seeded generator, compares an
// observed error against a tolerance and reports the worst case.

#include <cstdint>
#include <string>
#include <vector>

#include "minimalist/dataset.hpp"
#include "minimalist/rng.hpp"

namespace minimalist {

struct SuiteResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t failures = 0;
  double max_error = 0.0;
  double tolerance = 0.0;
  double seconds = 0.0;
  std::string detail;

  bool passed() const { return cases > 0 && failures == 0; }
  /// Records one observation; `error` is compared against tolerance * scale.
  void observe(double error, double scale = 1.0);
};

struct VerifyOptions {
  std::uint64_t seed = 0;
  /// Multiplies every tolerance; a tiny value must make suites fail.
  double tolerance_scale = 1.0;
};

/// Random N x d data with singular values spread over [lo, 1] * sqrt(N).
Dataset random_conditioned_dataset(std::size_t n, std::size_t d, Rng& rng, double lo = 0.5);

/// Random data whose rows are mutually orthogonal (XXᵀ diagonal) with the given norms.
Dataset random_orthogonal_dataset(const std::vector<double>& row_norms, std::size_t d, Rng& rng);

// Individual checks. Counts and tolerances are parameters so the acceptance
// protocol and the quicker `verify` defaults share one implementation.

SuiteResult check_linalg(const VerifyOptions& opt, int instances, double tol);
SuiteResult check_bordered_norm(const VerifyOptions& opt, int instances, double tol);
SuiteResult check_gradient(const VerifyOptions& opt, int instances, double tol);
SuiteResult check_hessian(const VerifyOptions& opt, int instances, double tol);
/// RK4 at fixed h until the excess loss reaches loss_target; |C(t) - C(0)| at every checkpoint.
SuiteResult check_gf_conservation(const VerifyOptions& opt, int instances, double h, double loss_target, double tol);
/// Balanced init at D = 3..5; balance deviation along the RK4 trajectory.
SuiteResult check_gf_balance(const VerifyOptions& opt, int instances_per_depth, double h, double loss_target,
                             double tol);
SuiteResult check_gd_identity(const VerifyOptions& opt, int instances, double tol);
/// Exhaustive mask enumeration at N samples, d features and every B in [1, N).
SuiteResult check_sgd_expectation(const VerifyOptions& opt, std::size_t samples, std::size_t features, double tol);
SuiteResult check_mask_moment(const VerifyOptions& opt, std::size_t max_samples);
/// Psi2 >= Psi1 >= 0 and Omega2 >= Omega1 >= 0.
SuiteResult check_term_ordering(const VerifyOptions& opt, int instances);
SuiteResult check_bounds_sandwich(const VerifyOptions& opt, int instances, double tol);
/// S(theta*) = ||JJᵀ||/N at constructed minimizers and the balanced-deep NTK form.
SuiteResult check_ntk_identity(const VerifyOptions& opt, int instances, double tol);
/// Generalized imbalance drift for tanh and sigmoid on orthogonal data over unit time.
SuiteResult check_nonlinear_conservation(const VerifyOptions& opt, int instances, double h, double tol);
/// Reduced vs full-space GD/SGD/GF tangent, and u_perp constancy over `steps` steps.
SuiteResult check_reparam_equivalence(const VerifyOptions& opt, int instances, std::size_t steps, double tol);

std::vector<std::string> verify_suite_names();

/// Runs `selector` ("all" or one suite name) with the default instance counts.
std::vector<SuiteResult> run_verify(const std::string& selector, const VerifyOptions& opt);

}  // namespace minimalist
