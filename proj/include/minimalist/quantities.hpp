#pragma once

#include <map>
#include <optional>
#include <string>

#include "json.hpp"

#include "minimalist/dataset.hpp"
#include "minimalist/reparam.hpp"

namespace minimalist {

/// A lower/upper sharpness bound together with every input it used.
struct BoundsReport {
  double lower = 0.0;
  double upper = 0.0;
  std::string source;
  std::map<std::string, double> inputs;
  std::optional<double> v1_star_sq;
  bool degenerate = false;  // lower bound fell back to 0
};

nlohmann::json to_json(const BoundsReport& report);

/// lower/upper at the global minimizer reached with imbalance c_star (D = 2).
BoundsReport minimizer_bounds_2layer(const SpectralData<double>& sd, double c_star);

/// Same bounds in reduced-coordinate form, (1/2N)[(s1² + a/Q) sqrt(C² + 4Q) + (a/Q - s1²) C]
/// with a = d_1² (lower) or sum d_i² (upper).
BoundsReport minimizer_bounds_2layer_reparam(const SpectralData<double>& sd, double c_star);

/// Balanced minimizer of depth D >= 2.
BoundsReport minimizer_bounds_deep(const SpectralData<double>& sd, int depth);

/// Expected sharpness at an alpha-beta initialization (D = 2).
BoundsReport init_sharpness_bounds(const SpectralData<double>& sd, double alpha, double beta);

/// Expected sharpness after gradient flow from an alpha-beta initialization (D = 2).
BoundsReport convergence_sharpness_bounds(const SpectralData<double>& sd, double alpha, double beta);

/// Bounds valid at an arbitrary two-layer state.
BoundsReport arbitrary_theta_bounds(const SpectralData<double>& sd, const ReparamState<double>& s);

/// Positive root of v⁴ + C v² - Q = 0, i.e. v_1² at the minimizer reached with imbalance C.
double v1_star_sq(double q, double c_star);

// ---------------------------------------------------------------------------
// Imbalance drift under GD/SGD (D = 2)

struct ImbalanceTerms {
  double psi1 = 0.0;
  double psi2 = 0.0;
  double omega1 = 0.0;
  double omega2 = 0.0;
  std::optional<double> t1;
  std::optional<double> t2;
};

inline constexpr double kRatioDenominatorFloor = 1e-12;

template <class T>
struct ImbalanceTermsT {
  T psi1{0}, psi2{0}, omega1{0}, omega2{0};
};

template <class T>
ImbalanceTermsT<T> imbalance_terms_exact(const ReparamState<T>& s, const SpectralData<T>& sd) {
  if (s.v.size() != 1) throw InvalidInput("imbalance_terms: defined for depth 2 only");
  const auto zeta = residual_coeffs(s, sd);
  const auto z = residual_vector<T>(zeta, sd);
  const auto& sigma = sd.sigma();
  const auto& e = sd.svd.left;
  const std::size_t r = sd.rank();
  const T n(static_cast<double>(sd.samples));
  ImbalanceTermsT<T> out;
  for (std::size_t i = 0; i < r; ++i) {
    out.psi1 += sigma[i] * sigma[i] * zeta[i] * zeta[i];
    T masked(0);
    for (std::size_t k = 0; k < sd.samples; ++k) masked += z[k] * z[k] * e(k, i) * e(k, i);
    out.psi2 += sigma[i] * sigma[i] * masked;
  }
  out.psi2 *= n;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = i + 1; j < r; ++j) {
      const T a = sigma[i] * zeta[i] * s.o[j] - sigma[j] * zeta[j] * s.o[i];
      out.omega1 += a * a;
      T b(0);
      for (std::size_t k = 0; k < sd.samples; ++k) {
        const T c = z[k] * (sigma[i] * e(k, i) * s.o[j] - sigma[j] * e(k, j) * s.o[i]);
        b += c * c;
      }
      out.omega2 += b;
    }
  out.omega2 *= n;
  return out;
}

template <class T>
ImbalanceTerms imbalance_terms(const ReparamState<T>& s, const SpectralData<T>& sd) {
  const auto t = imbalance_terms_exact(s, sd);
  ImbalanceTerms out{to_double(t.psi1), to_double(t.psi2), to_double(t.omega1), to_double(t.omega2), {}, {}};
  if (out.psi1 >= kRatioDenominatorFloor) out.t1 = out.omega1 / out.psi1;
  if (out.psi2 - out.psi1 >= kRatioDenominatorFloor) out.t2 = (out.omega2 - out.omega1) / (out.psi2 - out.psi1);
  return out;
}

/// C(θ⁺) - C(θ) for one GD step: (η²/N²)(Ω₁ - Ψ₁ C).
template <class T>
T gd_imbalance_delta(const ImbalanceTermsT<T>& t, T c, T eta, std::size_t samples) {
  const T n(static_cast<double>(samples));
  return eta * eta / (n * n) * (t.omega1 - t.psi1 * c);
}

/// Expected C(θ⁺) - C(θ) for one SGD step with B samples drawn without replacement.
template <class T>
T sgd_expected_imbalance_delta(const ImbalanceTermsT<T>& t, T c, T eta, std::size_t samples, std::size_t batch) {
  if (batch < 1 || batch > samples) throw InvalidInput("sgd_expected_imbalance_delta: B must be in [1, N]");
  const T gd = gd_imbalance_delta(t, c, eta, samples);
  if (batch == samples) return gd;
  const T n(static_cast<double>(samples));
  const T b(static_cast<double>(batch));
  const T factor = eta * eta * (n - b) / (b * n * n * (n - T(1)));
  return gd + factor * ((t.omega2 - t.omega1) - (t.psi2 - t.psi1) * c);
}

inline double gd_imbalance_delta(const ImbalanceTerms& t, double c, double eta, std::size_t samples) {
  return gd_imbalance_delta<double>({t.psi1, t.psi2, t.omega1, t.omega2}, c, eta, samples);
}

inline double sgd_expected_imbalance_delta(const ImbalanceTerms& t, double c, double eta, std::size_t samples,
                                           std::size_t batch) {
  return sgd_expected_imbalance_delta<double>({t.psi1, t.psi2, t.omega1, t.omega2}, c, eta, samples, batch);
}

/// E[p pᵀ] for a uniformly random 0/1 mask with exactly B ones out of N.
linalg::Matrix<double> mask_second_moment(std::size_t samples, std::size_t batch);

}  // namespace minimalist
