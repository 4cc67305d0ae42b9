#pragma once

// Reduced coordinates: u = sum_i o_i w_i + u_perp with (w_i) the right
// singular vectors of X. Only o and v move under GF/GD/SGD; u_perp is frozen.

#include <cstddef>
#include <span>
#include <vector>

#include "minimalist/dataset.hpp"
#include "minimalist/model.hpp"

namespace minimalist {

template <class T>
struct ReparamState {
  linalg::Vector<T> o;       // length r
  linalg::Vector<T> v;       // length D - 1
  linalg::Vector<T> u_perp;  // length d, never updated

  int depth() const { return static_cast<int>(v.size()) + 1; }

  template <class U>
  ReparamState<U> cast() const {
    return {linalg::cast_vector<U, T>(o), linalg::cast_vector<U, T>(v), linalg::cast_vector<U, T>(u_perp)};
  }
};

/// Direction of one optimizer step or ODE right-hand side.
template <class T>
struct Tangent {
  linalg::Vector<T> o;
  linalg::Vector<T> v;
};

template <class T>
ReparamState<T> to_reparam(const Params<T>& theta, const SpectralData<T>& sd) {
  if (theta.u.size() != sd.features) throw InvalidInput("to_reparam: u length != feature count");
  if (theta.v.empty()) throw InvalidInput("to_reparam: depth must be >= 2");
  const auto& w = sd.svd.right;
  ReparamState<T> s;
  s.o = linalg::matvec_transposed<T>(w, theta.u);
  s.v = theta.v;
  s.u_perp = theta.u;
  for (std::size_t i = 0; i < sd.rank(); ++i)
    for (std::size_t j = 0; j < sd.features; ++j) s.u_perp[j] -= s.o[i] * w(j, i);
  return s;
}

template <class T>
Params<T> from_reparam(const ReparamState<T>& s, const SpectralData<T>& sd) {
  Params<T> theta{s.u_perp, s.v};
  const auto& w = sd.svd.right;
  for (std::size_t i = 0; i < sd.rank(); ++i)
    for (std::size_t j = 0; j < sd.features; ++j) theta.u[j] += s.o[i] * w(j, i);
  return theta;
}

template <class T>
void check_state(const ReparamState<T>& s, const SpectralData<T>& sd, const char* who) {
  if (s.o.size() != sd.rank()) {
    throw InvalidInput(std::string(who) + ": state has " + std::to_string(s.o.size()) + " coordinates, rank is " +
                       std::to_string(sd.rank()));
  }
  if (s.v.empty()) throw InvalidInput(std::string(who) + ": depth must be >= 2");
}

/// zeta_i = e_iᵀ z = sigma_i o_i prod v - d_i
template <class T>
linalg::Vector<T> residual_coeffs(const ReparamState<T>& s, const SpectralData<T>& sd) {
  check_state(s, sd, "residual_coeffs");
  const T p = layer_product<T>(s.v);
  linalg::Vector<T> zeta(sd.rank());
  for (std::size_t i = 0; i < sd.rank(); ++i) zeta[i] = sd.sigma()[i] * s.o[i] * p - sd.d_coeffs[i];
  return zeta;
}

/// The N-vector z = sum_i zeta_i e_i (residual against y projected onto col(X)).
template <class T>
linalg::Vector<T> residual_vector(std::span<const T> zeta, const SpectralData<T>& sd) {
  linalg::Vector<T> z(sd.samples, T(0));
  for (std::size_t i = 0; i < zeta.size(); ++i)
    for (std::size_t n = 0; n < sd.samples; ++n) z[n] += zeta[i] * sd.svd.left(n, i);
  return z;
}

/// (1/2N) sum zeta_i²: the loss above its irreducible floor.
template <class T>
T excess_loss(const ReparamState<T>& s, const SpectralData<T>& sd) {
  const auto zeta = residual_coeffs(s, sd);
  return linalg::dot<T>(zeta, zeta) / (T(2) * T(static_cast<double>(sd.samples)));
}

template <class T>
T loss(const ReparamState<T>& s, const SpectralData<T>& sd) {
  return excess_loss(s, sd) + sd.loss_floor();
}

/// Descent direction for the loss sum_i a_i(zeta) with weights
/// a_i = scale * sigma_i * c_i, where c_i is the (possibly masked) residual
/// coefficient. Shared by GF, GD and SGD.
template <class T>
Tangent<T> weighted_descent(const ReparamState<T>& s, const SpectralData<T>& sd, std::span<const T> coeff, T scale) {
  const std::size_t r = sd.rank();
  const std::size_t m = s.v.size();
  const T p = layer_product<T>(s.v);
  Tangent<T> t{linalg::Vector<T>(r), linalg::Vector<T>(m, T(0))};
  linalg::Vector<T> a(r);
  for (std::size_t i = 0; i < r; ++i) a[i] = sd.sigma()[i] * coeff[i];
  for (std::size_t i = 0; i < r; ++i) t.o[i] = -scale * a[i] * p;
  T ao(0);
  for (std::size_t i = 0; i < r; ++i) ao += a[i] * s.o[i];
  for (std::size_t j = 0; j < m; ++j) t.v[j] = -scale * ao * layer_product_except<T>(s.v, j);
  return t;
}

/// Right-hand side of the gradient-flow ODE in reduced coordinates.
template <class T>
Tangent<T> gf_rhs_reparam(const ReparamState<T>& s, const SpectralData<T>& sd) {
  const auto zeta = residual_coeffs(s, sd);
  return weighted_descent<T>(s, sd, zeta, T(1) / T(static_cast<double>(sd.samples)));
}

template <class T>
ReparamState<T> apply(const ReparamState<T>& s, const Tangent<T>& t, T h) {
  ReparamState<T> out = s;
  for (std::size_t i = 0; i < out.o.size(); ++i) out.o[i] += h * t.o[i];
  for (std::size_t j = 0; j < out.v.size(); ++j) out.v[j] += h * t.v[j];
  return out;
}

/// One full-batch gradient-descent step; all coordinates read the pre-step state.
template <class T>
ReparamState<T> gd_step_reparam(const ReparamState<T>& s, const SpectralData<T>& sd, T eta) {
  if (!(eta > T(0))) throw InvalidInput("gd_step_reparam: eta must be positive");
  const auto zeta = residual_coeffs(s, sd);
  const Tangent<T> t = weighted_descent<T>(s, sd, zeta, eta / T(static_cast<double>(sd.samples)));
  ReparamState<T> out = s;
  for (std::size_t i = 0; i < out.o.size(); ++i) out.o[i] += t.o[i];
  for (std::size_t j = 0; j < out.v.size(); ++j) out.v[j] += t.v[j];
  return out;
}

/// e_iᵀ P z for the masked residual.
template <class T>
linalg::Vector<T> masked_coeffs(std::span<const T> zeta, const SpectralData<T>& sd,
                                std::span<const std::size_t> batch) {
  const linalg::Vector<T> z = residual_vector<T>(zeta, sd);
  linalg::Vector<T> c(sd.rank(), T(0));
  for (std::size_t i = 0; i < sd.rank(); ++i)
    for (std::size_t n : batch) c[i] += sd.svd.left(n, i) * z[n];
  return c;
}

inline void check_batch(std::span<const std::size_t> batch, std::size_t samples) {
  if (batch.empty() || batch.size() > samples) throw InvalidInput("batch size must be in [1, N]");
  std::vector<bool> seen(samples, false);
  for (std::size_t n : batch) {
    if (n >= samples) throw InvalidInput("batch index " + std::to_string(n) + " out of range");
    if (seen[n]) throw InvalidInput("batch index " + std::to_string(n) + " repeated");
    seen[n] = true;
  }
}

/// One mini-batch SGD step on (1/2B)||Pz||².
template <class T>
ReparamState<T> sgd_step_reparam(const ReparamState<T>& s, const SpectralData<T>& sd, T eta,
                                 std::span<const std::size_t> batch) {
  if (!(eta > T(0))) throw InvalidInput("sgd_step_reparam: eta must be positive");
  check_batch(batch, sd.samples);
  const auto zeta = residual_coeffs(s, sd);
  const auto c = masked_coeffs<T>(zeta, sd, batch);
  const Tangent<T> t = weighted_descent<T>(s, sd, c, eta / T(static_cast<double>(batch.size())));
  ReparamState<T> out = s;
  for (std::size_t i = 0; i < out.o.size(); ++i) out.o[i] += t.o[i];
  for (std::size_t j = 0; j < out.v.size(); ++j) out.v[j] += t.v[j];
  return out;
}

/// Norm of the full-space gradient (its W⊥ component is zero).
template <class T>
T grad_norm(const ReparamState<T>& s, const SpectralData<T>& sd) {
  using std::sqrt;
  const Tangent<T> t = gf_rhs_reparam(s, sd);
  return sqrt(linalg::dot<T>(t.o, t.o) + linalg::dot<T>(t.v, t.v));
}

/// Exact Hessian of the loss in (o, v) coordinates, size r + D - 1.
template <class T>
linalg::Matrix<T> hessian_reduced(const ReparamState<T>& s, const SpectralData<T>& sd) {
  const auto zeta = residual_coeffs(s, sd);
  const std::size_t r = sd.rank();
  const std::size_t m = s.v.size();
  const auto& sigma = sd.sigma();
  const T p = layer_product<T>(s.v);
  const T inv_n = T(1) / T(static_cast<double>(sd.samples));
  linalg::Vector<T> pj(m);
  for (std::size_t j = 0; j < m; ++j) pj[j] = layer_product_except<T>(s.v, j);

  linalg::Matrix<T> H(r + m, r + m);
  for (std::size_t i = 0; i < r; ++i) {
    H(i, i) = sigma[i] * sigma[i] * p * p;
    for (std::size_t j = 0; j < m; ++j) {
      const T h = sigma[i] * sigma[i] * s.o[i] * p * pj[j] + zeta[i] * sigma[i] * pj[j];
      H(i, r + j) = h;
      H(r + j, i) = h;
    }
  }
  T so2(0);  // sum sigma_i² o_i²
  T zso(0);  // sum zeta_i sigma_i o_i
  for (std::size_t i = 0; i < r; ++i) {
    so2 += sigma[i] * sigma[i] * s.o[i] * s.o[i];
    zso += zeta[i] * sigma[i] * s.o[i];
  }
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = 0; k < m; ++k) {
      T h = so2 * pj[j] * pj[k];
      if (j != k) h += zso * layer_product_except<T>(s.v, j, k);
      H(r + j, r + k) = h;
    }
  for (auto& h : H.entries()) h *= inv_n;
  return H;
}

/// lambda_max of the loss Hessian. The W⊥ block contributes eigenvalue 0
/// whenever d > r.
template <class T>
T sharpness(const ReparamState<T>& s, const SpectralData<T>& sd) {
  const T lam = linalg::sym_eig_max(hessian_reduced(s, sd)).value;
  if (sd.features > sd.rank() && lam < T(0)) return T(0);
  return lam;
}

template <class T>
T sharpness(const Params<T>& theta, const SpectralData<T>& sd) {
  return sharpness(to_reparam(theta, sd), sd);
}

/// Embeds the reduced Hessian into full (u, v) coordinates: Vᵀ H V with V
/// mapping u to o = Wᵀu.
template <class T>
linalg::Matrix<T> embed_reduced_hessian(const linalg::Matrix<T>& Hr, const SpectralData<T>& sd) {
  const std::size_t r = sd.rank();
  const std::size_t m = Hr.rows() - r;
  const std::size_t d = sd.features;
  const auto& w = sd.svd.right;
  linalg::Matrix<T> lift(r + m, d + m);  // rows: reduced coords, cols: full coords
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < d; ++j) lift(i, j) = w(j, i);
  for (std::size_t j = 0; j < m; ++j) lift(r + j, d + j) = T(1);
  return linalg::matmul(lift.transposed(), linalg::matmul(Hr, lift));
}

// ---------------------------------------------------------------------------
// Layer balance

/// C = ||o||² - v_1² (two-layer model only).
template <class T>
T layer_imbalance(const ReparamState<T>& s) {
  if (s.v.size() != 1) throw InvalidInput("layer_imbalance: defined for depth 2 only; use balance_check");
  return linalg::dot<T>(s.o, s.o) - s.v[0] * s.v[0];
}

/// Largest pairwise gap among ||o||, |v_1|, ..., |v_{D-1}|.
template <class T>
T balance_check(const ReparamState<T>& s) {
  using std::abs;
  T lo = linalg::norm<T>(s.o);
  T hi = lo;
  for (const T& x : s.v) {
    lo = std::min(lo, T(abs(x)));
    hi = std::max(hi, T(abs(x)));
  }
  return hi - lo;
}

}  // namespace minimalist
