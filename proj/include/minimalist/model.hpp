#pragma once

// Full-space deep linear model f(x) = (xᵀu) v_1 ... v_{D-1} with one neuron
// per hidden layer. These routines are the reference implementation the
// reduced-coordinate engines are checked against.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "minimalist/dataset.hpp"
#include "minimalist/linalg.hpp"

namespace minimalist {

template <class T>
struct Params {
  linalg::Vector<T> u;  // first layer, length d
  linalg::Vector<T> v;  // scalar layers, length D - 1

  int depth() const { return static_cast<int>(v.size()) + 1; }
  std::size_t size() const { return u.size() + v.size(); }

  /// Flattened (u, v).
  linalg::Vector<T> flatten() const {
    linalg::Vector<T> out(u);
    out.insert(out.end(), v.begin(), v.end());
    return out;
  }
  static Params unflatten(std::span<const T> flat, std::size_t d) {
    if (flat.size() <= d) throw InvalidInput("Params::unflatten: need at least one scalar layer");
    return {linalg::Vector<T>(flat.begin(), flat.begin() + d), linalg::Vector<T>(flat.begin() + d, flat.end())};
  }
  template <class U>
  Params<U> cast() const {
    return {linalg::cast_vector<U, T>(u), linalg::cast_vector<U, T>(v)};
  }
  bool operator==(const Params&) const = default;
};

/// X and y at the run scalar.
template <class T>
struct Samples {
  linalg::Matrix<T> X;
  linalg::Vector<T> y;

  std::size_t count() const { return X.rows(); }
};

template <class T>
Samples<T> cast_dataset(const Dataset& ds) {
  return {ds.X.cast<T>(), linalg::cast_vector<T, double>(ds.y)};
}

// ---------------------------------------------------------------------------
// Products of the scalar layers, computed explicitly (no division, so a zero
// layer is handled exactly).

template <class T>
T layer_product(std::span<const T> v) {
  T p(1);
  for (const T& x : v) p *= x;
  return p;
}

template <class T>
T layer_product_except(std::span<const T> v, std::size_t skip) {
  T p(1);
  for (std::size_t q = 0; q < v.size(); ++q)
    if (q != skip) p *= v[q];
  return p;
}

template <class T>
T layer_product_except(std::span<const T> v, std::size_t skip1, std::size_t skip2) {
  T p(1);
  for (std::size_t q = 0; q < v.size(); ++q)
    if (q != skip1 && q != skip2) p *= v[q];
  return p;
}

template <class T>
void check_shapes(const Samples<T>& data, const Params<T>& theta, const char* who) {
  if (theta.v.empty()) throw InvalidInput(std::string(who) + ": depth must be >= 2");
  if (theta.u.size() != data.X.cols()) {
    throw InvalidInput(std::string(who) + ": u has length " + std::to_string(theta.u.size()) + ", X has " +
                       std::to_string(data.X.cols()) + " columns");
  }
  if (data.y.size() != data.X.rows()) throw InvalidInput(std::string(who) + ": y length != rows of X");
}

/// (Xu) * prod v
template <class T>
linalg::Vector<T> forward(const linalg::Matrix<T>& X, const Params<T>& theta) {
  if (theta.u.size() != X.cols()) throw InvalidInput("forward: u length != columns of X");
  if (theta.v.empty()) throw InvalidInput("forward: depth must be >= 2");
  linalg::Vector<T> out = linalg::matvec<T>(X, theta.u);
  const T p = layer_product<T>(theta.v);
  for (auto& x : out) x *= p;
  return out;
}

template <class T>
struct ResidualLoss {
  linalg::Vector<T> z;
  T loss;
};

template <class T>
ResidualLoss<T> residual_and_loss(const Samples<T>& data, const Params<T>& theta) {
  check_shapes(data, theta, "residual_and_loss");
  linalg::Vector<T> z = forward(data.X, theta);
  for (std::size_t n = 0; n < z.size(); ++n) z[n] -= data.y[n];
  const T loss = linalg::dot<T>(z, z) / (T(2) * T(static_cast<double>(data.count())));
  return {std::move(z), loss};
}

/// Gradient of (1/2N)||z||², flattened as (dL/du, dL/dv).
template <class T>
linalg::Vector<T> gradient(const Samples<T>& data, const Params<T>& theta) {
  const auto [z, loss] = residual_and_loss(data, theta);
  const T inv_n = T(1) / T(static_cast<double>(data.count()));
  const T p = layer_product<T>(theta.v);
  linalg::Vector<T> g = linalg::matvec_transposed<T>(data.X, z);
  for (auto& x : g) x *= inv_n * p;
  const linalg::Vector<T> xu = linalg::matvec<T>(data.X, theta.u);
  const T zxu = linalg::dot<T>(z, xu);
  for (std::size_t j = 0; j < theta.v.size(); ++j) g.push_back(inv_n * zxu * layer_product_except<T>(theta.v, j));
  return g;
}

/// Gradient of the mini-batch loss (1/2B)||Pz||² for the given sample indices.
template <class T>
linalg::Vector<T> minibatch_gradient(const Samples<T>& data, const Params<T>& theta,
                                     std::span<const std::size_t> batch) {
  check_shapes(data, theta, "minibatch_gradient");
  if (batch.empty()) throw InvalidInput("minibatch_gradient: empty batch");
  Samples<T> sub;
  sub.X = linalg::Matrix<T>(batch.size(), data.X.cols());
  sub.y.resize(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    if (batch[k] >= data.count()) throw InvalidInput("minibatch_gradient: index out of range");
    for (std::size_t j = 0; j < data.X.cols(); ++j) sub.X(k, j) = data.X(batch[k], j);
    sub.y[k] = data.y[batch[k]];
  }
  return gradient(sub, theta);
}

/// J = df/dθ, N x p.
template <class T>
linalg::Matrix<T> jacobian(const linalg::Matrix<T>& X, const Params<T>& theta) {
  const std::size_t d = X.cols();
  const std::size_t m = theta.v.size();
  const T p = layer_product<T>(theta.v);
  const linalg::Vector<T> xu = linalg::matvec<T>(X, theta.u);
  linalg::Matrix<T> J(X.rows(), d + m);
  for (std::size_t n = 0; n < X.rows(); ++n) {
    for (std::size_t j = 0; j < d; ++j) J(n, j) = X(n, j) * p;
    for (std::size_t j = 0; j < m; ++j) J(n, d + j) = xu[n] * layer_product_except<T>(theta.v, j);
  }
  return J;
}

/// Neural tangent kernel J Jᵀ (N x N).
template <class T>
linalg::Matrix<T> ntk(const linalg::Matrix<T>& X, const Params<T>& theta) {
  const linalg::Matrix<T> J = jacobian(X, theta);
  return linalg::gram(J.transposed());
}

/// Exact p x p Hessian of the loss, (1/N)(JᵀJ + sum_n z_n ∇²f_n).
template <class T>
linalg::Matrix<T> hessian_full(const Samples<T>& data, const Params<T>& theta) {
  const auto [z, loss] = residual_and_loss(data, theta);
  const std::size_t d = data.X.cols();
  const std::size_t m = theta.v.size();
  const T inv_n = T(1) / T(static_cast<double>(data.count()));
  const linalg::Matrix<T> J = jacobian(data.X, theta);
  linalg::Matrix<T> H = linalg::gram(J);
  const linalg::Vector<T> xtz = linalg::matvec_transposed<T>(data.X, z);
  const linalg::Vector<T> xu = linalg::matvec<T>(data.X, theta.u);
  const T zxu = linalg::dot<T>(z, xu);
  for (std::size_t j = 0; j < m; ++j) {
    const T pj = layer_product_except<T>(theta.v, j);
    for (std::size_t i = 0; i < d; ++i) {
      H(i, d + j) += xtz[i] * pj;
      H(d + j, i) += xtz[i] * pj;
    }
    for (std::size_t k = 0; k < m; ++k)
      if (k != j) H(d + j, d + k) += zxu * layer_product_except<T>(theta.v, j, k);
  }
  for (auto& h : H.entries()) h *= inv_n;
  return H;
}

}  // namespace minimalist
