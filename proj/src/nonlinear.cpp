#include "minimalist/nonlinear.hpp"

#include <cmath>

namespace minimalist {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
  }
  return "unknown";
}

Activation parse_activation(std::string_view text) {
  if (text == "identity" || text == "linear") return Activation::identity;
  if (text == "tanh") return Activation::tanh;
  if (text == "sigmoid") return Activation::sigmoid;
  throw InvalidInput("unsupported activation '" + std::string(text) + "' (expected identity, tanh or sigmoid)");
}

double activation_value(Activation a, double x) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::tanh: return std::tanh(x);
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
  }
  throw InvalidInput("unsupported activation");
}

double activation_derivative(Activation a, double x) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::tanh: {
      const double c = std::cosh(x);
      return 1.0 / (c * c);
    }
    case Activation::sigmoid: {
      const double s = activation_value(a, x);
      return s * (1.0 - s);
    }
  }
  throw InvalidInput("unsupported activation");
}

double activation_inverse(Activation a, double y) {
  switch (a) {
    case Activation::identity: return y;
    case Activation::tanh:
      if (!(std::abs(y) < 1.0)) throw UndefinedQuantity("tanh inverse: |y| must be < 1");
      return std::atanh(y);
    case Activation::sigmoid:
      if (!(y > 0.0 && y < 1.0)) throw UndefinedQuantity("sigmoid inverse: y must lie in (0, 1)");
      return std::log(y / (1.0 - y));
  }
  throw InvalidInput("unsupported activation");
}

double nl_g(Activation a, double x) {
  switch (a) {
    case Activation::identity: return 0.5 * x * x;
    case Activation::tanh: {
      const double c = std::cosh(x);
      return 0.5 * c * c;
    }
    case Activation::sigmoid: return std::exp(x) + x;
  }
  throw InvalidInput("unsupported activation");
}

linalg::Vector<double> nl_forward(const linalg::Matrix<double>& X, const NonlinearParams& theta) {
  if (theta.u.size() != X.cols()) throw InvalidInput("nl_forward: u length != columns of X");
  linalg::Vector<double> out = linalg::matvec<double>(X, theta.u);
  for (auto& x : out) x = activation_value(theta.activation, x) * theta.v1;
  return out;
}

ResidualLoss<double> nl_residual(const Samples<double>& data, const NonlinearParams& theta) {
  if (data.y.size() != data.X.rows()) throw InvalidInput("nl_residual: y length != rows of X");
  linalg::Vector<double> z = nl_forward(data.X, theta);
  for (std::size_t n = 0; n < z.size(); ++n) z[n] -= data.y[n];
  const double loss = linalg::dot<double>(z, z) / (2.0 * static_cast<double>(data.count()));
  return {std::move(z), loss};
}

linalg::Vector<double> nl_gradient(const Samples<double>& data, const NonlinearParams& theta) {
  const auto rl = nl_residual(data, theta);
  const double inv_n = 1.0 / static_cast<double>(data.count());
  const linalg::Vector<double> pre = linalg::matvec<double>(data.X, theta.u);
  linalg::Vector<double> weighted(pre.size());
  double dv = 0.0;
  for (std::size_t n = 0; n < pre.size(); ++n) {
    weighted[n] = rl.z[n] * activation_derivative(theta.activation, pre[n]);
    dv += activation_value(theta.activation, pre[n]) * rl.z[n];
  }
  linalg::Vector<double> g = linalg::matvec_transposed<double>(data.X, weighted);
  for (auto& x : g) x *= inv_n * theta.v1;
  g.push_back(inv_n * dv);
  return g;
}

double nl_layer_imbalance(const NonlinearParams& theta, const SpectralData<double>& sd) {
  if (theta.u.size() != sd.features) throw InvalidInput("nl_layer_imbalance: u length != feature count");
  const auto o = linalg::matvec_transposed<double>(sd.svd.right, theta.u);
  double c = 0.0;
  for (std::size_t i = 0; i < sd.rank(); ++i) {
    const double s = sd.sigma()[i];
    c += 2.0 * nl_g(theta.activation, s * o[i]) / (s * s);
  }
  return c - theta.v1 * theta.v1;
}

NonlinearParams nl_rk4_step(const Samples<double>& data, const NonlinearParams& theta, double h) {
  if (!(h > 0.0)) throw InvalidInput("nl_rk4_step: h must be positive");
  const std::size_t d = theta.u.size();
  auto shifted = [&](const linalg::Vector<double>& k, double scale) {
    NonlinearParams out = theta;
    for (std::size_t j = 0; j < d; ++j) out.u[j] -= scale * k[j];
    out.v1 -= scale * k[d];
    return out;
  };
  const auto k1 = nl_gradient(data, theta);
  const auto k2 = nl_gradient(data, shifted(k1, h / 2));
  const auto k3 = nl_gradient(data, shifted(k2, h / 2));
  const auto k4 = nl_gradient(data, shifted(k3, h));
  linalg::Vector<double> k(d + 1);
  for (std::size_t j = 0; j <= d; ++j) k[j] = (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) / 6.0;
  NonlinearParams out = shifted(k, h);
  if (!linalg::all_finite<double>(out.u) || !std::isfinite(out.v1))
    throw DivergenceError("nl_rk4_step: state became non-finite");
  return out;
}

double nl_solution_equation(const SpectralData<double>& sd, Activation a, double v1, double c) {
  if (v1 == 0.0) throw UndefinedQuantity("nl_solution_equation: v1 = 0 admits no interpolating state");
  double sum = 0.0;
  for (std::size_t i = 0; i < sd.rank(); ++i) {
    const double s = sd.sigma()[i];
    sum += 2.0 * nl_g(a, activation_inverse(a, sd.d_coeffs[i] / v1)) / (s * s);
  }
  return sum - v1 * v1 - c;
}

NonlinearSolution nl_solve(const SpectralData<double>& sd, Activation a, double c) {
  if (sd.rank() == 0) throw UndefinedQuantity("nl_solve: rank-0 data");
  double max_d = 0.0;
  bool all_pos = true;
  bool all_neg = true;
  for (double d : sd.d_coeffs) {
    max_d = std::max(max_d, std::abs(d));
    all_pos = all_pos && d > 0.0;
    all_neg = all_neg && d < 0.0;
  }
  if (!(max_d > 0.0)) throw UndefinedQuantity("nl_solve: labels are orthogonal to col(X)");
  double sign = 1.0;
  if (a == Activation::sigmoid) {
    if (!all_pos && !all_neg) throw UndefinedQuantity("nl_solve: sigmoid needs all d_i of one sign");
    sign = all_pos ? 1.0 : -1.0;
  }

  // The residual decreases in |v_1| and blows up at the lower edge.
  const double lo_edge = a == Activation::identity ? 0.0 : max_d;
  double lo = lo_edge + 1e-9 * std::max(1.0, max_d);
  auto f = [&](double mag) { return nl_solution_equation(sd, a, sign * mag, c); };
  if (!(f(lo) > 0.0)) {
    throw UndefinedQuantity("nl_solve: residual is not positive at the lower end of the admissible range");
  }
  double hi = std::max(1.0, 2.0 * max_d);
  for (int k = 0; k < 200 && f(hi) > 0.0; ++k) hi *= 2.0;
  if (f(hi) > 0.0) throw UndefinedQuantity("nl_solve: could not bracket a root");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  NonlinearSolution sol;
  sol.v1 = sign * 0.5 * (lo + hi);
  sol.residual = nl_solution_equation(sd, a, sol.v1, c);
  sol.o.resize(sd.rank());
  for (std::size_t i = 0; i < sd.rank(); ++i)
    sol.o[i] = activation_inverse(a, sd.d_coeffs[i] / sol.v1) / sd.sigma()[i];
  return sol;
}

}  // namespace minimalist
