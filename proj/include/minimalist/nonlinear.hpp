#pragma once

// Two-layer model f(x) = h(xᵀu) v_1 with a scalar activation h. Binary64 only.

#include <string>
#include <string_view>

#include "minimalist/dataset.hpp"
#include "minimalist/model.hpp"

namespace minimalist {

enum class Activation { identity, tanh, sigmoid };

std::string to_string(Activation a);
Activation parse_activation(std::string_view text);

double activation_value(Activation a, double x);       // h
double activation_derivative(Activation a, double x);  // h'
/// h⁻¹(y); throws UndefinedQuantity outside the range of h.
double activation_inverse(Activation a, double y);

/// Antiderivative of h/h' with the fixed branches x²/2, cosh²(x)/2, exp(x) + x.
double nl_g(Activation a, double x);

struct NonlinearParams {
  linalg::Vector<double> u;
  double v1 = 0.0;
  Activation activation = Activation::tanh;
};

linalg::Vector<double> nl_forward(const linalg::Matrix<double>& X, const NonlinearParams& theta);
ResidualLoss<double> nl_residual(const Samples<double>& data, const NonlinearParams& theta);
/// (dL/du, dL/dv_1) flattened.
linalg::Vector<double> nl_gradient(const Samples<double>& data, const NonlinearParams& theta);

/// C = 2 sum_i g(sigma_i o_i)/sigma_i² - v_1², o_i = w_iᵀu.
double nl_layer_imbalance(const NonlinearParams& theta, const SpectralData<double>& sd);

/// One classical RK4 step of gradient flow on the full parameters.
NonlinearParams nl_rk4_step(const Samples<double>& data, const NonlinearParams& theta, double h);

/// 2 sum_i g(h⁻¹(d_i/v_1))/sigma_i² - v_1² - c: zero exactly at interpolating
/// states (o_i = h⁻¹(d_i/v_1)/sigma_i) whose imbalance equals c.
double nl_solution_equation(const SpectralData<double>& sd, Activation a, double v1, double c);

struct NonlinearSolution {
  double v1;
  linalg::Vector<double> o;
  double residual;
};

/// Bisection (200 iterations) for the root of nl_solution_equation over the
/// admissible range of |v_1|; v_1 takes the sign of the labels for sigmoid
/// and is reported positive otherwise.
NonlinearSolution nl_solve(const SpectralData<double>& sd, Activation a, double c);

}  // namespace minimalist
